use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the coreference position feature reaches the encoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GatingMode {
    /// `d_i = ReLU(W_a c_i + W_b score_i + b) ⊙ c_i`.
    #[default]
    Gated,
    /// `d_i = c_i` (ablation: gating removed).
    NoGating,
    /// Gate applied with every `score_i` forced to 0 (ablation: mention-pair score removed).
    ZeroScores,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QgConfig {
    pub word_dim: usize,
    pub coref_feat_dim: usize,
    pub answer_feat_dim: usize,
    /// Per direction; the decoder state is twice this.
    pub encoder_hidden: usize,
    pub vocab_limit: usize,
    pub dropout: f64,
    pub init_scale: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub beam_size: usize,
    pub max_decode_len: usize,
    pub gating: GatingMode,
    pub seed: u64,
}

impl Default for QgConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl QgConfig {
    pub fn desk() -> Self {
        QgConfig {
            word_dim: 32,
            coref_feat_dim: 16,
            answer_feat_dim: 16,
            encoder_hidden: 64,
            vocab_limit: 200,
            dropout: 0.3,
            init_scale: 0.1,
            learning_rate: 0.5,
            batch_size: 4,
            epochs: 300,
            beam_size: 3,
            max_decode_len: 30,
            gating: GatingMode::Gated,
            seed: 17,
        }
    }

    pub fn paper() -> Self {
        QgConfig {
            word_dim: 128,
            encoder_hidden: 256,
            vocab_limit: 50_000,
            learning_rate: 1.0,
            batch_size: 64,
            epochs: 15,
            ..Self::desk()
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "desk" => Ok(Self::desk()),
            "paper" => Ok(Self::paper()),
            other => Err(Error::Config(format!("unknown preset {other:?}"))),
        }
    }

    pub fn decoder_hidden(&self) -> usize {
        2 * self.encoder_hidden
    }

    pub fn encoder_input_dim(&self) -> usize {
        self.coref_feat_dim + self.answer_feat_dim + self.word_dim
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            self.word_dim,
            self.coref_feat_dim,
            self.answer_feat_dim,
            self.encoder_hidden,
            self.batch_size,
            self.beam_size,
            self.max_decode_len,
        ];
        if dims.contains(&0) {
            return Err(Error::Config("dimensions, batch, beam and max length must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} not in [0,1)", self.dropout)));
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        Ok(())
    }
}
