use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{build_vocab, AnswerSpan, AnswerTag, Paragraph, Vocabulary};
use crate::error::{shape_err, Error, Result};
use crate::extractor::crf::{crf_nll_var, viterbi};
use crate::extractor::ner::{NerTag, NerTagger, RuleNerTagger};
use crate::extractor::spans::{decode_spans, paragraph_tags, spans_in_sentences};
use crate::numerics::{
    checkpoint_meta, decode_checkpoint_into, dropout_mask, encode_checkpoint, LstmCell,
    LstmCellParams, ParamId, ParamStore, RngState, Tape, Tensor, Var,
};

/// Number of answer tags (`B_ANS`, `I_ANS`, `O`).
pub const NUM_TAGS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtractorConfig {
    pub word_dim: usize,
    pub char_dim: usize,
    pub char_hidden: usize,
    pub ner_dim: usize,
    /// Per direction, every layer.
    pub hidden: usize,
    pub depth: usize,
    /// Softmax-normalize emission rows before the CRF.
    pub softmax_emissions: bool,
    pub vocab_limit: usize,
    pub dropout: f64,
    pub init_scale: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for ExtractorConfig {
    fn default() -> Self {
        ExtractorConfig {
            word_dim: 32,
            char_dim: 16,
            char_hidden: 16,
            ner_dim: 8,
            hidden: 32,
            depth: 2,
            softmax_emissions: true,
            vocab_limit: 2000,
            dropout: 0.2,
            init_scale: 0.3,
            learning_rate: 0.2,
            batch_size: 1,
            epochs: 80,
            seed: 23,
        }
    }
}

impl ExtractorConfig {
    pub fn paper() -> Self {
        ExtractorConfig {
            word_dim: 128,
            hidden: 256,
            vocab_limit: 50_000,
            batch_size: 64,
            epochs: 15,
            learning_rate: 1.0,
            init_scale: 0.1,
            dropout: 0.3,
            ..Self::default()
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "desk" => Ok(Self::default()),
            "paper" => Ok(Self::paper()),
            other => Err(Error::Config(format!("unknown preset {other:?}"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            self.word_dim,
            self.char_dim,
            self.char_hidden,
            self.ner_dim,
            self.hidden,
            self.depth,
            self.batch_size,
        ];
        if dims.contains(&0) {
            return Err(Error::Config("dimensions, depth and batch size must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} not in [0,1)", self.dropout)));
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        Ok(())
    }

    pub fn token_input_dim(&self) -> usize {
        self.word_dim + 2 * self.char_hidden + self.ner_dim
    }
}

#[derive(Debug, Clone)]
pub struct ExtractorParamIds {
    pub char_emb: ParamId,
    pub char_fwd: LstmCell,
    pub char_bwd: LstmCell,
    pub word_emb: ParamId,
    pub ner_emb: ParamId,
    /// `(forward, backward)` per layer.
    pub layers: Vec<(LstmCell, LstmCell)>,
    pub w_out: ParamId,
    pub b_out: ParamId,
    pub trans: ParamId,
}

#[derive(Debug, Clone)]
pub struct ExtractorNet {
    pub config: ExtractorConfig,
    pub vocab: Vocabulary,
    /// Single characters as tokens.
    pub chars: Vocabulary,
    pub ids: ExtractorParamIds,
}

#[derive(Debug, Clone)]
pub struct ExtractorModel {
    pub net: ExtractorNet,
    pub store: ParamStore,
}

/// Paragraph with its gold answer spans.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractorExample {
    pub paragraph: Paragraph,
    pub gold: Vec<AnswerSpan>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub tags: Vec<AnswerTag>,
    pub spans: Vec<AnswerSpan>,
    pub repaired: usize,
    pub dropped_cross_sentence: usize,
    pub score: f64,
}

#[derive(Serialize, Deserialize)]
struct CheckpointMeta {
    kind: String,
    config: ExtractorConfig,
    vocab: Vocabulary,
    chars: Vocabulary,
}

const KIND: &str = "extractor";

fn dropout(tape: &mut Tape, v: Var, rng: &mut Option<&mut RngState>, p: f64) -> Result<Var> {
    match rng {
        Some(r) if p > 0.0 => {
            let mask = dropout_mask(r, tape.value(v).shape(), p)?;
            tape.mul_const(v, &mask)
        }
        _ => Ok(v),
    }
}

/// Word and character vocabularies from training paragraphs.
pub fn build_extractor_vocabs<'a, I>(paragraphs: I, limit: usize) -> (Vocabulary, Vocabulary)
where
    I: IntoIterator<Item = &'a Paragraph> + Clone,
{
    let words = build_vocab(
        paragraphs
            .clone()
            .into_iter()
            .flat_map(|p| p.sentences.iter().flatten().map(|t| t.surface.as_str())),
        limit,
    );
    let chars = build_vocab(
        paragraphs
            .into_iter()
            .flat_map(|p| p.sentences.iter().flatten().flat_map(|t| t.surface.chars()))
            .map(|c| c.to_string()),
        usize::MAX,
    );
    (words, chars)
}

impl ExtractorNet {
    pub fn build(
        config: ExtractorConfig,
        vocab: Vocabulary,
        chars: Vocabulary,
        rng: &mut RngState,
    ) -> Result<(ExtractorNet, ParamStore)> {
        config.validate()?;
        let s = config.init_scale;
        let mut store = ParamStore::new();
        let char_emb = store.add("char.emb", Tensor::uniform(rng, &[chars.len(), config.char_dim], -s, s))?;
        let char_fwd = LstmCellParams::uniform(rng, config.char_dim, config.char_hidden, s).register(&mut store, "char.fwd")?;
        let char_bwd = LstmCellParams::uniform(rng, config.char_dim, config.char_hidden, s).register(&mut store, "char.bwd")?;
        let word_emb = store.add("word.emb", Tensor::uniform(rng, &[vocab.len(), config.word_dim], -s, s))?;
        let ner_emb = store.add("ner.emb", Tensor::uniform(rng, &[NerTag::ALL.len(), config.ner_dim], -s, s))?;
        let mut layers = Vec::with_capacity(config.depth);
        let mut input = config.token_input_dim();
        for l in 0..config.depth {
            let f = LstmCellParams::uniform(rng, input, config.hidden, s).register(&mut store, &format!("bilstm{l}.fwd"))?;
            let b = LstmCellParams::uniform(rng, input, config.hidden, s).register(&mut store, &format!("bilstm{l}.bwd"))?;
            layers.push((f, b));
            input = 2 * config.hidden;
        }
        let w_out = store.add("out.w", Tensor::uniform(rng, &[NUM_TAGS, input], -s, s))?;
        let b_out = store.add("out.b", Tensor::uniform(rng, &[NUM_TAGS], -s, s))?;
        let k2 = NUM_TAGS + 2;
        let trans = store.add("crf.trans", Tensor::uniform(rng, &[k2, k2], -s, s))?;
        let ids = ExtractorParamIds {
            char_emb,
            char_fwd,
            char_bwd,
            word_emb,
            ner_emb,
            layers,
            w_out,
            b_out,
            trans,
        };
        Ok((ExtractorNet { config, vocab, chars, ids }, store))
    }

    fn char_rep_vars(&self, tape: &mut Tape, store: &ParamStore, word: &str) -> Result<Var> {
        if word.is_empty() {
            return Err(Error::InvalidArgument("empty word".into()));
        }
        let table = tape.param(store, self.ids.char_emb);
        let xs = word
            .chars()
            .map(|c| tape.row(table, self.chars.id(&c.to_string())))
            .collect::<Result<Vec<_>>>()?;
        let zero = tape.constant(Tensor::zeros(&[self.config.char_hidden]));
        let (mut fh, mut fc) = (zero, zero);
        for &x in &xs {
            (fh, fc) = self.ids.char_fwd.step(tape, store, x, fh, fc)?;
        }
        let (mut bh, mut bc) = (zero, zero);
        for &x in xs.iter().rev() {
            (bh, bc) = self.ids.char_bwd.step(tape, store, x, bh, bc)?;
        }
        Ok(tape.concat(&[fh, bh]))
    }

    /// Final forward and backward character-LSTM states of a word.
    pub fn char_rep(&self, store: &ParamStore, word: &str) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let v = self.char_rep_vars(&mut tape, store, word)?;
        Ok(tape.value(v).data().to_vec())
    }

    /// Stacked `[n, k]` emission matrix var.
    fn emission_vars(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        p: &Paragraph,
        ner: &[Vec<NerTag>],
        rng: &mut Option<&mut RngState>,
    ) -> Result<Option<Var>> {
        if ner.len() != p.sentences.len() || ner.iter().zip(&p.sentences).any(|(a, b)| a.len() != b.len()) {
            return Err(shape_err("NER tags not aligned with paragraph tokens"));
        }
        let words = tape.param(store, self.ids.word_emb);
        let ner_table = tape.param(store, self.ids.ner_emb);
        let mut cache: HashMap<&str, Var> = HashMap::new();
        let mut xs = Vec::with_capacity(p.num_tokens());
        for (sent, tags) in p.sentences.iter().zip(ner) {
            for (tok, tag) in sent.iter().zip(tags) {
                let cr = match cache.get(tok.surface.as_str()) {
                    Some(v) => *v,
                    None => {
                        let v = self.char_rep_vars(tape, store, &tok.surface)?;
                        cache.insert(&tok.surface, v);
                        v
                    }
                };
                let w = tape.row(words, self.vocab.id(&tok.surface))?;
                let e = tape.row(ner_table, tag.index())?;
                let x = tape.concat(&[w, cr, e]);
                xs.push(dropout(tape, x, rng, self.config.dropout)?);
            }
        }
        if xs.is_empty() {
            return Ok(None);
        }
        let n = xs.len();
        let zero = tape.constant(Tensor::zeros(&[self.config.hidden]));
        for (fwd, bwd) in &self.ids.layers {
            let (mut h, mut c) = (zero, zero);
            let mut f = Vec::with_capacity(n);
            for &x in &xs {
                (h, c) = fwd.step(tape, store, x, h, c)?;
                f.push(h);
            }
            let (mut h, mut c) = (zero, zero);
            let mut b = vec![zero; n];
            for i in (0..n).rev() {
                (h, c) = bwd.step(tape, store, xs[i], h, c)?;
                b[i] = h;
            }
            xs = Vec::with_capacity(n);
            for i in 0..n {
                let z = tape.concat(&[f[i], b[i]]);
                xs.push(dropout(tape, z, rng, self.config.dropout)?);
            }
        }
        let w = tape.param(store, self.ids.w_out);
        let bias = tape.param(store, self.ids.b_out);
        let mut rows = Vec::with_capacity(n);
        for z in xs {
            let s = tape.matvec(w, z)?;
            let s = tape.add(s, bias)?;
            rows.push(if self.config.softmax_emissions { tape.softmax(s)? } else { s });
        }
        Ok(Some(tape.stack_rows(&rows)?))
    }

    /// Per-token emission scores, `n × 3`.
    pub fn emissions(&self, store: &ParamStore, p: &Paragraph, ner: &[Vec<NerTag>]) -> Result<Tensor> {
        let mut tape = Tape::new();
        Ok(match self.emission_vars(&mut tape, store, p, ner, &mut None)? {
            Some(v) => tape.value(v).clone(),
            None => Tensor::zeros(&[0, NUM_TAGS]),
        })
    }

    fn loss_vars(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        p: &Paragraph,
        ner: &[Vec<NerTag>],
        tags: &[AnswerTag],
        rng: &mut Option<&mut RngState>,
    ) -> Result<Var> {
        let trans = tape.param(store, self.ids.trans);
        let em = match self.emission_vars(tape, store, p, ner, rng)? {
            Some(v) => v,
            None => tape.constant(Tensor::zeros(&[0, NUM_TAGS])),
        };
        let y: Vec<usize> = tags.iter().map(|t| t.index()).collect();
        crf_nll_var(tape, em, trans, &y)
    }

    /// CRF loss for a paragraph labelled with `tags` over its flat tokens.
    pub fn loss(&self, store: &ParamStore, p: &Paragraph, ner: &[Vec<NerTag>], tags: &[AnswerTag]) -> Result<f64> {
        let mut tape = Tape::new();
        let l = self.loss_vars(&mut tape, store, p, ner, tags, &mut None)?;
        Ok(tape.scalar(l))
    }

    /// Loss with its gradient added into the store's grad buffers.
    pub fn loss_backward(
        &self,
        store: &mut ParamStore,
        p: &Paragraph,
        ner: &[Vec<NerTag>],
        tags: &[AnswerTag],
        mut rng: Option<&mut RngState>,
    ) -> Result<f64> {
        let mut tape = Tape::new();
        let l = self.loss_vars(&mut tape, store, p, ner, tags, &mut rng)?;
        let grads = tape.backward(l);
        tape.accumulate_into(&grads, store);
        Ok(tape.scalar(l))
    }

    pub fn predict_with(&self, store: &ParamStore, p: &Paragraph, ner: &[Vec<NerTag>]) -> Result<Prediction> {
        let em = self.emissions(store, p, ner)?;
        let (path, score) = viterbi(&em, store.value(self.ids.trans))?;
        let tags: Vec<AnswerTag> = path
            .into_iter()
            .map(|i| AnswerTag::from_index(i).expect("tag index"))
            .collect();
        let decoded = decode_spans(&tags);
        let (spans, dropped) = spans_in_sentences(p, &decoded.spans)?;
        Ok(Prediction {
            tags,
            spans,
            repaired: decoded.repaired,
            dropped_cross_sentence: dropped,
            score,
        })
    }

    pub fn predict(&self, store: &ParamStore, p: &Paragraph) -> Result<Prediction> {
        self.predict_with(store, p, &RuleNerTagger.tag(p))
    }
}

impl ExtractorModel {
    pub fn new(config: ExtractorConfig, vocab: Vocabulary, chars: Vocabulary) -> Result<Self> {
        let mut rng = RngState::new(config.seed);
        let (net, store) = ExtractorNet::build(config, vocab, chars, &mut rng)?;
        Ok(ExtractorModel { net, store })
    }

    pub fn predict(&self, p: &Paragraph) -> Result<Prediction> {
        self.net.predict(&self.store, p)
    }

    pub fn predict_with(&self, p: &Paragraph, tagger: &dyn NerTagger) -> Result<Prediction> {
        self.net.predict_with(&self.store, p, &tagger.tag(p))
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let meta = CheckpointMeta {
            kind: KIND.into(),
            config: self.net.config.clone(),
            vocab: self.net.vocab.clone(),
            chars: self.net.chars.clone(),
        };
        encode_checkpoint(&self.store, serde_json::to_value(meta)?)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let meta: CheckpointMeta = serde_json::from_value(checkpoint_meta(bytes)?)?;
        if meta.kind != KIND {
            return Err(Error::Checkpoint(format!("expected a {KIND} checkpoint, found {:?}", meta.kind)));
        }
        let mut model = ExtractorModel::new(meta.config, meta.vocab, meta.chars)?;
        decode_checkpoint_into(bytes, &mut model.store)?;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

impl ExtractorExample {
    /// Gold BIO over the flat paragraph tokens (overlapping gold spans after the first are ignored).
    pub fn tags(&self) -> Vec<AnswerTag> {
        paragraph_tags(&self.paragraph, &self.gold).0
    }
}

/// One example per paragraph that has at least one answer, spans sorted and deduplicated.
pub fn examples_from_squad(corpus: &crate::corpus::SquadCorpus) -> Vec<ExtractorExample> {
    let mut by_para: Vec<Vec<AnswerSpan>> = vec![Vec::new(); corpus.paragraphs.len()];
    for e in &corpus.examples {
        by_para[e.paragraph].push(e.answer);
    }
    by_para
        .into_iter()
        .zip(&corpus.paragraphs)
        .filter(|(g, _)| !g.is_empty())
        .map(|(mut gold, p)| {
            gold.sort();
            gold.dedup_by(|a, b| a.same_tokens(b));
            ExtractorExample {
                paragraph: p.clone(),
                gold,
            }
        })
        .collect()
}
