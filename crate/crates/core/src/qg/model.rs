use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::coref::{CorefTag, TransformedSentence};
use crate::corpus::vocab::{Vocabulary, EOS, SOS};
use crate::corpus::AnswerTag;
use crate::error::{shape_err, Error, Result};
use crate::numerics::{
    decode_checkpoint_into, dropout_mask, encode_checkpoint, LstmCell, LstmCellParams, ParamId,
    ParamStore, RngState, Tape, Tensor, Var,
};
use crate::qg::ops::{attention_vars, copy_vars, gate_vars, mix_vars};
use crate::qg::{DynamicVocab, QgConfig};

/// Floor applied to gold-token probabilities before taking logs.
pub const PROB_FLOOR: f64 = 1e-12;

/// Handles of every parameter group in the store.
#[derive(Debug, Clone)]
pub struct QgParamIds {
    pub word_emb: ParamId,
    pub answer_emb: ParamId,
    pub coref_emb: ParamId,
    pub gate_w_a: ParamId,
    pub gate_w_b: ParamId,
    pub gate_b: ParamId,
    pub enc_fwd: LstmCell,
    pub enc_bwd: LstmCell,
    pub dec: LstmCell,
    pub w_c: ParamId,
    pub w_d: ParamId,
    pub w_e: ParamId,
    pub w_f: ParamId,
}

/// Architecture and vocabulary; everything except the parameter values.
#[derive(Debug, Clone)]
pub struct QgNet {
    pub config: QgConfig,
    pub vocab: Vocabulary,
    pub ids: QgParamIds,
}

/// A trained or freshly initialized generator.
#[derive(Debug, Clone)]
pub struct QgModel {
    pub net: QgNet,
    pub store: ParamStore,
}

/// Encoder source: transformed sentence plus aligned answer tags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QgSource {
    pub sentence: TransformedSentence,
    pub answer_tags: Vec<AnswerTag>,
}

impl QgSource {
    pub fn len(&self) -> usize {
        self.sentence.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentence.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderOutput {
    /// `h_i = [fwd_i; bwd_i]` per transformed token.
    pub h: Vec<Vec<f64>>,
    pub init_state: DecoderState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoderState {
    pub s: Vec<f64>,
    pub c: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    /// Distribution over the dynamic vocabulary.
    pub p: Vec<f64>,
    pub lambda: f64,
    pub alpha: Vec<f64>,
    pub state: DecoderState,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NllOutput {
    pub total: f64,
    /// Gold tokens scored, including the closing EOS.
    pub tokens: usize,
    /// Tokens whose probability fell below the floor.
    pub clamped: usize,
}

pub(crate) struct EncodedVars {
    pub stacked: Var,
    pub s0: Var,
    pub c0: Var,
}

pub(crate) struct StepVars {
    pub p: Var,
    pub lambda: Var,
    pub alpha: Var,
    pub s: Var,
    pub c: Var,
}

#[derive(Serialize, Deserialize)]
struct CheckpointMeta {
    kind: String,
    config: QgConfig,
    vocab: Vocabulary,
}

const KIND: &str = "qg";

fn dropout(tape: &mut Tape, v: Var, rng: &mut Option<&mut RngState>, p: f64) -> Result<Var> {
    match rng {
        Some(r) if p > 0.0 => {
            let mask = dropout_mask(r, tape.value(v).shape(), p)?;
            tape.mul_const(v, &mask)
        }
        _ => Ok(v),
    }
}

impl QgNet {
    /// Register all parameter groups, initialized `U(-init_scale, init_scale)`.
    pub fn build(config: QgConfig, vocab: Vocabulary, rng: &mut RngState) -> Result<(QgNet, ParamStore)> {
        config.validate()?;
        let s = config.init_scale;
        let v = vocab.len();
        let (f, a, w) = (config.coref_feat_dim, config.answer_feat_dim, config.word_dim);
        let (h, dh) = (config.encoder_hidden, config.decoder_hidden());
        let mut store = ParamStore::new();
        let mut u = |shape: &[usize]| Tensor::uniform(rng, shape, -s, s);
        let word_emb = u(&[v, w]);
        let answer_emb = u(&[3, a]);
        let coref_emb = u(&[CorefTag::ALL.len(), f]);
        let gate = (u(&[f, f]), u(&[f, 1]), u(&[f]));
        let ids = QgParamIds {
            word_emb: store.add("emb.word", word_emb)?,
            answer_emb: store.add("emb.answer", answer_emb)?,
            coref_emb: store.add("emb.coref", coref_emb)?,
            gate_w_a: store.add("gate.w_a", gate.0)?,
            gate_w_b: store.add("gate.w_b", gate.1)?,
            gate_b: store.add("gate.b", gate.2)?,
            enc_fwd: LstmCellParams::uniform(rng, config.encoder_input_dim(), h, s).register(&mut store, "enc.fwd")?,
            enc_bwd: LstmCellParams::uniform(rng, config.encoder_input_dim(), h, s).register(&mut store, "enc.bwd")?,
            dec: LstmCellParams::uniform(rng, w, dh, s).register(&mut store, "dec")?,
            w_c: store.add("attn.w_c", Tensor::uniform(rng, &[dh, dh], -s, s))?,
            w_d: store.add("out.w_d", Tensor::uniform(rng, &[v, 2 * dh], -s, s))?,
            w_e: store.add("copy.w_e", Tensor::uniform(rng, &[1, dh], -s, s))?,
            w_f: store.add("copy.w_f", Tensor::uniform(rng, &[1, dh], -s, s))?,
        };
        Ok((QgNet { config, vocab, ids }, store))
    }

    pub fn dynamic_vocab(&self, src: &QgSource) -> DynamicVocab {
        DynamicVocab::new(&self.vocab, &src.sentence.tokens)
    }

    pub(crate) fn embed_vars(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        src: &QgSource,
        rng: &mut Option<&mut RngState>,
    ) -> Result<Vec<Var>> {
        let ts = &src.sentence;
        if src.answer_tags.len() != ts.len() || ts.coref_tags.len() != ts.len() || ts.scores.len() != ts.len() {
            return Err(shape_err(format!(
                "{} tokens, {} answer tags, {} coref tags",
                ts.len(),
                src.answer_tags.len(),
                ts.coref_tags.len()
            )));
        }
        let ids = &self.ids;
        let word = tape.param(store, ids.word_emb);
        let ans = tape.param(store, ids.answer_emb);
        let coref = tape.param(store, ids.coref_emb);
        let (wa, wb, b) = (
            tape.param(store, ids.gate_w_a),
            tape.param(store, ids.gate_w_b),
            tape.param(store, ids.gate_b),
        );
        let mut out = Vec::with_capacity(ts.len());
        for i in 0..ts.len() {
            let tag = ts.coref_tags[i];
            let score = if tag == CorefTag::Outside { 0.0 } else { ts.scores[i] };
            let c = tape.row(coref, tag.index())?;
            let d = gate_vars(tape, self.config.gating, c, score, wa, wb, b)?;
            let a = tape.row(ans, src.answer_tags[i].index())?;
            let x = tape.row(word, self.vocab.id(&ts.tokens[i]))?;
            let e = tape.concat(&[d, a, x]);
            out.push(dropout(tape, e, rng, self.config.dropout)?);
        }
        Ok(out)
    }

    pub(crate) fn encode_vars(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        inputs: &[Var],
        rng: &mut Option<&mut RngState>,
    ) -> Result<EncodedVars> {
        if inputs.is_empty() {
            return Err(Error::InvalidArgument("empty source sentence".into()));
        }
        let h = self.config.encoder_hidden;
        let n = inputs.len();
        let zero = tape.constant(Tensor::zeros(&[h]));
        let (mut fh, mut fc) = (zero, zero);
        let mut fwd = Vec::with_capacity(n);
        for &x in inputs {
            (fh, fc) = self.ids.enc_fwd.step(tape, store, x, fh, fc)?;
            fwd.push(fh);
        }
        let (mut bh, mut bc) = (zero, zero);
        let mut bwd = vec![zero; n];
        for i in (0..n).rev() {
            (bh, bc) = self.ids.enc_bwd.step(tape, store, inputs[i], bh, bc)?;
            bwd[i] = bh;
        }
        let mut rows = Vec::with_capacity(n);
        for i in 0..n {
            let hi = tape.concat(&[fwd[i], bwd[i]]);
            rows.push(dropout(tape, hi, rng, self.config.dropout)?);
        }
        let stacked = tape.stack_rows(&rows)?;
        let s0 = tape.concat(&[fh, bh]);
        let c0 = tape.concat(&[fc, bc]);
        Ok(EncodedVars { stacked, s0, c0 })
    }

    #[allow(clippy::too_many_arguments)]
    pub(crate) fn decode_step_vars(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        enc: Var,
        dv: &DynamicVocab,
        prev_input: usize,
        s_prev: Var,
        c_prev: Var,
        rng: &mut Option<&mut RngState>,
    ) -> Result<StepVars> {
        let ids = &self.ids;
        let w_c = tape.param(store, ids.w_c);
        let alpha = attention_vars(tape, enc, w_c, s_prev)?;
        let context = tape.matvec_t(enc, alpha)?;
        let word = tape.param(store, ids.word_emb);
        let x = tape.row(word, prev_input)?;
        let (s, c) = ids.dec.step(tape, store, x, s_prev, c_prev)?;
        let s_out = dropout(tape, s, rng, self.config.dropout)?;
        let w_d = tape.param(store, ids.w_d);
        let joint = tape.concat(&[context, s_out]);
        let logits = tape.matvec(w_d, joint)?;
        let p_vocab = tape.softmax(logits)?;
        let w_e = tape.param(store, ids.w_e);
        let w_f = tape.param(store, ids.w_f);
        let le = tape.matvec(w_e, context)?;
        let lf = tape.matvec(w_f, s_out)?;
        let z = tape.add(le, lf)?;
        let lambda = tape.sigmoid(z);
        let p_copy = copy_vars(tape, alpha, &dv.source_ids, dv.len())?;
        let p = mix_vars(tape, lambda, p_copy, p_vocab)?;
        Ok(StepVars { p, lambda, alpha, s, c })
    }

    /// Teacher-forced negative log-likelihood on the tape. Returns the loss var.
    pub(crate) fn nll_vars(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        src: &QgSource,
        target: &[String],
        mut rng: Option<&mut RngState>,
    ) -> Result<(Var, NllOutput)> {
        let dv = self.dynamic_vocab(src);
        let inputs = self.embed_vars(tape, store, src, &mut rng)?;
        let enc = self.encode_vars(tape, store, &inputs, &mut rng)?;
        let gold: Vec<usize> = target
            .iter()
            .map(|t| dv.id(&self.vocab, t))
            .chain(std::iter::once(EOS))
            .collect();
        let (mut s, mut c) = (enc.s0, enc.c0);
        let mut prev = SOS;
        let mut terms = Vec::with_capacity(gold.len());
        let mut clamped = 0;
        for &y in &gold {
            let step = self.decode_step_vars(tape, store, enc.stacked, &dv, prev, s, c, &mut rng)?;
            let py = tape.pick(step.p, y)?;
            if tape.scalar(py) < PROB_FLOOR {
                clamped += 1;
            }
            terms.push(tape.log_clamped(py, PROB_FLOOR));
            (s, c) = (step.s, step.c);
            prev = dv.input_id(y);
        }
        let ll = tape.sum_scalars(&terms);
        let loss = tape.scale(ll, -1.0);
        let out = NllOutput {
            total: tape.scalar(loss),
            tokens: gold.len(),
            clamped,
        };
        if clamped > 0 {
            log::debug!("{clamped} gold token(s) below probability floor");
        }
        Ok((loss, out))
    }

    pub fn nll_loss(&self, store: &ParamStore, src: &QgSource, target: &[String]) -> Result<NllOutput> {
        let mut tape = Tape::new();
        Ok(self.nll_vars(&mut tape, store, src, target, None)?.1)
    }

    /// Loss with its gradient added into the store's grad buffers.
    pub fn nll_backward(
        &self,
        store: &mut ParamStore,
        src: &QgSource,
        target: &[String],
        rng: Option<&mut RngState>,
    ) -> Result<NllOutput> {
        let mut tape = Tape::new();
        let (loss, out) = self.nll_vars(&mut tape, store, src, target, rng)?;
        let grads = tape.backward(loss);
        tape.accumulate_into(&grads, store);
        Ok(out)
    }

    pub fn embed_inputs(&self, store: &ParamStore, src: &QgSource) -> Result<Vec<Vec<f64>>> {
        let mut tape = Tape::new();
        let vars = self.embed_vars(&mut tape, store, src, &mut None)?;
        Ok(vars.iter().map(|v| tape.value(*v).data().to_vec()).collect())
    }

    pub fn encode(&self, store: &ParamStore, src: &QgSource) -> Result<EncoderOutput> {
        let mut tape = Tape::new();
        let inputs = self.embed_vars(&mut tape, store, src, &mut None)?;
        let enc = self.encode_vars(&mut tape, store, &inputs, &mut None)?;
        let m = tape.value(enc.stacked);
        Ok(EncoderOutput {
            h: (0..m.rows()).map(|r| m.row(r).to_vec()).collect(),
            init_state: DecoderState {
                s: tape.value(enc.s0).data().to_vec(),
                c: tape.value(enc.c0).data().to_vec(),
            },
        })
    }

    /// One decoder step from `state` after emitting dynamic id `prev`.
    pub fn decode_step(
        &self,
        store: &ParamStore,
        enc: &EncoderOutput,
        dv: &DynamicVocab,
        prev: usize,
        state: &DecoderState,
    ) -> Result<StepOutput> {
        if enc.h.len() != dv.source_ids.len() {
            return Err(shape_err("encoder output and dynamic vocabulary disagree on length"));
        }
        let mut tape = Tape::new();
        let rows: Vec<Var> = enc.h.iter().map(|h| tape.constant(Tensor::vector(h.clone()))).collect();
        let stacked = tape.stack_rows(&rows)?;
        let s = tape.constant(Tensor::vector(state.s.clone()));
        let c = tape.constant(Tensor::vector(state.c.clone()));
        let step = self.decode_step_vars(&mut tape, store, stacked, dv, dv.input_id(prev), s, c, &mut None)?;
        Ok(StepOutput {
            p: tape.value(step.p).data().to_vec(),
            lambda: tape.scalar(step.lambda),
            alpha: tape.value(step.alpha).data().to_vec(),
            state: DecoderState {
                s: tape.value(step.s).data().to_vec(),
                c: tape.value(step.c).data().to_vec(),
            },
        })
    }

    /// `exp(total NLL / total gold tokens)` over a dataset.
    pub fn perplexity<'a, I>(&self, store: &ParamStore, data: I) -> Result<f64>
    where
        I: IntoIterator<Item = (&'a QgSource, &'a [String])>,
    {
        let (mut nll, mut tokens) = (0.0, 0usize);
        for (src, tgt) in data {
            let out = self.nll_loss(store, src, tgt)?;
            nll += out.total;
            tokens += out.tokens;
        }
        if tokens == 0 {
            return Err(Error::InvalidArgument("perplexity of an empty dataset".into()));
        }
        Ok((nll / tokens as f64).exp())
    }
}

impl QgModel {
    pub fn new(config: QgConfig, vocab: Vocabulary) -> Result<Self> {
        let mut rng = RngState::new(config.seed);
        let (net, store) = QgNet::build(config, vocab, &mut rng)?;
        Ok(QgModel { net, store })
    }

    pub fn config(&self) -> &QgConfig {
        &self.net.config
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.net.vocab
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let meta = CheckpointMeta {
            kind: KIND.into(),
            config: self.net.config.clone(),
            vocab: self.net.vocab.clone(),
        };
        encode_checkpoint(&self.store, serde_json::to_value(meta)?)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let meta: CheckpointMeta = serde_json::from_value(crate::numerics::checkpoint_meta(bytes)?)?;
        if meta.kind != KIND {
            return Err(Error::Checkpoint(format!("expected a {KIND} checkpoint, found {:?}", meta.kind)));
        }
        let mut model = QgModel::new(meta.config, meta.vocab)?;
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
