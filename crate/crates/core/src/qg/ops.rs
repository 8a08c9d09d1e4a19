//! Building blocks of the generator, as tape operations with plain-vector wrappers.

use crate::error::{shape_err, Result};
use crate::numerics::{Tape, Tensor, Var};
use crate::qg::GatingMode;

/// Gating weights: `w_a: [f, f]`, `w_b: [f, 1]`, `b: [f]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GatingParams {
    pub w_a: Tensor,
    pub w_b: Tensor,
    pub b: Tensor,
}

impl GatingParams {
    pub fn feat_dim(&self) -> usize {
        self.b.len()
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let f = self.feat_dim();
        if self.w_a.shape() != [f, f] || self.w_b.shape() != [f, 1] {
            return Err(shape_err(format!(
                "gating shapes w_a {:?} w_b {:?} b [{f}]",
                self.w_a.shape(),
                self.w_b.shape()
            )));
        }
        Ok(())
    }
}

/// `d = ReLU(W_a c + W_b score + b) ⊙ c`, or `c` itself without gating.
pub(crate) fn gate_vars(
    tape: &mut Tape,
    mode: GatingMode,
    c: Var,
    score: f64,
    w_a: Var,
    w_b: Var,
    b: Var,
) -> Result<Var> {
    if mode == GatingMode::NoGating {
        return Ok(c);
    }
    let score = if mode == GatingMode::ZeroScores { 0.0 } else { score };
    let za = tape.matvec(w_a, c)?;
    let s = tape.constant(Tensor::scalar(score));
    let zb = tape.matvec(w_b, s)?;
    let z = tape.add(za, zb)?;
    let z = tape.add(z, b)?;
    let g = tape.relu(z);
    tape.mul(g, c)
}

/// Refined coreference feature for one token.
pub fn gate_coref_features(c: &[f64], score: f64, p: &GatingParams) -> Result<Vec<f64>> {
    gate_coref_features_with(c, score, p, GatingMode::Gated)
}

pub fn gate_coref_features_with(c: &[f64], score: f64, p: &GatingParams, mode: GatingMode) -> Result<Vec<f64>> {
    p.validate()?;
    if c.len() != p.feat_dim() {
        return Err(shape_err(format!("coref feature dim {} vs {}", c.len(), p.feat_dim())));
    }
    let mut t = Tape::new();
    let cv = t.constant(Tensor::vector(c.to_vec()));
    let (wa, wb, b) = (
        t.constant(p.w_a.clone()),
        t.constant(p.w_b.clone()),
        t.constant(p.b.clone()),
    );
    let d = gate_vars(&mut t, mode, cv, score, wa, wb, b)?;
    Ok(t.value(d).data().to_vec())
}

/// The gate vector `g` itself (before the product with `c`).
pub fn gate_values(c: &[f64], score: f64, p: &GatingParams) -> Result<Vec<f64>> {
    p.validate()?;
    let mut t = Tape::new();
    let cv = t.constant(Tensor::vector(c.to_vec()));
    let wa = t.constant(p.w_a.clone());
    let wb = t.constant(p.w_b.clone());
    let b = t.constant(p.b.clone());
    let za = t.matvec(wa, cv)?;
    let s = t.constant(Tensor::scalar(score));
    let zb = t.matvec(wb, s)?;
    let z = t.add(za, zb)?;
    let z = t.add(z, b)?;
    let g = t.relu(z);
    Ok(t.value(g).data().to_vec())
}

/// `α = softmax(H W_c s_prev)` with `H` the stacked encoder outputs `[n, 2h]`.
pub(crate) fn attention_vars(tape: &mut Tape, enc: Var, w_c: Var, s_prev: Var) -> Result<Var> {
    let v = tape.matvec(w_c, s_prev)?;
    let e = tape.matvec(enc, v)?;
    tape.softmax(e)
}

pub fn attention(s_prev: &[f64], enc: &[Vec<f64>], w_c: &Tensor) -> Result<Vec<f64>> {
    if enc.is_empty() {
        return Err(crate::Error::EmptyDistribution);
    }
    let mut t = Tape::new();
    let rows: Vec<Var> = enc.iter().map(|h| t.constant(Tensor::vector(h.clone()))).collect();
    let h = t.stack_rows(&rows)?;
    let w = t.constant(w_c.clone());
    let s = t.constant(Tensor::vector(s_prev.to_vec()));
    let a = attention_vars(&mut t, h, w, s)?;
    Ok(t.value(a).data().to_vec())
}

/// `P_copy(w) = Σ_i α_i 1{w == w_i}` over a dynamic vocabulary of `dyn_len` ids.
pub(crate) fn copy_vars(tape: &mut Tape, alpha: Var, source_ids: &[usize], dyn_len: usize) -> Result<Var> {
    tape.scatter_add(alpha, source_ids, dyn_len)
}

pub fn copy_distribution(alpha: &[f64], source_ids: &[usize], dyn_len: usize) -> Result<Vec<f64>> {
    let mut t = Tape::new();
    let a = t.constant(Tensor::vector(alpha.to_vec()));
    let p = copy_vars(&mut t, a, source_ids, dyn_len)?;
    Ok(t.value(p).data().to_vec())
}

/// `P = λ P_copy + (1 - λ) P_vocab`, with `P_vocab` zero-extended to the dynamic vocabulary.
pub(crate) fn mix_vars(tape: &mut Tape, lambda: Var, p_copy: Var, p_vocab: Var) -> Result<Var> {
    let n = tape.value(p_copy).len();
    let pv = tape.pad_to(p_vocab, n)?;
    let a = tape.scale_by(lambda, p_copy)?;
    let rest = tape.one_minus(lambda);
    let b = tape.scale_by(rest, pv)?;
    tape.add(a, b)
}

pub fn mix_distributions(lambda: f64, p_copy: &[f64], p_vocab: &[f64]) -> Result<Vec<f64>> {
    let mut t = Tape::new();
    let l = t.constant(Tensor::scalar(lambda));
    let c = t.constant(Tensor::vector(p_copy.to_vec()));
    let v = t.constant(Tensor::vector(p_vocab.to_vec()));
    let p = mix_vars(&mut t, l, c, v)?;
    Ok(t.value(p).data().to_vec())
}
