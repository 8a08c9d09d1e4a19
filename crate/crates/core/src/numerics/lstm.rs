use crate::error::{shape_err, Result};
use crate::numerics::params::{ParamId, ParamStore};
use crate::numerics::rng::RngState;
use crate::numerics::tape::{Tape, Var};
use crate::numerics::tensor::Tensor;

/// Weights of one LSTM cell. Gate blocks are stacked row-wise in the order
/// input, forget, output, candidate: `w_x: [4h, in]`, `w_h: [4h, h]`, `b: [4h]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmCellParams {
    pub w_x: Tensor,
    pub w_h: Tensor,
    pub b: Tensor,
}

impl LstmCellParams {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        LstmCellParams {
            w_x: Tensor::zeros(&[4 * hidden_dim, input_dim]),
            w_h: Tensor::zeros(&[4 * hidden_dim, hidden_dim]),
            b: Tensor::zeros(&[4 * hidden_dim]),
        }
    }

    pub fn uniform(rng: &mut RngState, input_dim: usize, hidden_dim: usize, scale: f64) -> Self {
        LstmCellParams {
            w_x: Tensor::uniform(rng, &[4 * hidden_dim, input_dim], -scale, scale),
            w_h: Tensor::uniform(rng, &[4 * hidden_dim, hidden_dim], -scale, scale),
            b: Tensor::uniform(rng, &[4 * hidden_dim], -scale, scale),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w_x.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_h.cols()
    }

    fn validate(&self) -> Result<()> {
        let h = self.hidden_dim();
        if self.w_x.rows() != 4 * h || self.w_h.rows() != 4 * h || self.b.len() != 4 * h {
            return Err(shape_err("LSTM gate blocks disagree on hidden_dim"));
        }
        Ok(())
    }

    /// Register the three tensors in `store` under `prefix`.
    pub fn register(self, store: &mut ParamStore, prefix: &str) -> Result<LstmCell> {
        self.validate()?;
        let input_dim = self.input_dim();
        let hidden_dim = self.hidden_dim();
        Ok(LstmCell {
            w_x: store.add(format!("{prefix}.w_x"), self.w_x)?,
            w_h: store.add(format!("{prefix}.w_h"), self.w_h)?,
            b: store.add(format!("{prefix}.b"), self.b)?,
            input_dim,
            hidden_dim,
        })
    }
}

/// Handle to an LSTM cell whose weights live in a [`ParamStore`].
#[derive(Debug, Clone, Copy)]
pub struct LstmCell {
    pub w_x: ParamId,
    pub w_h: ParamId,
    pub b: ParamId,
    pub input_dim: usize,
    pub hidden_dim: usize,
}

impl LstmCell {
    pub fn step(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        x: Var,
        h_prev: Var,
        c_prev: Var,
    ) -> Result<(Var, Var)> {
        let w_x = tape.param(store, self.w_x);
        let w_h = tape.param(store, self.w_h);
        let b = tape.param(store, self.b);
        step_vars(tape, self.hidden_dim, w_x, w_h, b, x, h_prev, c_prev)
    }
}

#[allow(clippy::too_many_arguments)]
fn step_vars(
    tape: &mut Tape,
    hidden: usize,
    w_x: Var,
    w_h: Var,
    b: Var,
    x: Var,
    h_prev: Var,
    c_prev: Var,
) -> Result<(Var, Var)> {
    if tape.value(h_prev).len() != hidden || tape.value(c_prev).len() != hidden {
        return Err(shape_err(format!(
            "LSTM state dim {} / {} vs hidden {hidden}",
            tape.value(h_prev).len(),
            tape.value(c_prev).len()
        )));
    }
    let zx = tape.matvec(w_x, x)?;
    let zh = tape.matvec(w_h, h_prev)?;
    let z = tape.add(zx, zh)?;
    let z = tape.add(z, b)?;
    let zi = tape.slice(z, 0, hidden)?;
    let zf = tape.slice(z, hidden, hidden)?;
    let zo = tape.slice(z, 2 * hidden, hidden)?;
    let zg = tape.slice(z, 3 * hidden, hidden)?;
    let i = tape.sigmoid(zi);
    let f = tape.sigmoid(zf);
    let o = tape.sigmoid(zo);
    let g = tape.tanh(zg);
    let keep = tape.mul(f, c_prev)?;
    let write = tape.mul(i, g)?;
    let c = tape.add(keep, write)?;
    let tc = tape.tanh(c);
    let h = tape.mul(o, tc)?;
    Ok((h, c))
}

/// One LSTM step on plain vectors.
pub fn lstm_step(
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
    p: &LstmCellParams,
) -> Result<(Vec<f64>, Vec<f64>)> {
    p.validate()?;
    if x.len() != p.input_dim() {
        return Err(shape_err(format!(
            "LSTM input dim {} vs {}",
            x.len(),
            p.input_dim()
        )));
    }
    let mut tape = Tape::new();
    let w_x = tape.constant(p.w_x.clone());
    let w_h = tape.constant(p.w_h.clone());
    let b = tape.constant(p.b.clone());
    let x = tape.constant(Tensor::vector(x.to_vec()));
    let h = tape.constant(Tensor::vector(h_prev.to_vec()));
    let c = tape.constant(Tensor::vector(c_prev.to_vec()));
    let (h, c) = step_vars(&mut tape, p.hidden_dim(), w_x, w_h, b, x, h, c)?;
    Ok((tape.value(h).data().to_vec(), tape.value(c).data().to_vec()))
}
