use crate::error::{Error, Result};
use crate::numerics::params::ParamStore;
use crate::numerics::rng::RngState;
use crate::numerics::tensor::Tensor;

pub const CLIP_LO: f64 = -5.0;
pub const CLIP_HI: f64 = 5.0;

/// Plain SGD with elementwise gradient clamping into `[clip_lo, clip_hi]`.
pub fn sgd_step(store: &mut ParamStore, lr: f64, clip_lo: f64, clip_hi: f64) -> Result<()> {
    if !lr.is_finite() || lr <= 0.0 {
        return Err(Error::InvalidArgument(format!("learning rate must be positive, got {lr}")));
    }
    if clip_lo > clip_hi {
        return Err(Error::InvalidArgument("clip_lo > clip_hi".into()));
    }
    for p in store.iter_mut() {
        for (v, g) in p.value.data_mut().iter_mut().zip(p.grad.data()) {
            *v -= lr * g.clamp(clip_lo, clip_hi);
        }
    }
    Ok(())
}

/// Inverted-dropout mask: each entry is `0` with probability `p`, else `1/(1-p)`.
pub fn dropout_mask(rng: &mut RngState, shape: &[usize], p: f64) -> Result<Tensor> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("dropout p must be in [0,1), got {p}")));
    }
    let mut mask = Tensor::zeros(shape);
    let keep = 1.0 / (1.0 - p);
    for m in mask.data_mut() {
        *m = if p == 0.0 || rng.next_f64() >= p { keep } else { 0.0 };
    }
    Ok(mask)
}
