use crate::error::{Error, Result};
use crate::numerics::params::ParamStore;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Parameter name and flat coordinate of the worst disagreement.
    pub worst: Option<(String, usize)>,
    pub coordinates: usize,
}

impl GradCheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_error < tol
    }
}

/// Compare analytic gradients against central differences.
///
/// `loss` must return the loss and leave its analytic gradient in the store's
/// grad buffers (it is responsible for zeroing them first). Each coordinate's
/// error is `|analytic - numeric| / max(1, |analytic|, |numeric|)`.
pub fn grad_check<F>(store: &mut ParamStore, eps: f64, mut loss: F) -> Result<GradCheckReport>
where
    F: FnMut(&mut ParamStore) -> Result<f64>,
{
    if !(1e-6..=1e-3).contains(&eps) {
        return Err(Error::InvalidArgument(format!("eps {eps} outside [1e-6, 1e-3]")));
    }
    let base = loss(store)?;
    if !base.is_finite() {
        return Err(Error::NonFinite("loss".into()));
    }
    let analytic: Vec<Vec<f64>> = store.iter().map(|p| p.grad.data().to_vec()).collect();
    let ids: Vec<_> = store.ids().collect();

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        coordinates: 0,
    };
    for (pi, id) in ids.into_iter().enumerate() {
        for k in 0..store.get(id).value.len() {
            let orig = store.get(id).value.data()[k];
            store.value_mut(id).data_mut()[k] = orig + eps;
            let up = loss(store)?;
            store.value_mut(id).data_mut()[k] = orig - eps;
            let down = loss(store)?;
            store.value_mut(id).data_mut()[k] = orig;
            if !up.is_finite() || !down.is_finite() {
                return Err(Error::NonFinite("loss".into()));
            }
            let numeric = (up - down) / (2.0 * eps);
            let a = analytic[pi][k];
            let rel = (a - numeric).abs() / 1f64.max(a.abs()).max(numeric.abs());
            report.coordinates += 1;
            if rel > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = report.max_rel_error.max(rel);
                report.worst = Some((store.get(id).name.clone(), k));
            }
        }
    }
    // leave the analytic gradient in place for the caller
    for (p, g) in store.iter_mut().zip(analytic) {
        p.grad.data_mut().copy_from_slice(&g);
    }
    Ok(report)
}
