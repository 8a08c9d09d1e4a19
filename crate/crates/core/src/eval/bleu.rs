use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BleuReport {
    pub max_n: usize,
    /// Modified precision per order, `precisions[k]` for `(k+1)`-grams.
    pub precisions: Vec<f64>,
    pub matches: Vec<usize>,
    pub totals: Vec<usize>,
    pub candidate_length: usize,
    pub reference_length: usize,
    pub brevity_penalty: f64,
    pub bleu: f64,
}

fn ngram_counts<S: AsRef<str>>(tokens: &[S], n: usize) -> HashMap<Vec<&str>, usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w.iter().map(AsRef::as_ref).collect()).or_default() += 1;
        }
    }
    counts
}

/// Corpus-level BLEU-N with one reference per candidate.
///
/// With `smoothing = Some(eps)`, an order with zero matches contributes
/// `eps / total` instead of zeroing the score.
pub fn bleu<S: AsRef<str>>(
    candidates: &[Vec<S>],
    references: &[Vec<S>],
    max_n: usize,
    smoothing: Option<f64>,
) -> Result<BleuReport> {
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("empty corpus".into()));
    }
    if candidates.len() != references.len() {
        return Err(Error::InvalidArgument(format!(
            "{} candidates vs {} references",
            candidates.len(),
            references.len()
        )));
    }
    if max_n == 0 {
        return Err(Error::InvalidArgument("max n-gram order must be positive".into()));
    }
    let mut matches = vec![0usize; max_n];
    let mut totals = vec![0usize; max_n];
    let (mut c, mut r) = (0usize, 0usize);
    for (cand, refr) in candidates.iter().zip(references) {
        c += cand.len();
        r += refr.len();
        for n in 1..=max_n {
            let rc = ngram_counts(refr, n);
            for (g, k) in ngram_counts(cand, n) {
                matches[n - 1] += k.min(rc.get(&g).copied().unwrap_or(0));
                totals[n - 1] += k;
            }
        }
    }
    let precisions: Vec<f64> = matches
        .iter()
        .zip(&totals)
        .map(|(&m, &t)| match (t, m, smoothing) {
            (0, _, _) => 0.0,
            (t, 0, Some(eps)) => eps / t as f64,
            (t, m, _) => m as f64 / t as f64,
        })
        .collect();
    let brevity_penalty = if c == 0 {
        0.0
    } else if c < r {
        (1.0 - r as f64 / c as f64).exp()
    } else {
        1.0
    };
    let bleu = if precisions.contains(&0.0) {
        0.0
    } else {
        let mean_log = precisions.iter().map(|p| p.ln()).sum::<f64>() / max_n as f64;
        brevity_penalty * mean_log.exp()
    };
    Ok(BleuReport {
        max_n,
        precisions,
        matches,
        totals,
        candidate_length: c,
        reference_length: r,
        brevity_penalty,
        bleu,
    })
}
