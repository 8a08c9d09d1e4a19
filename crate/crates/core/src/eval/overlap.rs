use serde::{Deserialize, Serialize};

use crate::corpus::AnswerSpan;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    fn new(precision: f64, recall: f64) -> Self {
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Prf { precision, recall, f1 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OverlapReport {
    pub exact: Prf,
    pub binary: Prf,
    pub proportional: Prf,
    pub predicted: usize,
    pub gold: usize,
    /// Set when either side had no spans at all.
    pub empty: bool,
}

/// Per-span credits `(exact, binary, proportional)` of `span` against `others`.
///
/// The proportional credit uses the maximal-overlap counterpart (earliest on ties)
/// and is normalized by the length of `span`.
fn credit(span: &AnswerSpan, others: &[AnswerSpan]) -> (f64, f64, f64) {
    let mut best: Option<(usize, &AnswerSpan)> = None;
    for o in others {
        let k = span.overlap(o);
        if best.is_none_or(|(b, _)| k > b) {
            best = Some((k, o));
        }
    }
    let exact = others.iter().any(|o| o.same_tokens(span));
    let shared = best.map_or(0, |(k, _)| k);
    (
        f64::from(u8::from(exact)),
        f64::from(u8::from(shared > 0)),
        shared as f64 / span.len() as f64,
    )
}

/// Exact, binary and proportional overlap, with spans grouped per paragraph.
pub fn overlap_metrics(predicted: &[Vec<AnswerSpan>], gold: &[Vec<AnswerSpan>]) -> OverlapReport {
    let mut p = [0.0; 3];
    let mut r = [0.0; 3];
    let (mut np, mut ng) = (0, 0);
    let empty = Vec::new();
    for i in 0..predicted.len().max(gold.len()) {
        let ps = predicted.get(i).unwrap_or(&empty);
        let gs = gold.get(i).unwrap_or(&empty);
        for s in ps {
            let (e, b, q) = credit(s, gs);
            p[0] += e;
            p[1] += b;
            p[2] += q;
        }
        for s in gs {
            let (e, b, q) = credit(s, ps);
            r[0] += e;
            r[1] += b;
            r[2] += q;
        }
        np += ps.len();
        ng += gs.len();
    }
    let div = |x: f64, n: usize| if n == 0 { 0.0 } else { x / n as f64 };
    OverlapReport {
        exact: Prf::new(div(p[0], np), div(r[0], ng)),
        binary: Prf::new(div(p[1], np), div(r[1], ng)),
        proportional: Prf::new(div(p[2], np), div(r[2], ng)),
        predicted: np,
        gold: ng,
        empty: np == 0 || ng == 0,
    }
}
