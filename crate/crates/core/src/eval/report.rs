use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::eval::{bleu, BleuReport, OverlapReport};

pub const METEOR_STATUS: &str = "not implemented";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QgEvalReport {
    pub count: usize,
    /// BLEU-1 through BLEU-4.
    pub bleu: Vec<BleuReport>,
    pub meteor: String,
}

pub fn evaluate_questions<S: AsRef<str>>(
    candidates: &[Vec<S>],
    references: &[Vec<S>],
    smoothing: Option<f64>,
) -> Result<QgEvalReport> {
    let bleu = (1..=4)
        .map(|n| bleu(candidates, references, n, smoothing))
        .collect::<Result<Vec<_>>>()?;
    Ok(QgEvalReport {
        count: candidates.len(),
        bleu,
        meteor: METEOR_STATUS.into(),
    })
}

impl QgEvalReport {
    pub fn metrics(&self) -> BTreeMap<String, f64> {
        self.bleu.iter().map(|b| (format!("bleu{}", b.max_n), b.bleu)).collect()
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{:<10} {:>8}\n", "metric", "value");
        for b in &self.bleu {
            s += &format!("{:<10} {:>8.4}\n", format!("BLEU-{}", b.max_n), b.bleu);
        }
        if let Some(b4) = self.bleu.last() {
            s += &format!("{:<10} {:>8.4}\n", "BP", b4.brevity_penalty);
        }
        s += &format!("{:<10} {:>8}\n", "questions", self.count);
        s += &format!("METEOR: {}\n", self.meteor);
        s
    }
}

impl OverlapReport {
    pub fn metrics(&self) -> BTreeMap<String, f64> {
        let mut m = BTreeMap::new();
        for (name, prf) in [("exact", self.exact), ("binary", self.binary), ("proportional", self.proportional)] {
            m.insert(format!("{name}_precision"), prf.precision);
            m.insert(format!("{name}_recall"), prf.recall);
            m.insert(format!("{name}_f1"), prf.f1);
        }
        m
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{:<14} {:>9} {:>9} {:>9}\n", "regime", "precision", "recall", "f1");
        for (name, prf) in [("exact", self.exact), ("binary", self.binary), ("proportional", self.proportional)] {
            s += &format!("{:<14} {:>9.4} {:>9.4} {:>9.4}\n", name, prf.precision, prf.recall, prf.f1);
        }
        s += &format!("predicted {} gold {}{}\n", self.predicted, self.gold, if self.empty { " (empty)" } else { "" });
        s
    }
}

/// Metrics that fall below their configured floor, as `name value < floor` lines.
pub fn floor_violations(metrics: &BTreeMap<String, f64>, floors: &BTreeMap<String, f64>) -> Vec<String> {
    floors
        .iter()
        .filter_map(|(name, floor)| match metrics.get(name) {
            Some(v) if v >= floor => None,
            Some(v) => Some(format!("{name} {v:.4} < {floor}")),
            None => Some(format!("{name} missing (floor {floor})")),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_mentions_meteor_and_bleu() {
        let c = vec![vec!["who", "?"]];
        let r = evaluate_questions(&c, &c, None).unwrap();
        let text = r.to_text();
        assert!(text.contains("METEOR: not implemented"));
        assert!(text.contains("BLEU-1"));
        // a 2-token question has no 3- or 4-grams
        assert_eq!(r.metrics()["bleu2"], 1.0);
        assert_eq!(r.metrics()["bleu4"], 0.0);
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"meteor\":\"not implemented\""));
    }

    #[test]
    fn floors() {
        let m: BTreeMap<String, f64> = [("bleu4".to_string(), 0.2)].into();
        let f: BTreeMap<String, f64> = [("bleu4".to_string(), 0.3), ("bleu1".to_string(), 0.0)].into();
        let v = floor_violations(&m, &f);
        assert_eq!(v.len(), 2);
        assert!(floor_violations(&m, &BTreeMap::new()).is_empty());
    }
}
