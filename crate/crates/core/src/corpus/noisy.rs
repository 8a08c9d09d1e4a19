use log::info;
use serde::Serialize;

use crate::corpus::{AnswerSpan, Paragraph, QAExample};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoisyReport {
    pub gold: usize,
    pub added: usize,
    pub dropped_no_overlap: usize,
    pub skipped_duplicate: usize,
    /// `added / (gold + added)`.
    pub added_fraction: f64,
}

/// Augment gold examples with predicted spans that overlap a gold span.
///
/// Each overlapping prediction becomes one new example paired with the
/// question of the gold span it overlaps most (earliest gold on ties).
/// Predictions identical to some gold span in the paragraph are not re-added.
/// `predicted[p]` holds the spans predicted for `paragraphs[p]`.
pub fn make_noisy_training_set(
    paragraphs: &[Paragraph],
    gold: &[QAExample],
    predicted: &[Vec<AnswerSpan>],
) -> Result<(Vec<QAExample>, NoisyReport)> {
    let mut out = gold.to_vec();
    let mut report = NoisyReport {
        gold: gold.len(),
        added: 0,
        dropped_no_overlap: 0,
        skipped_duplicate: 0,
        added_fraction: 0.0,
    };
    for (p, spans) in predicted.iter().enumerate() {
        let golds: Vec<&QAExample> = gold.iter().filter(|g| g.paragraph == p).collect();
        for span in spans {
            if golds.iter().any(|g| g.answer.same_tokens(span)) {
                report.skipped_duplicate += 1;
                continue;
            }
            let mut best: Option<(&QAExample, usize)> = None;
            for g in &golds {
                let ov = g.answer.overlap(span);
                if ov > 0 && best.is_none_or(|(_, b)| ov > b) {
                    best = Some((g, ov));
                }
            }
            match best {
                Some((g, _)) => {
                    let ex = QAExample::new(
                        paragraphs,
                        p,
                        format!("{}#noisy{}-{}-{}", g.question_id, span.sentence_index, span.token_start, span.token_end),
                        *span,
                        g.gold_question.clone(),
                    )?;
                    out.push(ex);
                    report.added += 1;
                }
                None => report.dropped_no_overlap += 1,
            }
        }
    }
    if !out.is_empty() {
        report.added_fraction = report.added as f64 / out.len() as f64;
    }
    info!(
        "noisy augmentation: gold={} added={} ({:.2}% of output) dropped={} duplicates={}",
        report.gold,
        report.added,
        100.0 * report.added_fraction,
        report.dropped_no_overlap,
        report.skipped_duplicate
    );
    Ok((out, report))
}
