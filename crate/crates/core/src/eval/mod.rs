//! BLEU, span-overlap metrics and question-type analysis.

pub mod bleu;
pub mod overlap;
pub mod qtype;
pub mod report;

pub use bleu::{bleu, BleuReport};
pub use overlap::{overlap_metrics, OverlapReport, Prf};
pub use qtype::{question_type, question_type_distribution, QUESTION_TYPES};
pub use report::{evaluate_questions, floor_violations, QgEvalReport, METEOR_STATUS};
