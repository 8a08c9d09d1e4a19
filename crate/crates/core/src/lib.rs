//! Answer-span extraction and coreference-gated question generation for
//! harvesting question/answer pairs from plain articles.

pub mod coref;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod extractor;
pub mod gradsuite;
pub mod harvest;
pub mod numerics;
pub mod qg;
pub mod synthetic;

pub use corpus::{AnswerSpan, AnswerTag, Article, Paragraph, QAExample, Vocabulary};
pub use error::{Error, Result};
pub use extractor::{ExtractorConfig, ExtractorModel};
pub use harvest::{HarvestRecord, PipelineConfig};
pub use qg::{GatingMode, QgConfig, QgModel};
