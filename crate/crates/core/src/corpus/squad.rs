//! SQuAD v1.1 reader.
//!
//! Expected shape (extra fields are ignored):
//!
//! ```text
//! {
//!   "version": "1.1",                     optional
//!   "data": [{
//!     "title": "Nikola_Tesla",            optional; used as article_id
//!     "paragraphs": [{
//!       "context": "...",                 paragraph text
//!       "qas": [{
//!         "id": "...",                    optional
//!         "question": "...",
//!         "answers": [{"text": "...", "answer_start": 17}]
//!       }]
//!     }]
//!   }]
//! }
//! ```
//!
//! `answer_start` counts Unicode scalar values into `context`.

use std::collections::HashSet;
use std::fmt;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::corpus::tokenize::{char_slice, tokenize};
use crate::corpus::{char_to_token_span, Paragraph, QAExample};
use crate::error::{Error, Result};

#[derive(Debug, Deserialize, Serialize)]
pub struct SquadFile {
    #[serde(default)]
    pub version: Option<String>,
    pub data: Vec<SquadArticle>,
}

#[derive(Debug, Deserialize, Serialize)]
pub struct SquadArticle {
    #[serde(default)]
    pub title: Option<String>,
    pub paragraphs: Vec<SquadParagraph>,
}

#[derive(Debug, Deserialize, Serialize)]
pub struct SquadParagraph {
    pub context: String,
    pub qas: Vec<SquadQa>,
}

#[derive(Debug, Deserialize, Serialize)]
pub struct SquadQa {
    #[serde(default)]
    pub id: Option<String>,
    pub question: String,
    #[serde(default)]
    pub answers: Vec<SquadAnswer>,
}

#[derive(Debug, Deserialize, Serialize)]
pub struct SquadAnswer {
    pub text: String,
    pub answer_start: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct IngestReport {
    pub paragraphs: usize,
    pub empty_paragraphs: usize,
    pub questions: usize,
    pub examples: usize,
    pub no_answer: usize,
    pub empty_question: usize,
    pub text_mismatch: usize,
    pub out_of_bounds: usize,
    pub cross_sentence: usize,
    pub boundary_snapped: usize,
    pub duplicate_answers: usize,
}

impl fmt::Display for IngestReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "paragraphs={} (empty {}) questions={} examples={} skipped: no-answer={} empty-question={} \
             text-mismatch={} out-of-bounds={} cross-sentence={} duplicate={}; boundary-snapped={}",
            self.paragraphs,
            self.empty_paragraphs,
            self.questions,
            self.examples,
            self.no_answer,
            self.empty_question,
            self.text_mismatch,
            self.out_of_bounds,
            self.cross_sentence,
            self.duplicate_answers,
            self.boundary_snapped
        )
    }
}

#[derive(Debug, Clone)]
pub struct SquadCorpus {
    pub paragraphs: Vec<Paragraph>,
    pub examples: Vec<QAExample>,
    /// Question ids whose answer was widened to whole tokens.
    pub snapped: Vec<String>,
    pub report: IngestReport,
}

pub fn parse_squad(bytes: &[u8]) -> Result<SquadCorpus> {
    let file: SquadFile = serde_json::from_slice(bytes)?;
    let mut paragraphs = Vec::new();
    let mut examples = Vec::new();
    let mut snapped = Vec::new();
    let mut report = IngestReport::default();

    for (ai, article) in file.data.into_iter().enumerate() {
        let article_id = article.title.unwrap_or_else(|| format!("article{ai}"));
        for (pi, sp) in article.paragraphs.into_iter().enumerate() {
            let paragraph = match Paragraph::new(article_id.clone(), pi, sp.context) {
                Ok(p) => p,
                Err(_) => {
                    report.empty_paragraphs += 1;
                    report.questions += sp.qas.len();
                    report.no_answer += sp.qas.len();
                    continue;
                }
            };
            report.paragraphs += 1;
            let pidx = paragraphs.len();
            for (qi, qa) in sp.qas.into_iter().enumerate() {
                report.questions += 1;
                let qid = qa.id.unwrap_or_else(|| format!("{article_id}/{pi}/{qi}"));
                let question: Vec<String> = tokenize(&qa.question).into_iter().map(|t| t.surface).collect();
                if question.is_empty() {
                    report.empty_question += 1;
                    warn!("skipping {qid}: empty question");
                    continue;
                }
                if qa.answers.is_empty() {
                    report.no_answer += 1;
                    continue;
                }
                let mut seen = HashSet::new();
                for ans in qa.answers {
                    let end = ans.answer_start + ans.text.chars().count();
                    if char_slice(&paragraph.text, ans.answer_start, end) != ans.text {
                        report.text_mismatch += 1;
                        warn!("skipping {qid}: answer text not found at {}", ans.answer_start);
                        continue;
                    }
                    let (span, was_snapped) = match char_to_token_span(&paragraph, ans.answer_start, &ans.text) {
                        Ok(x) => x,
                        Err(Error::CrossSentenceAnswer) => {
                            report.cross_sentence += 1;
                            warn!("skipping {qid}: cross-sentence answer");
                            continue;
                        }
                        Err(e) => {
                            report.out_of_bounds += 1;
                            warn!("skipping {qid}: {e}");
                            continue;
                        }
                    };
                    if !seen.insert(span) {
                        report.duplicate_answers += 1;
                        continue;
                    }
                    if was_snapped {
                        report.boundary_snapped += 1;
                        snapped.push(qid.clone());
                    }
                    let ex = QAExample::new(std::slice::from_ref(&paragraph), 0, qid.clone(), span, question.clone())?;
                    examples.push(QAExample { paragraph: pidx, ..ex });
                    report.examples += 1;
                }
            }
            paragraphs.push(paragraph);
        }
    }
    info!("squad ingest: {report}");
    Ok(SquadCorpus {
        paragraphs,
        examples,
        snapped,
        report,
    })
}
