use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::coref::{CorefDocument, Mention, MentionKey};
use crate::error::{Error, Result};

/// Mention-pair coreference score in `[0, 1]` for a pronoun and a candidate antecedent.
pub trait MentionScorer: Send + Sync {
    fn score(&self, doc: &CorefDocument<'_>, antecedent: &Mention, pronoun: &Mention) -> f64;
}

/// `1 / (1 + sentence distance)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct DistanceScorer;

impl MentionScorer for DistanceScorer {
    fn score(&self, _doc: &CorefDocument<'_>, antecedent: &Mention, pronoun: &Mention) -> f64 {
        let d = pronoun.sentence_index.abs_diff(antecedent.sentence_index);
        1.0 / (1.0 + d as f64)
    }
}

/// One line of a score cache file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub doc_id: String,
    pub pronoun: MentionKey,
    pub antecedent: MentionKey,
    pub score: f64,
}

/// Replays scores produced by an external mention-ranking model.
///
/// Pairs missing from the cache are scored by `fallback`, or 0 without one.
pub struct CachedScorer {
    scores: HashMap<(String, MentionKey, MentionKey), f64>,
    fallback: Option<Box<dyn MentionScorer>>,
}

impl CachedScorer {
    pub fn from_records(records: impl IntoIterator<Item = ScoreRecord>) -> Result<Self> {
        let mut scores = HashMap::new();
        for r in records {
            if !r.score.is_finite() {
                return Err(Error::NonFinite(format!("cached score for {}", r.doc_id)));
            }
            scores.insert((r.doc_id, r.pronoun, r.antecedent), r.score);
        }
        Ok(CachedScorer {
            scores,
            fallback: None,
        })
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let records = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str::<ScoreRecord>)
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Self::from_records(records)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_jsonl(&fs::read_to_string(path)?)
    }

    pub fn with_fallback(mut self, fallback: Box<dyn MentionScorer>) -> Self {
        self.fallback = Some(fallback);
        self
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

impl MentionScorer for CachedScorer {
    fn score(&self, doc: &CorefDocument<'_>, antecedent: &Mention, pronoun: &Mention) -> f64 {
        let key = (doc.doc_id.clone(), pronoun.key(), antecedent.key());
        match self.scores.get(&key) {
            Some(s) => *s,
            None => self
                .fallback
                .as_ref()
                .map_or(0.0, |f| f.score(doc, antecedent, pronoun)),
        }
    }
}
