//! Coreference transform: append each pronoun's representative antecedent
//! after it and emit pronoun/antecedent BIO tags plus mention-pair scores.

pub(crate) mod resolver;
mod scorer;
mod transform;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{Paragraph, Token};
use crate::error::{Error, Result};

pub use resolver::{CorefResolver, HeuristicResolver, PRONOUNS};
pub use scorer::{CachedScorer, DistanceScorer, MentionScorer, ScoreRecord};
pub use transform::{transform, CorefTag, Origin, TransformedSentence};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MentionKind {
    Pronominal,
    Proper,
    Nominal,
}

/// Key identifying a mention inside a document: (sentence, first token, last token).
pub type MentionKey = (usize, usize, usize);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mention {
    pub sentence_index: usize,
    /// Inclusive token span.
    pub start: usize,
    pub end: usize,
    pub kind: MentionKind,
    pub tokens: Vec<String>,
}

impl Mention {
    pub fn key(&self) -> MentionKey {
        (self.sentence_index, self.start, self.end)
    }

    pub fn len(&self) -> usize {
        self.end + 1 - self.start
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }

    /// Mention over `doc` tokens; pronominal iff a single token in `pronouns`.
    pub fn from_doc(doc: &CorefDocument<'_>, sentence_index: usize, start: usize, end: usize, pronouns: &[&str]) -> Self {
        let tokens: Vec<String> = doc.sentences[sentence_index][start..=end]
            .iter()
            .map(|t| t.surface.clone())
            .collect();
        let kind = if tokens.len() == 1 && pronouns.contains(&tokens[0].as_str()) {
            MentionKind::Pronominal
        } else if doc.is_capitalized(sentence_index, start) {
            MentionKind::Proper
        } else {
            MentionKind::Nominal
        };
        Mention {
            sentence_index,
            start,
            end,
            kind,
            tokens,
        }
    }
}

/// Mentions referring to one entity, plus the score of each pronoun's chosen
/// antecedent pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorefCluster {
    pub mentions: Vec<Mention>,
    pub scores: BTreeMap<MentionKey, f64>,
}

impl CorefCluster {
    pub fn new(mut mentions: Vec<Mention>, scores: BTreeMap<MentionKey, f64>) -> Result<Self> {
        if mentions.len() < 2 {
            return Err(Error::MalformedClusters("cluster needs at least two mentions".into()));
        }
        mentions.sort_by_key(|m| (m.sentence_index, m.start, std::cmp::Reverse(m.end)));
        Ok(CorefCluster { mentions, scores })
    }

    pub fn pronouns(&self) -> impl Iterator<Item = &Mention> {
        self.mentions.iter().filter(|m| m.kind == MentionKind::Pronominal)
    }

    pub fn score_for(&self, pronoun: &Mention) -> f64 {
        self.scores.get(&pronoun.key()).copied().unwrap_or(0.0)
    }
}

/// Earliest proper-noun mention, else earliest nominal; ties on position go to the longer span.
pub fn select_representative(cluster: &CorefCluster) -> Result<&Mention> {
    let pick = |kind: MentionKind| {
        cluster
            .mentions
            .iter()
            .filter(|m| m.kind == kind)
            .min_by_key(|m| (m.sentence_index, m.start, std::cmp::Reverse(m.len())))
    };
    pick(MentionKind::Proper)
        .or_else(|| pick(MentionKind::Nominal))
        .ok_or(Error::NoAntecedent)
}

/// Context sentences `C` followed by the target sentence `S`, over one paragraph.
#[derive(Debug, Clone)]
pub struct CorefDocument<'a> {
    pub doc_id: String,
    pub text: &'a str,
    pub sentences: &'a [Vec<Token>],
    text_chars: Vec<char>,
}

impl<'a> CorefDocument<'a> {
    /// `C` = every sentence of the paragraph before `sentence_index`.
    pub fn from_paragraph(p: &'a Paragraph, sentence_index: usize) -> Result<Self> {
        if sentence_index >= p.sentences.len() {
            return Err(Error::OutOfBounds(format!("sentence {sentence_index}")));
        }
        Ok(CorefDocument {
            doc_id: format!("{}/{}", p.article_id, p.paragraph_index),
            text: &p.text,
            sentences: &p.sentences[..=sentence_index],
            text_chars: p.text.chars().collect(),
        })
    }

    pub fn target_index(&self) -> usize {
        self.sentences.len() - 1
    }

    pub fn target(&self) -> &[Token] {
        &self.sentences[self.target_index()]
    }

    /// Whether the original text of a token starts with an uppercase letter.
    pub fn is_capitalized(&self, sentence: usize, token: usize) -> bool {
        let t = &self.sentences[sentence][token];
        self.text_chars
            .get(t.char_start)
            .is_some_and(|c| c.is_uppercase())
    }
}
