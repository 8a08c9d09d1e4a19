//! Paragraphs, answer spans and training examples.

pub mod articles;
pub mod noisy;
pub mod squad;
pub mod tokenize;
pub mod vocab;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use articles::{read_articles, split_paragraphs, Article};
pub use noisy::{make_noisy_training_set, NoisyReport};
pub use squad::{parse_squad, IngestReport, SquadCorpus};
pub use tokenize::{char_len, char_slice, split_sentences, tokenize, Token};
pub use vocab::{build_vocab, Vocabulary, EOS, PAD, SOS, UNK};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Paragraph {
    pub article_id: String,
    pub paragraph_index: usize,
    pub text: String,
    pub sentences: Vec<Vec<Token>>,
}

impl Paragraph {
    pub fn new(article_id: impl Into<String>, paragraph_index: usize, text: impl Into<String>) -> Result<Self> {
        let text = text.into();
        let sentences = split_sentences(&text, tokenize(&text));
        if sentences.is_empty() {
            return Err(Error::InvalidArgument("paragraph has no tokens".into()));
        }
        Ok(Paragraph {
            article_id: article_id.into(),
            paragraph_index,
            text,
            sentences,
        })
    }

    pub fn sentence_surfaces(&self, idx: usize) -> Vec<String> {
        self.sentences[idx].iter().map(|t| t.surface.clone()).collect()
    }

    /// All tokens in paragraph order, with their (sentence, position) origin.
    pub fn flat_tokens(&self) -> Vec<(usize, usize, &Token)> {
        self.sentences
            .iter()
            .enumerate()
            .flat_map(|(s, toks)| toks.iter().enumerate().map(move |(i, t)| (s, i, t)))
            .collect()
    }

    pub fn num_tokens(&self) -> usize {
        self.sentences.iter().map(Vec::len).sum()
    }

    pub fn slice(&self, char_start: usize, char_end: usize) -> String {
        char_slice(&self.text, char_start, char_end)
    }
}

/// Token span inside one sentence; `token_end` is inclusive, char bounds are half-open.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AnswerSpan {
    pub sentence_index: usize,
    pub token_start: usize,
    pub token_end: usize,
    pub char_start: usize,
    pub char_end: usize,
}

impl AnswerSpan {
    /// Span over tokens `start..=end` of a sentence, char bounds taken from the tokens.
    pub fn from_tokens(paragraph: &Paragraph, sentence_index: usize, start: usize, end: usize) -> Result<Self> {
        let sent = paragraph
            .sentences
            .get(sentence_index)
            .ok_or_else(|| Error::OutOfBounds(format!("sentence {sentence_index}")))?;
        if start > end || end >= sent.len() {
            return Err(Error::OutOfBounds(format!(
                "tokens {start}..={end} in sentence of {}",
                sent.len()
            )));
        }
        Ok(AnswerSpan {
            sentence_index,
            token_start: start,
            token_end: end,
            char_start: sent[start].char_start,
            char_end: sent[end].char_end,
        })
    }

    pub fn len(&self) -> usize {
        self.token_end + 1 - self.token_start
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Number of shared tokens (0 if in different sentences).
    pub fn overlap(&self, other: &AnswerSpan) -> usize {
        if self.sentence_index != other.sentence_index {
            return 0;
        }
        let lo = self.token_start.max(other.token_start);
        let hi = self.token_end.min(other.token_end);
        if lo > hi {
            0
        } else {
            hi + 1 - lo
        }
    }

    pub fn same_tokens(&self, other: &AnswerSpan) -> bool {
        self.sentence_index == other.sentence_index
            && self.token_start == other.token_start
            && self.token_end == other.token_end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AnswerTag {
    #[serde(rename = "B_ANS")]
    Begin,
    #[serde(rename = "I_ANS")]
    Inside,
    #[serde(rename = "O")]
    Outside,
}

impl AnswerTag {
    pub const ALL: [AnswerTag; 3] = [AnswerTag::Begin, AnswerTag::Inside, AnswerTag::Outside];

    pub fn index(self) -> usize {
        match self {
            AnswerTag::Begin => 0,
            AnswerTag::Inside => 1,
            AnswerTag::Outside => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AnswerTag::Begin => "B_ANS",
            AnswerTag::Inside => "I_ANS",
            AnswerTag::Outside => "O",
        }
    }
}

/// BIO tags for one answer span over a sentence of `sentence_len` tokens.
pub fn bio_tag_answer(sentence_len: usize, span: &AnswerSpan) -> Result<Vec<AnswerTag>> {
    if span.token_start > span.token_end || span.token_end >= sentence_len {
        return Err(Error::OutOfBounds(format!(
            "span {}..={} in sentence of {sentence_len}",
            span.token_start, span.token_end
        )));
    }
    Ok((0..sentence_len)
        .map(|i| {
            if i == span.token_start {
                AnswerTag::Begin
            } else if i > span.token_start && i <= span.token_end {
                AnswerTag::Inside
            } else {
                AnswerTag::Outside
            }
        })
        .collect())
}

/// Minimal token range covering `[char_start, char_start + len(answer_text))`.
///
/// Returns the span and whether its token extent differs from the requested
/// char range (the answer was snapped outward to whole tokens).
pub fn char_to_token_span(
    paragraph: &Paragraph,
    char_start: usize,
    answer_text: &str,
) -> Result<(AnswerSpan, bool)> {
    let total = char_len(&paragraph.text);
    if char_start >= total {
        return Err(Error::OutOfBounds(format!(
            "char_start {char_start} beyond text length {total}"
        )));
    }
    let char_end = (char_start + char_len(answer_text)).min(total);
    let covering: Vec<(usize, usize, &Token)> = paragraph
        .flat_tokens()
        .into_iter()
        .filter(|(_, _, t)| t.char_start < char_end && t.char_end > char_start)
        .collect();
    let (Some(first), Some(last)) = (covering.first(), covering.last()) else {
        return Err(Error::OutOfBounds(format!(
            "no token covers chars {char_start}..{char_end}"
        )));
    };
    if first.0 != last.0 {
        return Err(Error::CrossSentenceAnswer);
    }
    let span = AnswerSpan {
        sentence_index: first.0,
        token_start: first.1,
        token_end: last.1,
        char_start: first.2.char_start,
        char_end: last.2.char_end,
    };
    let snapped = span.char_start != char_start || span.char_end != char_end;
    Ok((span, snapped))
}

/// A gold (or augmented) question-generation training example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QAExample {
    /// Index into the paragraph list it was parsed with.
    pub paragraph: usize,
    pub question_id: String,
    pub answer: AnswerSpan,
    pub gold_question: Vec<String>,
    /// Answer tags over the original (untransformed) sentence.
    pub answer_bio: Vec<AnswerTag>,
}

impl QAExample {
    pub fn new(
        paragraphs: &[Paragraph],
        paragraph: usize,
        question_id: impl Into<String>,
        answer: AnswerSpan,
        gold_question: Vec<String>,
    ) -> Result<Self> {
        if gold_question.is_empty() {
            return Err(Error::InvalidArgument("empty gold question".into()));
        }
        let p = paragraphs
            .get(paragraph)
            .ok_or_else(|| Error::OutOfBounds(format!("paragraph {paragraph}")))?;
        let len = p
            .sentences
            .get(answer.sentence_index)
            .ok_or_else(|| Error::OutOfBounds(format!("sentence {}", answer.sentence_index)))?
            .len();
        let answer_bio = bio_tag_answer(len, &answer)?;
        Ok(QAExample {
            paragraph,
            question_id: question_id.into(),
            answer,
            gold_question,
            answer_bio,
        })
    }
}

/// Recover the single answer span encoded by a BIO sequence, if there is exactly one.
pub fn span_from_bio(tags: &[AnswerTag]) -> Option<(usize, usize)> {
    let start = tags.iter().position(|t| *t == AnswerTag::Begin)?;
    let mut end = start;
    while end + 1 < tags.len() && tags[end + 1] == AnswerTag::Inside {
        end += 1;
    }
    let rest_outside = tags[end + 1..].iter().all(|t| *t == AnswerTag::Outside)
        && tags[..start].iter().all(|t| *t == AnswerTag::Outside);
    rest_outside.then_some((start, end))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tags(s: &str) -> Vec<AnswerTag> {
        s.split_whitespace()
            .map(|t| match t {
                "B_ANS" => AnswerTag::Begin,
                "I_ANS" => AnswerTag::Inside,
                _ => AnswerTag::Outside,
            })
            .collect()
    }

    fn span(s: usize, e: usize) -> AnswerSpan {
        AnswerSpan {
            sentence_index: 0,
            token_start: s,
            token_end: e,
            char_start: 0,
            char_end: 0,
        }
    }

    #[test]
    fn bio_table_row() {
        // they the panthers defeated the arizona cardinals 49 - 15
        let got = bio_tag_answer(10, &span(4, 6)).unwrap();
        assert_eq!(got, tags("O O O O B_ANS I_ANS I_ANS O O O"));
    }

    #[test]
    fn bio_edges() {
        assert_eq!(bio_tag_answer(3, &span(0, 0)).unwrap(), tags("B_ANS O O"));
        assert_eq!(bio_tag_answer(2, &span(0, 1)).unwrap(), tags("B_ANS I_ANS"));
        assert!(bio_tag_answer(2, &span(1, 2)).is_err());
    }

    #[test]
    fn char_to_token_exact() {
        let p = Paragraph::new("a", 0, "the arizona cardinals").unwrap();
        let (s, snapped) = char_to_token_span(&p, 4, "arizona cardinals").unwrap();
        assert_eq!((s.token_start, s.token_end), (1, 2));
        assert!(!snapped);
        let (s, _) = char_to_token_span(&p, 0, "the").unwrap();
        assert_eq!((s.token_start, s.token_end), (0, 0));
    }

    #[test]
    fn char_to_token_snaps_mid_token() {
        let p = Paragraph::new("a", 0, "the arizona cardinals").unwrap();
        // "zona card" starts inside "arizona" and ends inside "cardinals"
        let (s, snapped) = char_to_token_span(&p, 7, "zona card").unwrap();
        assert_eq!((s.token_start, s.token_end), (1, 2));
        assert_eq!((s.char_start, s.char_end), (4, 21));
        assert!(snapped);
    }

    #[test]
    fn char_to_token_errors() {
        let p = Paragraph::new("a", 0, "He left. She stayed.").unwrap();
        assert!(matches!(
            char_to_token_span(&p, 100, "x"),
            Err(Error::OutOfBounds(_))
        ));
        assert!(matches!(
            char_to_token_span(&p, 3, "left. She"),
            Err(Error::CrossSentenceAnswer)
        ));
    }

    #[test]
    fn overlap_counts_shared_tokens() {
        assert_eq!(span(5, 7).overlap(&span(6, 9)), 2);
        assert_eq!(span(5, 7).overlap(&span(8, 9)), 0);
        let mut other = span(5, 7);
        other.sentence_index = 1;
        assert_eq!(span(5, 7).overlap(&other), 0);
    }

    proptest! {
        #[test]
        fn bio_then_recover_is_identity(len in 1usize..30, a in 0usize..30, b in 0usize..30) {
            let (s, e) = (a.min(b) % len, a.max(b) % len);
            let (s, e) = (s.min(e), s.max(e));
            let t = bio_tag_answer(len, &span(s, e)).unwrap();
            prop_assert_eq!(span_from_bio(&t), Some((s, e)));
        }

        #[test]
        fn offsets_round_trip(text in "[A-Za-z0-9 ,.\\-éü]{0,60}") {
            for t in tokenize(&text) {
                prop_assert!(!t.surface.is_empty());
                prop_assert_eq!(char_slice(&text, t.char_start, t.char_end).to_lowercase(), t.surface);
            }
        }
    }
}
