use serde::{Deserialize, Serialize};

use crate::corpus::{AnswerSpan, AnswerTag, Paragraph};
use crate::error::Result;

/// Token spans (inclusive) read off a BIO sequence.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DecodedSpans {
    pub spans: Vec<(usize, usize)>,
    /// Bare `I_ANS` tags that were treated as `B_ANS`.
    pub repaired: usize,
}

/// Each maximal `B I*` run becomes a span; a bare `I` opens one.
pub fn decode_spans(tags: &[AnswerTag]) -> DecodedSpans {
    let mut out = DecodedSpans::default();
    let mut open: Option<usize> = None;
    for (i, tag) in tags.iter().enumerate() {
        match tag {
            AnswerTag::Begin => {
                if let Some(s) = open.take() {
                    out.spans.push((s, i - 1));
                }
                open = Some(i);
            }
            AnswerTag::Inside if open.is_none() => {
                out.repaired += 1;
                open = Some(i);
            }
            AnswerTag::Inside => {}
            AnswerTag::Outside => {
                if let Some(s) = open.take() {
                    out.spans.push((s, i - 1));
                }
            }
        }
    }
    if let Some(s) = open {
        out.spans.push((s, tags.len() - 1));
    }
    out
}

/// Flat index of the first token of each sentence.
pub fn sentence_offsets(p: &Paragraph) -> Vec<usize> {
    let mut acc = 0;
    p.sentences
        .iter()
        .map(|s| {
            let o = acc;
            acc += s.len();
            o
        })
        .collect()
}

/// BIO tags over the paragraph's flat token sequence. Spans overlapping an
/// earlier span are skipped; the number skipped is returned.
pub fn paragraph_tags(p: &Paragraph, spans: &[AnswerSpan]) -> (Vec<AnswerTag>, usize) {
    let offsets = sentence_offsets(p);
    let mut tags = vec![AnswerTag::Outside; p.num_tokens()];
    let mut skipped = 0;
    for s in spans {
        let (a, b) = (offsets[s.sentence_index] + s.token_start, offsets[s.sentence_index] + s.token_end);
        if tags[a..=b].iter().any(|t| *t != AnswerTag::Outside) {
            skipped += 1;
            continue;
        }
        tags[a] = AnswerTag::Begin;
        for t in &mut tags[a + 1..=b] {
            *t = AnswerTag::Inside;
        }
    }
    (tags, skipped)
}

/// Map flat spans back into sentences; spans that cross a sentence boundary
/// are dropped and counted.
pub fn spans_in_sentences(p: &Paragraph, flat: &[(usize, usize)]) -> Result<(Vec<AnswerSpan>, usize)> {
    let offsets = sentence_offsets(p);
    let locate = |i: usize| offsets.partition_point(|&o| o <= i) - 1;
    let mut out = Vec::new();
    let mut dropped = 0;
    for &(a, b) in flat {
        let (sa, sb) = (locate(a), locate(b));
        if sa != sb {
            dropped += 1;
            continue;
        }
        out.push(AnswerSpan::from_tokens(p, sa, a - offsets[sa], b - offsets[sa])?);
    }
    Ok((out, dropped))
}

/// One predicted span as written to JSONL.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictedSpanRecord {
    pub article_id: String,
    pub paragraph_index: usize,
    pub sentence_index: usize,
    pub token_start: usize,
    pub token_end: usize,
    pub char_start: usize,
    pub char_end: usize,
    pub text: String,
}

impl PredictedSpanRecord {
    pub fn new(p: &Paragraph, s: &AnswerSpan) -> Self {
        PredictedSpanRecord {
            article_id: p.article_id.clone(),
            paragraph_index: p.paragraph_index,
            sentence_index: s.sentence_index,
            token_start: s.token_start,
            token_end: s.token_end,
            char_start: s.char_start,
            char_end: s.char_end,
            text: p.slice(s.char_start, s.char_end),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::bio_tag_answer;
    use proptest::prelude::*;
    use AnswerTag::*;

    #[test]
    fn rules() {
        assert_eq!(decode_spans(&[Outside, Begin, Inside, Outside]).spans, vec![(1, 2)]);
        assert_eq!(decode_spans(&[Begin, Begin]).spans, vec![(0, 0), (1, 1)]);
        let r = decode_spans(&[Outside, Inside, Outside]);
        assert_eq!(r.spans, vec![(1, 1)]);
        assert_eq!(r.repaired, 1);
        assert_eq!(decode_spans(&[Inside, Inside, Begin]).spans, vec![(0, 1), (2, 2)]);
        assert!(decode_spans(&[]).spans.is_empty());
    }

    #[test]
    fn flat_mapping_and_cross_sentence_drop() {
        let p = Paragraph::new("a", 0, "Tesla was born in 1856. He died in 1943.").unwrap();
        let (spans, dropped) = spans_in_sentences(&p, &[(4, 4), (5, 7), (10, 10)]).unwrap();
        assert_eq!(dropped, 1);
        assert_eq!(spans[0].sentence_index, 0);
        assert_eq!(p.slice(spans[0].char_start, spans[0].char_end), "1856");
        assert_eq!((spans[1].sentence_index, spans[1].token_start), (1, 4));
        let (tags, skipped) = paragraph_tags(&p, &spans);
        assert_eq!(skipped, 0);
        assert_eq!(decode_spans(&tags).spans, vec![(4, 4), (10, 10)]);
        let rec = PredictedSpanRecord::new(&p, &spans[1]);
        assert_eq!(rec.text, ".");
    }

    proptest! {
        #[test]
        fn decode_inverts_bio_tagging(len in 1usize..20, a in 0usize..20, l in 0usize..20) {
            let a = a % len;
            let b = (a + l).min(len - 1);
            let span = AnswerSpan { sentence_index: 0, token_start: a, token_end: b, char_start: 0, char_end: 0 };
            let tags = bio_tag_answer(len, &span).unwrap();
            let d = decode_spans(&tags);
            prop_assert_eq!(d.spans, vec![(a, b)]);
            prop_assert_eq!(d.repaired, 0);
        }
    }
}
