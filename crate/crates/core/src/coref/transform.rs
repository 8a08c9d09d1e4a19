use serde::{Deserialize, Serialize};

use crate::coref::{select_representative, CorefCluster, Mention, MentionKind};
use crate::corpus::{AnswerTag, Token};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CorefTag {
    #[serde(rename = "B_PRO")]
    BeginPronoun,
    #[serde(rename = "I_PRO")]
    InsidePronoun,
    #[serde(rename = "B_ANT")]
    BeginAntecedent,
    #[serde(rename = "I_ANT")]
    InsideAntecedent,
    #[serde(rename = "O")]
    Outside,
}

impl CorefTag {
    pub const ALL: [CorefTag; 5] = [
        CorefTag::BeginPronoun,
        CorefTag::InsidePronoun,
        CorefTag::BeginAntecedent,
        CorefTag::InsideAntecedent,
        CorefTag::Outside,
    ];

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|t| *t == self).unwrap()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CorefTag::BeginPronoun => "B_PRO",
            CorefTag::InsidePronoun => "I_PRO",
            CorefTag::BeginAntecedent => "B_ANT",
            CorefTag::InsideAntecedent => "I_ANT",
            CorefTag::Outside => "O",
        }
    }

    pub fn is_antecedent(self) -> bool {
        matches!(self, CorefTag::BeginAntecedent | CorefTag::InsideAntecedent)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Origin {
    /// Index into the original sentence.
    Original(usize),
    /// Copy of an antecedent token appended after the pronoun at this original index.
    Appended { pronoun: usize },
}

/// Sentence after antecedent insertion, with per-token coref tags and scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformedSentence {
    pub tokens: Vec<String>,
    pub coref_tags: Vec<CorefTag>,
    pub scores: Vec<f64>,
    pub origin: Vec<Origin>,
}

impl TransformedSentence {
    /// Untransformed sentence: all tags `O`, all scores 0.
    pub fn identity(sentence: &[Token]) -> Self {
        let n = sentence.len();
        TransformedSentence {
            tokens: sentence.iter().map(|t| t.surface.clone()).collect(),
            coref_tags: vec![CorefTag::Outside; n],
            scores: vec![0.0; n],
            origin: (0..n).map(Origin::Original).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Drop appended tokens, recovering the original sentence.
    pub fn original_tokens(&self) -> Vec<String> {
        self.tokens
            .iter()
            .zip(&self.origin)
            .filter(|(_, o)| matches!(o, Origin::Original(_)))
            .map(|(t, _)| t.clone())
            .collect()
    }

    /// Re-index answer tags of the original sentence; appended tokens get `O`.
    pub fn map_answer_tags(&self, original: &[AnswerTag]) -> Result<Vec<AnswerTag>> {
        self.origin
            .iter()
            .map(|o| match o {
                Origin::Original(i) => original
                    .get(*i)
                    .copied()
                    .ok_or_else(|| Error::Shape(format!("answer tags shorter than sentence ({i})"))),
                Origin::Appended { .. } => Ok(AnswerTag::Outside),
            })
            .collect()
    }

    /// Check the tag grammar `(O | B_PRO I_PRO* (B_ANT I_ANT*)?)*` and the score/tag agreement.
    pub fn is_well_formed(&self) -> bool {
        use CorefTag::*;
        let mut prev = Outside;
        for (tag, score) in self.coref_tags.iter().zip(&self.scores) {
            let ok = match tag {
                Outside | BeginPronoun => true,
                InsidePronoun => matches!(prev, BeginPronoun | InsidePronoun),
                BeginAntecedent => matches!(prev, BeginPronoun | InsidePronoun),
                InsideAntecedent => matches!(prev, BeginAntecedent | InsideAntecedent),
            };
            if !ok || (!tag.is_antecedent() && *score != 0.0) {
                return false;
            }
            prev = *tag;
        }
        true
    }
}

/// Insert each target-sentence pronoun's representative antecedent after it.
///
/// `target` is the sentence index of `sentence` within the document the
/// clusters were computed over. Pronouns whose cluster has no non-pronominal
/// mention are left untouched.
pub fn transform(sentence: &[Token], target: usize, clusters: &[CorefCluster]) -> Result<TransformedSentence> {
    let mut expansions: Vec<(&Mention, &Mention, f64)> = Vec::new();
    for cluster in clusters {
        let rep = match select_representative(cluster) {
            Ok(r) => r,
            Err(Error::NoAntecedent) => continue,
            Err(e) => return Err(e),
        };
        for p in cluster.pronouns().filter(|p| p.sentence_index == target) {
            if p.end >= sentence.len() {
                return Err(Error::MalformedClusters(format!(
                    "pronoun {}..={} outside sentence of {}",
                    p.start,
                    p.end,
                    sentence.len()
                )));
            }
            expansions.push((p, rep, cluster.score_for(p)));
        }
    }
    expansions.sort_by_key(|(p, _, _)| (p.start, p.end));
    for w in expansions.windows(2) {
        if w[1].0.start <= w[0].0.end {
            return Err(Error::MalformedClusters(format!(
                "overlapping pronoun spans at {} and {}",
                w[0].0.start, w[1].0.start
            )));
        }
    }

    let mut out = TransformedSentence {
        tokens: Vec::new(),
        coref_tags: Vec::new(),
        scores: Vec::new(),
        origin: Vec::new(),
    };
    let mut next = expansions.iter().peekable();
    let mut i = 0;
    while i < sentence.len() {
        match next.peek() {
            Some((p, rep, score)) if p.start == i => {
                debug_assert_eq!(p.kind, MentionKind::Pronominal);
                for k in p.start..=p.end {
                    out.tokens.push(sentence[k].surface.clone());
                    out.coref_tags.push(if k == p.start {
                        CorefTag::BeginPronoun
                    } else {
                        CorefTag::InsidePronoun
                    });
                    out.scores.push(0.0);
                    out.origin.push(Origin::Original(k));
                }
                for (j, tok) in rep.tokens.iter().enumerate() {
                    out.tokens.push(tok.clone());
                    out.coref_tags.push(if j == 0 {
                        CorefTag::BeginAntecedent
                    } else {
                        CorefTag::InsideAntecedent
                    });
                    out.scores.push(*score);
                    out.origin.push(Origin::Appended { pronoun: p.start });
                }
                i = p.end + 1;
                next.next();
            }
            _ => {
                out.tokens.push(sentence[i].surface.clone());
                out.coref_tags.push(CorefTag::Outside);
                out.scores.push(0.0);
                out.origin.push(Origin::Original(i));
                i += 1;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::coref::{CorefDocument, CorefResolver, DistanceScorer, HeuristicResolver};
    use crate::corpus::{tokenize, Paragraph};
    use proptest::prelude::*;

    fn mention(sent: usize, start: usize, end: usize, kind: MentionKind, text: &str) -> Mention {
        Mention {
            sentence_index: sent,
            start,
            end,
            kind,
            tokens: text.split(' ').map(String::from).collect(),
        }
    }

    fn tags(ts: &TransformedSentence) -> String {
        ts.coref_tags.iter().map(|t| t.as_str()).collect::<Vec<_>>().join(" ")
    }

    #[test]
    fn panthers_example() {
        let sentence = tokenize("they defeated the arizona cardinals 49 - 15");
        let cluster = CorefCluster::new(
            vec![
                mention(0, 0, 1, MentionKind::Nominal, "the panthers"),
                mention(1, 0, 0, MentionKind::Pronominal, "they"),
            ],
            BTreeMap::from([((1, 0, 0), 0.8)]),
        )
        .unwrap();
        let ts = transform(&sentence, 1, &[cluster]).unwrap();
        assert_eq!(
            ts.tokens.join(" "),
            "they the panthers defeated the arizona cardinals 49 - 15"
        );
        assert_eq!(tags(&ts), "B_PRO B_ANT I_ANT O O O O O O O");
        assert_eq!(ts.scores[..4], [0.0, 0.8, 0.8, 0.0]);
        assert!(ts.is_well_formed());
    }

    #[test]
    fn no_pronouns_is_identity() {
        let sentence = tokenize("the sky is blue");
        let ts = transform(&sentence, 0, &[]).unwrap();
        assert_eq!(ts, TransformedSentence::identity(&sentence));
        assert!(ts.scores.iter().all(|s| *s == 0.0));
    }

    #[test]
    fn two_pronouns_same_cluster() {
        // "he said he won" with antecedent "tesla" from a previous sentence
        let sentence = tokenize("he said he won");
        let cluster = CorefCluster::new(
            vec![
                mention(0, 0, 0, MentionKind::Proper, "tesla"),
                mention(1, 0, 0, MentionKind::Pronominal, "he"),
                mention(1, 2, 2, MentionKind::Pronominal, "he"),
            ],
            BTreeMap::from([((1, 0, 0), 0.5), ((1, 2, 2), 0.5)]),
        )
        .unwrap();
        let ts = transform(&sentence, 1, &[cluster]).unwrap();
        assert_eq!(ts.tokens.join(" "), "he tesla said he tesla won");
        assert_eq!(tags(&ts), "B_PRO B_ANT O B_PRO B_ANT O");
        assert_eq!(ts.scores, [0.0, 0.5, 0.0, 0.0, 0.5, 0.0]);
    }

    #[test]
    fn overlapping_pronouns_rejected() {
        let sentence = tokenize("he said");
        let mk = |score| {
            CorefCluster::new(
                vec![
                    mention(0, 0, 0, MentionKind::Proper, "x"),
                    mention(1, 0, 0, MentionKind::Pronominal, "he"),
                ],
                BTreeMap::from([((1, 0, 0), score)]),
            )
            .unwrap()
        };
        assert!(matches!(
            transform(&sentence, 1, &[mk(0.1), mk(0.2)]),
            Err(Error::MalformedClusters(_))
        ));
    }

    #[test]
    fn answer_tags_reindexed() {
        let sentence = tokenize("they defeated the arizona cardinals");
        let cluster = CorefCluster::new(
            vec![
                mention(0, 0, 1, MentionKind::Nominal, "the panthers"),
                mention(1, 0, 0, MentionKind::Pronominal, "they"),
            ],
            BTreeMap::new(),
        )
        .unwrap();
        let ts = transform(&sentence, 1, &[cluster]).unwrap();
        use AnswerTag::*;
        let orig = [Begin, Inside, Outside, Outside, Outside];
        let mapped = ts.map_answer_tags(&orig).unwrap();
        assert_eq!(mapped, [Begin, Outside, Outside, Inside, Outside, Outside, Outside]);
    }

    const WORDS: &[&str] = &["Alice", "Bob", "he", "she", "they", "it", "ran", "the", "Paris", "and", "saw", "."];

    proptest! {
        #[test]
        fn round_trip_and_grammar(words in proptest::collection::vec(0usize..WORDS.len(), 1..25)) {
            let text: String = words.iter().map(|i| WORDS[*i]).collect::<Vec<_>>().join(" ");
            let p = Paragraph::new("a", 0, text).unwrap();
            for s in 0..p.sentences.len() {
                let doc = CorefDocument::from_paragraph(&p, s).unwrap();
                let clusters = HeuristicResolver::new(DistanceScorer).resolve(&doc).unwrap();
                let ts = transform(&p.sentences[s], s, &clusters).unwrap();
                prop_assert_eq!(ts.original_tokens(), p.sentence_surfaces(s));
                prop_assert!(ts.is_well_formed());
                for (tag, score) in ts.coref_tags.iter().zip(&ts.scores) {
                    prop_assert_eq!(*score == 0.0, !tag.is_antecedent());
                }
            }
        }
    }
}
