use std::collections::BTreeMap;

use crate::coref::{CorefCluster, CorefDocument, Mention, MentionKind, MentionScorer};
use crate::error::Result;

/// Closed pronoun list (third person, subject/object/possessive/reflexive).
pub const PRONOUNS: &[&str] = &[
    "he", "him", "his", "himself", "she", "her", "hers", "herself", "it", "its", "itself", "they",
    "them", "their", "theirs", "themselves",
];

/// Words that may be capitalized only because they open a sentence.
pub(crate) const SENTENCE_OPENERS: &[&str] = &[
    "a", "an", "the", "this", "that", "these", "those", "in", "on", "at", "of", "for", "by",
    "after", "before", "during", "when", "while", "however", "there", "as", "from", "with",
    "although", "since", "but", "and", "or", "its", "his", "her", "their", "what", "who",
];

pub trait CorefResolver {
    fn resolve(&self, doc: &CorefDocument<'_>) -> Result<Vec<CorefCluster>>;
}

/// Deterministic stand-in for a trained mention-ranking model.
///
/// Proper-noun mentions are maximal runs of capitalized alphabetic tokens.
/// Mentions with identical surfaces share a cluster, and each pronoun of the
/// target sentence joins the cluster of the nearest proper-noun mention that
/// precedes it, scored by `scorer`.
pub struct HeuristicResolver<S> {
    pub scorer: S,
    pub pronouns: Vec<String>,
}

impl<S: MentionScorer> HeuristicResolver<S> {
    pub fn new(scorer: S) -> Self {
        HeuristicResolver {
            scorer,
            pronouns: PRONOUNS.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn with_pronouns(mut self, pronouns: Vec<String>) -> Self {
        self.pronouns = pronouns;
        self
    }

    fn pronoun_refs(&self) -> Vec<&str> {
        self.pronouns.iter().map(String::as_str).collect()
    }

    fn proper_mentions(&self, doc: &CorefDocument<'_>) -> Vec<Mention> {
        let pronouns = self.pronoun_refs();
        let mut out = Vec::new();
        for (si, sent) in doc.sentences.iter().enumerate() {
            let mut i = 0;
            while i < sent.len() {
                let eligible = |j: usize| {
                    let t = &sent[j];
                    doc.is_capitalized(si, j)
                        && t.surface.chars().next().is_some_and(char::is_alphabetic)
                        && !pronouns.contains(&t.surface.as_str())
                };
                if !eligible(i) {
                    i += 1;
                    continue;
                }
                let mut j = i;
                while j + 1 < sent.len() && eligible(j + 1) {
                    j += 1;
                }
                let mut start = i;
                if start == 0 && SENTENCE_OPENERS.contains(&sent[0].surface.as_str()) {
                    start += 1;
                }
                if start <= j {
                    let mut m = Mention::from_doc(doc, si, start, j, &pronouns);
                    m.kind = MentionKind::Proper;
                    out.push(m);
                }
                i = j + 1;
            }
        }
        out
    }
}

impl<S: MentionScorer> CorefResolver for HeuristicResolver<S> {
    fn resolve(&self, doc: &CorefDocument<'_>) -> Result<Vec<CorefCluster>> {
        let pronouns = self.pronoun_refs();
        let propers = self.proper_mentions(doc);

        // group by surface, keeping first-appearance order
        let mut groups: Vec<(Vec<String>, Vec<Mention>)> = Vec::new();
        for m in &propers {
            match groups.iter_mut().find(|(k, _)| *k == m.tokens) {
                Some((_, ms)) => ms.push(m.clone()),
                None => groups.push((m.tokens.clone(), vec![m.clone()])),
            }
        }
        let mut scores: Vec<BTreeMap<_, f64>> = vec![BTreeMap::new(); groups.len()];
        let mut attached: Vec<Vec<Mention>> = vec![Vec::new(); groups.len()];

        let ti = doc.target_index();
        for (pos, tok) in doc.target().iter().enumerate() {
            if !pronouns.contains(&tok.surface.as_str()) {
                continue;
            }
            let pronoun = Mention::from_doc(doc, ti, pos, pos, &pronouns);
            let nearest = propers
                .iter()
                .filter(|m| (m.sentence_index, m.end) < (ti, pos))
                .max_by_key(|m| (m.sentence_index, m.end, m.start));
            let Some(ante) = nearest else { continue };
            let gi = groups
                .iter()
                .position(|(k, _)| *k == ante.tokens)
                .expect("antecedent comes from a group");
            let s = self.scorer.score(doc, ante, &pronoun).clamp(0.0, 1.0);
            scores[gi].insert(pronoun.key(), s);
            attached[gi].push(pronoun);
        }

        let mut clusters = Vec::new();
        for ((gi, (_, mut mentions)), extra) in groups.into_iter().enumerate().zip(attached) {
            mentions.extend(extra);
            if mentions.len() >= 2 {
                clusters.push(CorefCluster::new(mentions, std::mem::take(&mut scores[gi]))?);
            }
        }
        Ok(clusters)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coref::DistanceScorer;
    use crate::corpus::Paragraph;

    fn clusters(text: &str, sentence: usize) -> Vec<CorefCluster> {
        let p = Paragraph::new("a", 0, text).unwrap();
        let doc = CorefDocument::from_paragraph(&p, sentence).unwrap();
        HeuristicResolver::new(DistanceScorer).resolve(&doc).unwrap()
    }

    #[test]
    fn tesla_he_one_sentence_apart() {
        let cs = clusters("Tesla was renowned for his work. He died in 1943.", 1);
        assert_eq!(cs.len(), 1);
        let texts: Vec<_> = cs[0].mentions.iter().map(|m| m.text()).collect();
        assert_eq!(texts, ["tesla", "he"]);
        let he = cs[0].pronouns().next().unwrap();
        assert_eq!(he.sentence_index, 1);
        assert!((cs[0].score_for(he) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn no_pronouns_no_pronoun_clusters() {
        let cs = clusters("Paris is big. Paris is old.", 1);
        assert!(cs.iter().all(|c| c.pronouns().next().is_none()));
        // the exact-match proper mentions still form a cluster
        assert_eq!(cs.len(), 1);
    }

    #[test]
    fn pronoun_without_antecedent_left_alone() {
        let cs = clusters("the war ended. it was long.", 0);
        assert!(cs.is_empty());
        let cs = clusters("It rained on the town.", 0);
        assert!(cs.is_empty());
    }

    #[test]
    fn same_sentence_antecedent_scores_one() {
        let cs = clusters("Marie Curie said she would return.", 0);
        assert_eq!(cs.len(), 1);
        let she = cs[0].pronouns().next().unwrap();
        assert_eq!(cs[0].score_for(she), 1.0);
        assert_eq!(cs[0].mentions[0].text(), "marie curie");
    }

    #[test]
    fn sentence_initial_determiner_stripped() {
        let cs = clusters("The Panthers won. They celebrated.", 1);
        assert_eq!(cs[0].mentions[0].text(), "panthers");
    }
}
