use serde::{Deserialize, Serialize};

use crate::coref::resolver::SENTENCE_OPENERS;
use crate::corpus::Paragraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum NerTag {
    Per,
    Loc,
    Org,
    Num,
    Date,
    O,
}

impl NerTag {
    pub const ALL: [NerTag; 6] = [NerTag::Per, NerTag::Loc, NerTag::Org, NerTag::Num, NerTag::Date, NerTag::O];

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|t| *t == self).unwrap()
    }
}

/// Coarse named-entity tags, one per token of each sentence.
pub trait NerTagger: Send + Sync {
    fn tag(&self, paragraph: &Paragraph) -> Vec<Vec<NerTag>>;
}

const MONTHS: [&str; 12] = [
    "january", "february", "march", "april", "may", "june", "july", "august", "september",
    "october", "november", "december",
];

/// Rule-based stand-in: capitalized words are `PER` (proper nouns collapsed
/// into one tag), years and capitalized month names are `DATE`, other numerals `NUM`.
#[derive(Debug, Clone, Copy, Default)]
pub struct RuleNerTagger;

fn is_numeral(s: &str) -> bool {
    s.chars().next().is_some_and(|c| c.is_ascii_digit())
        && s.chars().all(|c| c.is_ascii_digit() || c == '.' || c == ',')
}

impl NerTagger for RuleNerTagger {
    fn tag(&self, p: &Paragraph) -> Vec<Vec<NerTag>> {
        let chars: Vec<char> = p.text.chars().collect();
        p.sentences
            .iter()
            .map(|sent| {
                sent.iter()
                    .enumerate()
                    .map(|(i, tok)| {
                        let s = tok.surface.as_str();
                        if is_numeral(s) {
                            let year = s.len() == 4
                                && s.chars().all(|c| c.is_ascii_digit())
                                && (1000..2100).contains(&s.parse::<u32>().unwrap_or(0));
                            return if year { NerTag::Date } else { NerTag::Num };
                        }
                        let upper = chars.get(tok.char_start).is_some_and(|c| c.is_uppercase());
                        if upper && MONTHS.contains(&s) {
                            return NerTag::Date;
                        }
                        if upper && !(i == 0 && SENTENCE_OPENERS.contains(&s)) {
                            NerTag::Per
                        } else {
                            NerTag::O
                        }
                    })
                    .collect()
            })
            .collect()
    }
}
