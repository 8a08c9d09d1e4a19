use std::collections::HashMap;

use crate::corpus::vocab::{Vocabulary, UNK};

/// Target vocabulary extended with the source sentence's out-of-vocabulary surfaces.
///
/// Ids below `base` are target-vocabulary ids; id `base + k` is the k-th
/// distinct OOV source surface in order of appearance.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicVocab {
    base: usize,
    extra: Vec<String>,
    extra_ids: HashMap<String, usize>,
    /// Dynamic id of each source position.
    pub source_ids: Vec<usize>,
}

impl DynamicVocab {
    pub fn new(vocab: &Vocabulary, source: &[String]) -> Self {
        let base = vocab.len();
        let mut extra = Vec::new();
        let mut extra_ids = HashMap::new();
        let source_ids = source
            .iter()
            .map(|tok| match vocab.get(tok) {
                Some(id) => id,
                None => *extra_ids.entry(tok.clone()).or_insert_with(|| {
                    extra.push(tok.clone());
                    base + extra.len() - 1
                }),
            })
            .collect();
        DynamicVocab {
            base,
            extra,
            extra_ids,
            source_ids,
        }
    }

    pub fn len(&self) -> usize {
        self.base + self.extra.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn base_len(&self) -> usize {
        self.base
    }

    /// Dynamic id for a target token; tokens in neither vocabulary map to UNK.
    pub fn id(&self, vocab: &Vocabulary, token: &str) -> usize {
        vocab
            .get(token)
            .or_else(|| self.extra_ids.get(token).copied())
            .unwrap_or(UNK)
    }

    pub fn token<'a>(&'a self, vocab: &'a Vocabulary, id: usize) -> &'a str {
        if id < self.base {
            vocab.token(id).unwrap_or("<unk>")
        } else {
            self.extra.get(id - self.base).map_or("<unk>", String::as_str)
        }
    }

    /// Id to feed back into the decoder's word embedding (OOV copies become UNK).
    pub fn input_id(&self, id: usize) -> usize {
        if id < self.base {
            id
        } else {
            UNK
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::build_vocab;

    #[test]
    fn extends_with_oov_sources() {
        let v = build_vocab(["the", "cat"], 10);
        let src: Vec<String> = ["the", "zebra", "cat", "zebra", "okapi"].iter().map(|s| s.to_string()).collect();
        let d = DynamicVocab::new(&v, &src);
        assert_eq!(d.len(), v.len() + 2);
        assert_eq!(d.source_ids[1], v.len());
        assert_eq!(d.source_ids[3], v.len());
        assert_eq!(d.source_ids[4], v.len() + 1);
        assert_eq!(d.token(&v, v.len() + 1), "okapi");
        assert_eq!(d.id(&v, "zebra"), v.len());
        assert_eq!(d.id(&v, "nowhere"), UNK);
        assert_eq!(d.input_id(v.len()), UNK);
    }
}
