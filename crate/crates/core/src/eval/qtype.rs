use std::collections::BTreeMap;

/// Question categories; multi-word prefixes are matched before shorter ones.
pub const QUESTION_TYPES: [&str; 14] = [
    "in what",
    "when",
    "how long",
    "who",
    "where",
    "what does",
    "what do",
    "what is",
    "what was",
    "what percentage",
    "what did",
    "why",
    "which",
    "other",
];

/// Category of a tokenized (lowercased) question by longest matching prefix.
pub fn question_type<S: AsRef<str>>(tokens: &[S]) -> &'static str {
    let mut best: Option<(usize, &'static str)> = None;
    for cat in &QUESTION_TYPES[..QUESTION_TYPES.len() - 1] {
        let words: Vec<&str> = cat.split(' ').collect();
        let hit = tokens.len() >= words.len()
            && words
                .iter()
                .zip(tokens)
                .all(|(w, t)| t.as_ref().eq_ignore_ascii_case(w));
        if hit && best.is_none_or(|(n, _)| words.len() > n) {
            best = Some((words.len(), cat));
        }
    }
    best.map_or("other", |(_, c)| c)
}

/// Histogram over every category (zero counts included).
pub fn question_type_distribution<S: AsRef<str>>(questions: &[Vec<S>]) -> BTreeMap<&'static str, usize> {
    let mut hist: BTreeMap<&'static str, usize> = QUESTION_TYPES.iter().map(|c| (*c, 0)).collect();
    for q in questions {
        *hist.get_mut(question_type(q)).expect("known category") += 1;
    }
    hist
}
