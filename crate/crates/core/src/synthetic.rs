//! A small deterministic corpus for smoke tests and overfit runs.
//!
//! Eight two-sentence paragraphs introduce a named entity, refer back to it
//! with a pronoun, and hold a single numeric or date answer in the second
//! sentence. Two further paragraphs carry two numeric answers each. Every
//! numeral in the corpus is an answer.

use serde_json::json;

use crate::corpus::{parse_squad, Article, SquadCorpus};
use crate::error::Result;

/// `(context, question, answer)`.
const QG_PARAGRAPHS: [(&str, &str, &str); 8] = [
    ("Nikola Tesla was a famous inventor. He died in 1943 in New York.", "When did Nikola Tesla die?", "1943"),
    ("The Panthers had a strong season. They scored 24 points in the final.", "How many points did the Panthers score?", "24"),
    ("Marie Curie studied radioactivity. She won 2 Nobel prizes.", "How many Nobel prizes did Marie Curie win?", "2"),
    ("Kyoto is an old city. It has 1600 temples.", "How many temples does Kyoto have?", "1600"),
    ("Amazon sells many books. It was founded in 1994.", "When was Amazon founded?", "1994"),
    ("Beethoven wrote great music. He composed 9 symphonies.", "How many symphonies did Beethoven compose?", "9"),
    ("The Nile is a long river. It flows for 6650 kilometres.", "How long is the Nile?", "6650"),
    ("Armstrong trained as a pilot. He walked on the moon in 1969.", "When did Armstrong walk on the moon?", "1969"),
];

const EXTRA_PARAGRAPHS: [(&str, [(&str, &str); 2]); 2] = [
    (
        "The Golden Gate bridge opened in 1937. The bridge is 2737 metres long.",
        [("When did the Golden Gate bridge open?", "1937"), ("How long is the bridge?", "2737")],
    ),
    (
        "Everest rises 8848 metres above the sea. Climbers first reached the top in 1953.",
        [("How high does Everest rise?", "8848"), ("When did climbers first reach the top?", "1953")],
    ),
];

/// Title of the article holding the eight question-generation paragraphs.
pub const QG_TITLE: &str = "desk-qg";
pub const EXTRA_TITLE: &str = "desk-extra";

/// The corpus in SQuAD v1.1 JSON form.
pub fn desk_squad_json() -> serde_json::Value {
    let qa = |id: String, q: &str, ctx: &str, a: &str| {
        json!({
            "id": id,
            "question": q,
            "answers": [{"text": a, "answer_start": ctx.find(a).expect("answer in context")}],
        })
    };
    let qg: Vec<_> = QG_PARAGRAPHS
        .iter()
        .enumerate()
        .map(|(i, (ctx, q, a))| json!({"context": ctx, "qas": [qa(format!("qg{i}"), q, ctx, a)]}))
        .collect();
    let extra: Vec<_> = EXTRA_PARAGRAPHS
        .iter()
        .enumerate()
        .map(|(i, (ctx, qas))| {
            let qas: Vec<_> = qas
                .iter()
                .enumerate()
                .map(|(j, (q, a))| qa(format!("extra{i}.{j}"), q, ctx, a))
                .collect();
            json!({"context": ctx, "qas": qas})
        })
        .collect();
    json!({
        "version": "1.1",
        "data": [
            {"title": QG_TITLE, "paragraphs": qg},
            {"title": EXTRA_TITLE, "paragraphs": extra},
        ],
    })
}

pub fn desk_corpus() -> Result<SquadCorpus> {
    parse_squad(desk_squad_json().to_string().as_bytes())
}

/// The eight question-generation paragraphs as one article, blank-line separated.
pub fn desk_articles() -> Vec<Article> {
    let text = QG_PARAGRAPHS.iter().map(|(c, _, _)| *c).collect::<Vec<_>>().join("\n\n");
    vec![Article {
        article_id: QG_TITLE.into(),
        text,
    }]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_cleanly() {
        let c = desk_corpus().unwrap();
        assert_eq!(c.paragraphs.len(), 10);
        assert_eq!(c.examples.len(), 12);
        assert_eq!(c.report.text_mismatch + c.report.cross_sentence + c.report.boundary_snapped, 0);
        let qg: Vec<_> = c.examples.iter().filter(|e| c.paragraphs[e.paragraph].article_id == QG_TITLE).collect();
        assert_eq!(qg.len(), 8);
        for e in qg {
            assert_eq!(e.answer.sentence_index, 1);
            assert_eq!(c.paragraphs[e.paragraph].sentences.len(), 2);
        }
    }

    #[test]
    fn articles_split_back_into_paragraphs() {
        let ps = desk_articles()[0].paragraphs();
        let c = desk_corpus().unwrap();
        assert_eq!(ps.len(), 8);
        for (a, b) in ps.iter().zip(&c.paragraphs) {
            assert_eq!(a.text, b.text);
            assert_eq!(a.sentences, b.sentences);
        }
    }
}
