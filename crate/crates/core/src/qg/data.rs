use serde::{Deserialize, Serialize};

use crate::coref::{transform, CorefDocument, CorefResolver, TransformedSentence};
use crate::corpus::{bio_tag_answer, AnswerSpan, Paragraph, QAExample, Vocabulary};
use crate::error::{Error, Result};
use crate::qg::model::QgSource;

/// One generator training pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QgInstance {
    pub source: QgSource,
    pub target: Vec<String>,
}

/// Coreference-transform the answer sentence and align its answer tags.
pub fn prepare_source<R: CorefResolver + ?Sized>(
    paragraph: &Paragraph,
    answer: &AnswerSpan,
    resolver: &R,
) -> Result<QgSource> {
    let doc = CorefDocument::from_paragraph(paragraph, answer.sentence_index)?;
    let clusters = resolver.resolve(&doc)?;
    let sentence = &paragraph.sentences[answer.sentence_index];
    let ts: TransformedSentence = transform(sentence, doc.target_index(), &clusters)?;
    let original = bio_tag_answer(sentence.len(), answer)?;
    let answer_tags = ts.map_answer_tags(&original)?;
    Ok(QgSource {
        sentence: ts,
        answer_tags,
    })
}

pub fn prepare_instance<R: CorefResolver + ?Sized>(
    paragraphs: &[Paragraph],
    example: &QAExample,
    resolver: &R,
) -> Result<QgInstance> {
    let p = paragraphs
        .get(example.paragraph)
        .ok_or_else(|| Error::OutOfBounds(format!("paragraph {}", example.paragraph)))?;
    Ok(QgInstance {
        source: prepare_source(p, &example.answer, resolver)?,
        target: example.gold_question.clone(),
    })
}

/// Shared source/target vocabulary over transformed sources and gold questions.
pub fn build_qg_vocab(instances: &[QgInstance], limit: usize) -> Vocabulary {
    let tokens = instances
        .iter()
        .flat_map(|i| i.source.sentence.tokens.iter().chain(&i.target));
    crate::corpus::build_vocab(tokens.map(String::as_str), limit)
}

/// Prepared instances for every example of a corpus; failures are logged and counted.
pub fn instances_from_squad<R: CorefResolver + ?Sized>(
    corpus: &crate::corpus::SquadCorpus,
    resolver: &R,
) -> (Vec<QgInstance>, usize) {
    let mut out = Vec::with_capacity(corpus.examples.len());
    let mut skipped = 0;
    for e in &corpus.examples {
        match prepare_instance(&corpus.paragraphs, e, resolver) {
            Ok(i) => out.push(i),
            Err(err) => {
                log::warn!("skipping example {}: {err}", e.question_id);
                skipped += 1;
            }
        }
    }
    (out, skipped)
}
