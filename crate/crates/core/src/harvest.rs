//! Article-to-QA-pair pipeline: extract answer spans, coreference-transform
//! each answer sentence against its preceding context, and decode a question.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::coref::{CorefResolver, DistanceScorer, HeuristicResolver};
use crate::corpus::{Article, AnswerSpan, Paragraph};
use crate::error::{Error, Result};
use crate::extractor::ExtractorModel;
use crate::qg::{prepare_source, Generated, QgModel, QgSource};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarvestRecord {
    pub article_id: String,
    pub paragraph_index: usize,
    pub sentence_index: usize,
    pub question: String,
    pub answer_text: String,
    /// Half-open char bounds in the paragraph text.
    pub answer_char_start: usize,
    pub answer_char_end: usize,
    /// Inclusive token bounds in the sentence.
    pub answer_token_start: usize,
    pub answer_token_end: usize,
    /// Beam log-probability of the question.
    pub score: f64,
    pub unterminated: bool,
    pub question_mark_appended: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub extractor_checkpoint: PathBuf,
    pub qg_checkpoint: PathBuf,
    /// Optional vocabulary JSON that must match the one stored in the generator checkpoint.
    pub vocab: Option<PathBuf>,
    /// `desk` or `paper`; selects training presets for the train commands.
    pub preset: String,
    pub beam_size: usize,
    pub max_decode_len: usize,
    pub span_cap: usize,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            extractor_checkpoint: PathBuf::from("extractor.ckpt"),
            qg_checkpoint: PathBuf::from("qg.ckpt"),
            vocab: None,
            preset: "desk".into(),
            beam_size: 3,
            max_decode_len: 30,
            span_cap: 10,
            seed: 7,
        }
    }
}

impl PipelineConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let c: PipelineConfig = serde_json::from_str(&text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.beam_size == 0 || self.max_decode_len == 0 || self.span_cap == 0 {
            return Err(Error::Config("beam size, max decode length and span cap must be positive".into()));
        }
        if !matches!(self.preset.as_str(), "desk" | "paper") {
            return Err(Error::Config(format!("unknown preset {:?}", self.preset)));
        }
        Ok(())
    }

    /// Load both checkpoints, failing if either file is missing or malformed.
    pub fn load_models(&self) -> Result<(ExtractorModel, QgModel)> {
        for p in self.referenced_files() {
            if !p.is_file() {
                return Err(Error::Io(std::io::Error::new(
                    std::io::ErrorKind::NotFound,
                    format!("{} not found", p.display()),
                )));
            }
        }
        let ext = ExtractorModel::load(&self.extractor_checkpoint)?;
        let qg = QgModel::load(&self.qg_checkpoint)?;
        if let Some(path) = &self.vocab {
            let v: crate::corpus::Vocabulary = serde_json::from_str(&std::fs::read_to_string(path)?)?;
            if &v != qg.vocab() {
                return Err(Error::Checkpoint(format!("vocabulary {} does not match the generator checkpoint", path.display())));
            }
        }
        Ok((ext, qg))
    }

    pub fn referenced_files(&self) -> Vec<&Path> {
        let mut out = vec![self.extractor_checkpoint.as_path(), self.qg_checkpoint.as_path()];
        out.extend(self.vocab.as_deref());
        out
    }
}

pub trait SpanExtractor {
    /// Answer spans in paragraph order.
    fn extract(&self, paragraph: &Paragraph) -> Result<Vec<AnswerSpan>>;
}

pub trait QuestionGenerator {
    fn generate(&self, source: &QgSource, beam: usize, max_len: usize) -> Result<Generated>;
}

impl SpanExtractor for ExtractorModel {
    fn extract(&self, paragraph: &Paragraph) -> Result<Vec<AnswerSpan>> {
        Ok(self.predict(paragraph)?.spans)
    }
}

impl QuestionGenerator for QgModel {
    fn generate(&self, source: &QgSource, beam: usize, max_len: usize) -> Result<Generated> {
        self.net.generate_with(&self.store, source, beam, max_len)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct HarvestStats {
    pub paragraphs: usize,
    pub skipped_paragraphs: usize,
    pub spans_extracted: usize,
    pub spans_capped: usize,
    pub records: usize,
    pub unterminated: usize,
    pub question_marks_appended: usize,
}

/// Resolver used for both training-time and harvest-time source preparation.
pub fn default_resolver() -> HeuristicResolver<DistanceScorer> {
    HeuristicResolver::new(DistanceScorer)
}

fn record(p: &Paragraph, span: &AnswerSpan, g: Generated) -> HarvestRecord {
    let mut question = g.tokens.join(" ");
    let appended = !question.ends_with('?');
    if appended {
        if !question.is_empty() {
            question.push(' ');
        }
        question.push('?');
    }
    HarvestRecord {
        article_id: p.article_id.clone(),
        paragraph_index: p.paragraph_index,
        sentence_index: span.sentence_index,
        question,
        answer_text: p.slice(span.char_start, span.char_end),
        answer_char_start: span.char_start,
        answer_char_end: span.char_end,
        answer_token_start: span.token_start,
        answer_token_end: span.token_end,
        score: g.log_prob,
        unterminated: !g.terminated,
        question_mark_appended: appended,
    }
}

/// Run the pipeline over `articles`, handing records to `sink` in input order.
pub fn harvest<E, G, R, F>(
    articles: &[Article],
    extractor: &E,
    generator: &G,
    resolver: &R,
    config: &PipelineConfig,
    mut sink: F,
) -> Result<HarvestStats>
where
    E: SpanExtractor + ?Sized,
    G: QuestionGenerator + ?Sized,
    R: CorefResolver + ?Sized,
    F: FnMut(HarvestRecord) -> Result<()>,
{
    config.validate()?;
    let mut stats = HarvestStats::default();
    for article in articles {
        for p in article.paragraphs() {
            stats.paragraphs += 1;
            let mut spans = extractor.extract(&p)?;
            stats.spans_extracted += spans.len();
            if spans.is_empty() {
                stats.skipped_paragraphs += 1;
                continue;
            }
            if spans.len() > config.span_cap {
                stats.spans_capped += spans.len() - config.span_cap;
                spans.truncate(config.span_cap);
            }
            for span in &spans {
                let src = prepare_source(&p, span, resolver)?;
                let g = generator.generate(&src, config.beam_size, config.max_decode_len)?;
                let r = record(&p, span, g);
                stats.unterminated += r.unterminated as usize;
                stats.question_marks_appended += r.question_mark_appended as usize;
                stats.records += 1;
                sink(r)?;
            }
        }
    }
    log::info!(
        "harvest: {} paragraphs ({} skipped), {} spans ({} over cap), {} records, {} unterminated",
        stats.paragraphs,
        stats.skipped_paragraphs,
        stats.spans_extracted,
        stats.spans_capped,
        stats.records,
        stats.unterminated
    );
    Ok(stats)
}

/// Harvest straight into a JSONL writer.
pub fn harvest_jsonl<E, G, R, W>(
    articles: &[Article],
    extractor: &E,
    generator: &G,
    resolver: &R,
    config: &PipelineConfig,
    mut out: W,
) -> Result<HarvestStats>
where
    E: SpanExtractor + ?Sized,
    G: QuestionGenerator + ?Sized,
    R: CorefResolver + ?Sized,
    W: Write,
{
    let stats = harvest(articles, extractor, generator, resolver, config, |r| {
        serde_json::to_writer(&mut out, &r)?;
        out.write_all(b"\n")?;
        Ok(())
    })?;
    out.flush()?;
    Ok(stats)
}
