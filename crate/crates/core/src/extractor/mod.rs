//! BiLSTM-CRF answer-span extractor.

pub mod crf;
pub mod model;
pub mod ner;
pub mod spans;
pub mod train;

pub use crf::{crf_nll, crf_nll_var, log_partition, path_score, viterbi};
pub use model::{
    build_extractor_vocabs, examples_from_squad, ExtractorConfig, ExtractorExample, ExtractorModel, ExtractorNet,
    ExtractorParamIds, Prediction, NUM_TAGS,
};
pub use ner::{NerTag, NerTagger, RuleNerTagger};
pub use spans::{decode_spans, paragraph_tags, sentence_offsets, spans_in_sentences, DecodedSpans, PredictedSpanRecord};
pub use train::{exact_f1, train_extractor, train_extractor_with, ExtractorEpochLog, ExtractorTrainOutcome};
