//! Gated-coreference question generator: encoder, attention/copy decoder, training and beam search.

pub mod beam;
pub mod config;
pub mod data;
pub mod dynvocab;
pub mod model;
pub mod ops;
pub mod train;

pub use beam::{beam_search, greedy, BeamResult, Generated, QgDecoder, StepModel};
pub use config::{GatingMode, QgConfig};
pub use data::{build_qg_vocab, instances_from_squad, prepare_instance, prepare_source, QgInstance};
pub use dynvocab::DynamicVocab;
pub use model::{
    DecoderState, EncoderOutput, NllOutput, QgModel, QgNet, QgParamIds, QgSource, StepOutput,
    PROB_FLOOR,
};
pub use ops::{
    attention, copy_distribution, gate_coref_features, gate_coref_features_with, gate_values,
    mix_distributions, GatingParams,
};
pub use train::{train_qg, train_qg_with, write_training_csv, EpochLog, QgTrainOutcome};
