//! Dense float64 tensors, reverse-mode gradients, LSTM cells and SGD.

pub mod gradcheck;
pub mod lstm;
pub mod optim;
pub mod params;
pub mod rng;
pub mod tape;
pub mod tensor;

pub use gradcheck::{grad_check, GradCheckReport};
pub use lstm::{lstm_step, LstmCell, LstmCellParams};
pub use optim::{dropout_mask, sgd_step, CLIP_HI, CLIP_LO};
pub use params::{
    checkpoint_meta, decode_checkpoint_into, encode_checkpoint, save_checkpoint, ParamId,
    ParamStore, Parameter,
};
pub use rng::RngState;
pub use tape::{CustomOp, Gradients, Tape, Var};
pub use tensor::{log_sum_exp, sigmoid, softmax, Tensor};
