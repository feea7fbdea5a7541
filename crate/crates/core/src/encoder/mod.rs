//! Stage 2: a subword title encoder trained to reproduce auxiliary vectors
//! under cosine distance.

mod config;
mod model;
pub mod network;
mod tokenizer;
mod train;

pub use config::{Architecture, EncoderConfig};
pub use model::{cosine_loss_and_grad, EncoderModel};
pub use network::Params;
pub use tokenizer::{train_tokenizer, Tokenizer, BYTE_UNITS};
pub use train::{
    init_encoder, train_encoder, train_encoder_from, train_encoder_with, NoObserver, TrainObserver, TrainReport,
};
pub(crate) use train::{run_training, Objective, Schedule};

pub use crate::linalg::cosine_distance;

#[cfg(test)]
mod tests;
