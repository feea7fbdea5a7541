//! PV-DBOW paragraph vectors over per-title skill multisets.
//!
//! Each merged title is a "document" whose "words" are its skills. The
//! learned document vectors become the encoder's regression targets.

mod config;
mod model;
mod noise;

pub use config::{AuxConfig, CountDamping};
pub use model::{
    export_aux_dataset, pvdbow_gradient, train_pvdbow, train_pvdbow_with, AuxDataset, AuxModel, AuxTrainReport,
    PvDbowGradient,
};
pub use noise::{build_noise_distribution, NoiseDistribution};

#[cfg(test)]
pub(crate) use model::model_from_parts;
