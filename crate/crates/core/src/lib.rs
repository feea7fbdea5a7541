//! Job title similarity learned from noisy skill labels.
//!
//! The pipeline extracts skills from posting text by dictionary matching,
//! merges them into per-title multisets, learns PV-DBOW vectors for those
//! multisets, and trains a title encoder to reproduce the vectors under
//! cosine distance. Baselines (BM25, TF-IDF, negative sampling) and a
//! trec_eval-compatible evaluation kit sit alongside.

pub mod auxembed;
pub mod baselines;
pub mod binio;
pub mod cli;
pub mod corpus;
pub mod encoder;
pub mod error;
pub mod evalkit;
pub mod io;
pub mod linalg;
pub mod ranking;

pub use error::{Error, Result};
