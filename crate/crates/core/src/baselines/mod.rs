//! Comparison systems: Okapi BM25 over title text, TF-IDF skill vectors,
//! and an encoder trained by skill negative sampling.

mod bm25;
mod negsamp;
mod tfidf;

pub use bm25::{bm25_term_score, Bm25Index, Bm25Params};
pub use negsamp::{train_negative_sampling, train_negative_sampling_with, NegSampConfig, NegSampModel};
pub use tfidf::{SkillStats, TfidfVector};

#[cfg(test)]
mod tests;
