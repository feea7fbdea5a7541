//! Exact vector retrieval, job normalization and skill prediction.

mod index;

pub use index::{build_index, rank, rank_many, VectorIndex};

use std::cmp::Ordering;

use crate::auxembed::AuxModel;
use crate::encoder::EncoderModel;
use crate::error::{Error, Result};
use crate::linalg::{dot, norm};

/// Results for one query, best first.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedList {
    pub query_id: String,
    pub items: Vec<(String, f64)>,
}

impl RankedList {
    /// Sorts `items` by score descending, then doc id ascending, and keeps
    /// the first `k` (all when `None`).
    pub fn from_scores(query_id: impl Into<String>, mut items: Vec<(String, f64)>, k: Option<usize>) -> Self {
        items.sort_by(compare_items);
        if let Some(k) = k {
            items.truncate(k);
        }
        RankedList {
            query_id: query_id.into(),
            items,
        }
    }

    pub fn doc_ids(&self) -> impl Iterator<Item = &str> {
        self.items.iter().map(|(d, _)| d.as_str())
    }
}

/// The ranking order: higher score first, ties by ascending doc id.
pub fn compare_items(a: &(String, f64), b: &(String, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0))
}

/// Maps raw titles onto a fixed list of normalized titles.
pub struct Normalizer<'m> {
    model: &'m EncoderModel,
    index: VectorIndex,
}

impl<'m> Normalizer<'m> {
    pub fn new(model: &'m EncoderModel, normalized_titles: &[(String, String)]) -> Result<Self> {
        let (index, _) = build_index(normalized_titles, model, 1)?;
        Ok(Normalizer { model, index })
    }

    pub fn index(&self) -> &VectorIndex {
        &self.index
    }

    pub fn normalize(&self, raw_title: &str, k: Option<usize>) -> Result<RankedList> {
        let q = self.model.encode(raw_title)?;
        rank(&self.index, raw_title, &q, k)
    }
}

/// Ranks `normalized_titles` against `raw_title`; the first item is the
/// normalization.
pub fn normalize_job(
    model: &EncoderModel,
    normalized_titles: &[(String, String)],
    raw_title: &str,
    k: Option<usize>,
) -> Result<RankedList> {
    Normalizer::new(model, normalized_titles)?.normalize(raw_title, k)
}

/// Top `n` skills by cosine similarity between the encoded title and the
/// auxiliary model's skill output vectors. Zero skill vectors are skipped.
pub fn predict_skills(model: &EncoderModel, aux: &AuxModel, title: &str, n: usize) -> Result<Vec<(String, f64)>> {
    if model.dim() != aux.dim() {
        return Err(Error::DimensionMismatch {
            expected: aux.dim(),
            actual: model.dim(),
        });
    }
    let q = model.encode(title)?;
    let scored: Vec<(String, f64)> = aux
        .skill_vectors()
        .filter_map(|(s, v)| {
            let n = norm(v);
            (n > 0.0).then(|| (s.to_string(), dot(&q, v) / n))
        })
        .collect();
    if scored.is_empty() {
        return Err(Error::ZeroVector(" for every skill".into()));
    }
    Ok(RankedList::from_scores("", scored, Some(n)).items)
}
