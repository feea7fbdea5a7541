use std::collections::HashSet;
use std::path::Path;

use rayon::prelude::*;

use super::RankedList;
use crate::binio::{read_file, Reader, Writer};
use crate::encoder::EncoderModel;
use crate::error::{Error, Result};
use crate::linalg::{dot, norm, round_to_f32, Matrix};

pub(crate) const INDEX_MAGIC: &[u8; 4] = b"JSIX";

const UNIT_TOLERANCE: f64 = 1e-6;

/// Unit vectors keyed by document id, stored in ascending id order.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorIndex {
    ids: Vec<String>,
    vectors: Matrix,
}

impl VectorIndex {
    /// Values are rounded to `f32` precision so a saved index ranks
    /// identically after loading.
    pub fn new(dim: usize, mut entries: Vec<(String, Vec<f64>)>) -> Result<Self> {
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        let mut seen = HashSet::with_capacity(entries.len());
        let mut vectors = Matrix::zeros(entries.len(), dim);
        let mut ids = Vec::with_capacity(entries.len());
        for (i, (id, mut v)) in entries.into_iter().enumerate() {
            if !seen.insert(id.clone()) {
                return Err(Error::DuplicateId(id));
            }
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: v.len(),
                });
            }
            round_to_f32(&mut v);
            let n = norm(&v);
            if n.is_nan() || (n - 1.0).abs() > UNIT_TOLERANCE {
                return Err(Error::Invalid(format!("vector for {id:?} has norm {n}, expected 1")));
            }
            vectors.row_mut(i).copy_from_slice(&v);
            ids.push(id);
        }
        Ok(VectorIndex { ids, vectors })
    }

    pub fn dim(&self) -> usize {
        self.vectors.cols
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), self.vectors.row(i)))
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.ids
            .binary_search_by(|p| p.as_str().cmp(id))
            .ok()
            .map(|i| self.vectors.row(i))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new(INDEX_MAGIC);
        w.len_u32(self.dim());
        w.len_u32(self.len());
        for (id, v) in self.entries() {
            w.str(id);
            w.f32_row(v);
        }
        w.into_bytes()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&read_file(path)?)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::open(bytes, INDEX_MAGIC)?;
        let dim = r.len("dim")?;
        let n = r.len("entry count")?;
        let mut entries = Vec::with_capacity(n.min(1 << 20));
        for _ in 0..n {
            let id = r.str("doc id")?;
            entries.push((id, r.f32_row(dim, "vector")?));
        }
        r.finish()?;
        Self::new(dim, entries)
    }
}

/// Encodes every title; titles that normalize to nothing are skipped and
/// counted. `workers > 1` encodes in parallel; the result does not depend
/// on it.
pub fn build_index(corpus: &[(String, String)], model: &EncoderModel, workers: usize) -> Result<(VectorIndex, usize)> {
    let encode = |(id, title): &(String, String)| match model.encode(title) {
        Ok(v) => Ok(Some((id.clone(), v))),
        Err(Error::EmptyTitle) => Ok(None),
        Err(e) => Err(e),
    };
    let encoded: Vec<Option<(String, Vec<f64>)>> = if workers > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::Invalid(format!("thread pool: {e}")))?;
        pool.install(|| corpus.par_iter().map(encode).collect::<Result<_>>())?
    } else {
        corpus.iter().map(encode).collect::<Result<_>>()?
    };
    let total = encoded.len();
    let entries: Vec<_> = encoded.into_iter().flatten().collect();
    let skipped = total - entries.len();
    Ok((VectorIndex::new(model.dim(), entries)?, skipped))
}

/// Exact top-`k` by dot product (cosine similarity for unit vectors).
pub fn rank(index: &VectorIndex, query_id: &str, query: &[f64], k: Option<usize>) -> Result<RankedList> {
    if query.len() != index.dim() {
        return Err(Error::DimensionMismatch {
            expected: index.dim(),
            actual: query.len(),
        });
    }
    let scored = index.entries().map(|(id, v)| (id.to_string(), dot(query, v))).collect();
    Ok(RankedList::from_scores(query_id, scored, k))
}

/// Ranks many queries in parallel; output follows input order.
pub fn rank_many(index: &VectorIndex, queries: &[(String, Vec<f64>)], k: Option<usize>) -> Result<Vec<RankedList>> {
    queries.par_iter().map(|(qid, q)| rank(index, qid, q, k)).collect()
}
