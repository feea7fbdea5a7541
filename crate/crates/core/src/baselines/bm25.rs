use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use crate::binio::{read_file, Reader, Writer};
use crate::corpus::normalize_title;
use crate::error::{Error, Result};
use crate::ranking::RankedList;

pub(crate) const BM25_MAGIC: &[u8; 4] = b"JSBM";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 1.2, b: 0.75 }
    }
}

impl Bm25Params {
    pub fn validate(&self) -> Result<()> {
        if !(self.k1 >= 0.0 && self.k1.is_finite()) {
            return Err(Error::Config(format!("k1 must be >= 0, got {}", self.k1)));
        }
        if !(0.0..=1.0).contains(&self.b) {
            return Err(Error::Config(format!("b must be in [0, 1], got {}", self.b)));
        }
        Ok(())
    }
}

/// Contribution of one query term: `idf · tf·(k1+1) / (tf + k1·(1 − b + b·dl/avgdl))`.
pub fn bm25_term_score(idf: f64, tf: f64, dl: f64, avgdl: f64, params: Bm25Params) -> f64 {
    let Bm25Params { k1, b } = params;
    idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * dl / avgdl))
}

#[derive(Debug, Clone, PartialEq)]
struct Doc {
    id: String,
    /// `(term id, count)` sorted by term id.
    terms: Vec<(u32, u32)>,
    len: u32,
}

/// Okapi BM25 statistics over whitespace tokens of normalized titles.
#[derive(Debug, Clone, PartialEq)]
pub struct Bm25Index {
    params: Bm25Params,
    terms: Vec<String>,
    term_ids: HashMap<String, u32>,
    df: Vec<u32>,
    docs: Vec<Doc>,
    doc_ids: HashMap<String, usize>,
    avgdl: f64,
}

fn tokens(text: &str) -> Vec<String> {
    normalize_title(text)
        .split(' ')
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

impl Bm25Index {
    pub fn build(corpus: &[(String, String)], params: Bm25Params) -> Result<Self> {
        params.validate()?;
        if corpus.is_empty() {
            return Err(Error::Invalid("BM25 corpus is empty".into()));
        }
        let mut counts: Vec<(String, BTreeMap<String, u32>, u32)> = Vec::with_capacity(corpus.len());
        let mut seen = HashSet::new();
        for (id, title) in corpus {
            if !seen.insert(id.as_str()) {
                return Err(Error::DuplicateId(id.clone()));
            }
            let toks = tokens(title);
            let mut tf = BTreeMap::new();
            for t in &toks {
                *tf.entry(t.clone()).or_insert(0u32) += 1;
            }
            counts.push((id.clone(), tf, toks.len() as u32));
        }
        let vocab: std::collections::BTreeSet<&String> = counts.iter().flat_map(|(_, tf, _)| tf.keys()).collect();
        let terms: Vec<String> = vocab.into_iter().cloned().collect();
        let mut df = vec![0u32; terms.len()];
        let term_ids: HashMap<String, u32> = terms.iter().enumerate().map(|(i, t)| (t.clone(), i as u32)).collect();
        let docs: Vec<Doc> = counts
            .into_iter()
            .map(|(id, tf, len)| {
                let terms = tf
                    .into_iter()
                    .map(|(t, c)| {
                        let tid = term_ids[&t];
                        df[tid as usize] += 1;
                        (tid, c)
                    })
                    .collect();
                Doc { id, terms, len }
            })
            .collect();
        Self::assemble(params, terms, df, docs)
    }

    fn assemble(params: Bm25Params, terms: Vec<String>, df: Vec<u32>, docs: Vec<Doc>) -> Result<Self> {
        let total: u64 = docs.iter().map(|d| d.len as u64).sum();
        if total == 0 {
            return Err(Error::Invalid("BM25 corpus has no tokens".into()));
        }
        let avgdl = total as f64 / docs.len() as f64;
        let term_ids = terms.iter().enumerate().map(|(i, t)| (t.clone(), i as u32)).collect();
        let doc_ids = docs.iter().enumerate().map(|(i, d)| (d.id.clone(), i)).collect();
        Ok(Bm25Index {
            params,
            terms,
            term_ids,
            df,
            docs,
            doc_ids,
            avgdl,
        })
    }

    pub fn params(&self) -> Bm25Params {
        self.params
    }

    pub fn num_docs(&self) -> usize {
        self.docs.len()
    }

    pub fn avgdl(&self) -> f64 {
        self.avgdl
    }

    pub fn df(&self, term: &str) -> u32 {
        self.term_ids.get(term).map_or(0, |&t| self.df[t as usize])
    }

    /// `(length, term counts)` of a document.
    pub fn doc_stats(&self, doc_id: &str) -> Option<(u32, BTreeMap<&str, u32>)> {
        let d = &self.docs[*self.doc_ids.get(doc_id)?];
        let tf = d
            .terms
            .iter()
            .map(|&(t, c)| (self.terms[t as usize].as_str(), c))
            .collect();
        Some((d.len, tf))
    }

    pub fn idf(&self, term: &str) -> f64 {
        let n = self.docs.len() as f64;
        let df = self.df(term) as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    fn doc_score(&self, query: &[(u32, f64)], doc: &Doc) -> f64 {
        query
            .iter()
            .map(|&(t, idf)| match doc.terms.binary_search_by_key(&t, |&(id, _)| id) {
                Ok(i) => bm25_term_score(idf, doc.terms[i].1 as f64, doc.len as f64, self.avgdl, self.params),
                Err(_) => 0.0,
            })
            .sum()
    }

    /// Known query tokens with their idf, one entry per occurrence.
    fn query_terms(&self, query: &str) -> Vec<(u32, f64)> {
        tokens(query)
            .iter()
            .filter_map(|t| self.term_ids.get(t).map(|&id| (id, self.idf(t))))
            .collect()
    }

    pub fn score(&self, query: &str, doc_id: &str) -> Result<f64> {
        let &i = self
            .doc_ids
            .get(doc_id)
            .ok_or_else(|| Error::UnknownId(doc_id.to_string()))?;
        Ok(self.doc_score(&self.query_terms(query), &self.docs[i]))
    }

    pub fn rank(&self, query_id: &str, query: &str, k: Option<usize>) -> RankedList {
        let q = self.query_terms(query);
        let scored = self
            .docs
            .iter()
            .map(|d| (d.id.clone(), self.doc_score(&q, d)))
            .collect();
        RankedList::from_scores(query_id, scored, k)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new(BM25_MAGIC);
        w.f64(self.params.k1);
        w.f64(self.params.b);
        w.len_u32(self.terms.len());
        for (t, &df) in self.terms.iter().zip(&self.df) {
            w.str(t);
            w.u32(df);
        }
        w.len_u32(self.docs.len());
        for d in &self.docs {
            w.str(&d.id);
            w.u32(d.len);
            w.len_u32(d.terms.len());
            for &(t, c) in &d.terms {
                w.u32(t);
                w.u32(c);
            }
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
        let mut r = Reader::open(bytes, BM25_MAGIC)?;
        let params = Bm25Params {
            k1: r.f64("k1")?,
            b: r.f64("b")?,
        };
        params.validate()?;
        let n_terms = r.len("term count")?;
        let mut terms = Vec::with_capacity(n_terms.min(1 << 20));
        let mut df = Vec::with_capacity(n_terms.min(1 << 20));
        for _ in 0..n_terms {
            terms.push(r.str("term")?);
            df.push(r.u32("df")?);
        }
        let n_docs = r.len("doc count")?;
        let mut docs = Vec::with_capacity(n_docs.min(1 << 20));
        for _ in 0..n_docs {
            let id = r.str("doc id")?;
            let len = r.u32("doc length")?;
            let n = r.len("doc term count")?;
            let mut dterms = Vec::with_capacity(n.min(1 << 16));
            for _ in 0..n {
                let t = r.u32("term id")?;
                if t as usize >= n_terms {
                    return Err(Error::Format(format!("term id {t} out of range")));
                }
                dterms.push((t, r.u32("term count")?));
            }
            docs.push(Doc { id, terms: dterms, len });
        }
        r.finish()?;
        if docs.is_empty() || df.iter().any(|&d| d as usize > docs.len()) {
            return Err(Error::Format("inconsistent BM25 statistics".into()));
        }
        Self::assemble(params, terms, df, docs)
    }
}
