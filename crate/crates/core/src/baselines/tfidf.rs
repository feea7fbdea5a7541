use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use crate::binio::{read_file, Reader, Writer};
use crate::corpus::MergedRecord;
use crate::error::{Error, Result};
use crate::ranking::RankedList;

pub(crate) const SKILL_STATS_MAGIC: &[u8; 4] = b"JSTF";

/// Skill document frequencies over a merged dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SkillStats {
    n: u32,
    skills: Vec<String>,
    df: Vec<u32>,
    index: HashMap<String, u32>,
}

/// Sparse TF-IDF vector: `(skill id, weight)` sorted by id, zero weights
/// dropped.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TfidfVector {
    pub entries: Vec<(u32, f64)>,
}

impl TfidfVector {
    /// A vector with no nonzero component cannot be ranked by cosine.
    pub fn is_rankable(&self) -> bool {
        !self.entries.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|(_, w)| w * w).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &TfidfVector) -> f64 {
        let (mut i, mut j, mut s) = (0, 0, 0.0);
        while i < self.entries.len() && j < other.entries.len() {
            let (a, wa) = self.entries[i];
            let (b, wb) = other.entries[j];
            match a.cmp(&b) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    s += wa * wb;
                    i += 1;
                    j += 1;
                }
            }
        }
        s
    }

    /// `None` when either vector is unrankable.
    pub fn cosine(&self, other: &TfidfVector) -> Option<f64> {
        let d = self.norm() * other.norm();
        (d > 0.0).then(|| self.dot(other) / d)
    }
}

impl SkillStats {
    pub fn build(merged: &[MergedRecord]) -> Result<Self> {
        if merged.is_empty() {
            return Err(Error::Invalid("merged dataset is empty".into()));
        }
        let mut df: BTreeMap<&str, u32> = BTreeMap::new();
        for rec in merged {
            for s in rec.skill_counts.keys() {
                *df.entry(s).or_insert(0) += 1;
            }
        }
        let (skills, df): (Vec<String>, Vec<u32>) = df.into_iter().map(|(s, d)| (s.to_string(), d)).unzip();
        Self::assemble(merged.len() as u32, skills, df)
    }

    fn assemble(n: u32, skills: Vec<String>, df: Vec<u32>) -> Result<Self> {
        if df.iter().any(|&d| d == 0 || d > n) {
            return Err(Error::Format("document frequency out of range".into()));
        }
        let index = skills.iter().enumerate().map(|(i, s)| (s.clone(), i as u32)).collect();
        Ok(SkillStats { n, skills, df, index })
    }

    pub fn num_titles(&self) -> u32 {
        self.n
    }

    pub fn df(&self, skill: &str) -> Option<u32> {
        self.index.get(skill).map(|&i| self.df[i as usize])
    }

    pub fn skills(&self) -> &[String] {
        &self.skills
    }

    /// `count · ln(N / df)` per known skill; unknown skills are dropped.
    pub fn vector(&self, counts: &BTreeMap<String, u32>) -> TfidfVector {
        let mut entries: Vec<(u32, f64)> = counts
            .iter()
            .filter_map(|(s, &c)| {
                let &i = self.index.get(s)?;
                let w = c as f64 * (self.n as f64 / self.df[i as usize] as f64).ln();
                (w != 0.0).then_some((i, w))
            })
            .collect();
        entries.sort_by_key(|&(i, _)| i);
        TfidfVector { entries }
    }

    /// Ranks `corpus` by TF-IDF cosine to `query`. Unrankable documents are
    /// left out; an unrankable query yields an empty list.
    pub fn rank(
        &self,
        query_id: &str,
        query: &BTreeMap<String, u32>,
        corpus: &[(String, TfidfVector)],
        k: Option<usize>,
    ) -> RankedList {
        let q = self.vector(query);
        let scored = corpus
            .iter()
            .filter_map(|(id, v)| q.cosine(v).map(|s| (id.clone(), s)))
            .collect();
        RankedList::from_scores(query_id, scored, k)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new(SKILL_STATS_MAGIC);
        w.u32(self.n);
        w.len_u32(self.skills.len());
        for (s, &d) in self.skills.iter().zip(&self.df) {
            w.str(s);
            w.u32(d);
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
        let mut r = Reader::open(bytes, SKILL_STATS_MAGIC)?;
        let n = r.u32("title count")?;
        let k = r.len("skill count")?;
        let mut skills = Vec::with_capacity(k.min(1 << 20));
        let mut df = Vec::with_capacity(k.min(1 << 20));
        for _ in 0..k {
            skills.push(r.str("skill")?);
            df.push(r.u32("df")?);
        }
        r.finish()?;
        Self::assemble(n, skills, df)
    }
}
