use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{normalize_title, SkillExtractor};
use crate::error::{Error, Result};
use crate::io::open_lines;

/// Fraction of malformed posting lines above which ingestion aborts.
pub const MAX_MALFORMED_FRACTION: f64 = 0.10;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PostingRecord {
    pub id: String,
    pub title: String,
    pub description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lang: Option<String>,
}

/// One `(title, noisy skill set)` pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobSkillRecord {
    pub title_key: String,
    pub title: String,
    pub skills: BTreeSet<String>,
}

/// Skill multiset for one normalized title.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergedRecord {
    pub title_key: String,
    pub skill_counts: BTreeMap<String, u32>,
    pub support: u32,
}

#[derive(Debug, Default)]
pub struct PostingsFile {
    pub postings: Vec<PostingRecord>,
    pub malformed: usize,
    pub total_lines: usize,
}

/// Reads postings JSONL, skipping malformed lines (bad JSON, empty or
/// repeated ids). Aborts when more than 10% of lines are malformed.
pub fn read_postings(path: &Path) -> Result<PostingsFile> {
    let mut out = PostingsFile::default();
    let mut seen = HashSet::new();
    let mut first_bad = None;
    for (lineno, line) in open_lines(path)? {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.total_lines += 1;
        let rec = match serde_json::from_str::<PostingRecord>(&line) {
            Ok(r) if !r.id.trim().is_empty() && seen.insert(r.id.clone()) => r,
            Ok(r) if r.id.trim().is_empty() => {
                first_bad.get_or_insert((lineno, "empty id".to_string()));
                out.malformed += 1;
                continue;
            }
            Ok(r) => {
                first_bad.get_or_insert((lineno, format!("duplicate id {:?}", r.id)));
                out.malformed += 1;
                continue;
            }
            Err(e) => {
                first_bad.get_or_insert((lineno, e.to_string()));
                out.malformed += 1;
                continue;
            }
        };
        out.postings.push(rec);
    }
    if out.total_lines > 0 && out.malformed as f64 > MAX_MALFORMED_FRACTION * out.total_lines as f64 {
        let (line, msg) = first_bad.unwrap_or_default();
        return Err(Error::parse(
            path,
            line,
            format!(
                "{} of {} lines malformed (limit 10%); first: {msg}",
                out.malformed, out.total_lines
            ),
        ));
    }
    Ok(out)
}

#[derive(Debug, Default)]
pub struct RawDataset {
    pub records: Vec<JobSkillRecord>,
    /// Postings whose title normalizes to the empty string.
    pub dropped_empty_title: usize,
}

/// Turns postings into `(title, skill set)` records, one per posting.
///
/// Extraction runs on `workers` threads; output order always follows input
/// order.
pub fn build_raw_dataset(postings: &[PostingRecord], extractor: &SkillExtractor, workers: usize) -> Result<RawDataset> {
    let record = |p: &PostingRecord| {
        let title_key = normalize_title(&p.title);
        (!title_key.is_empty()).then(|| JobSkillRecord {
            title_key,
            title: p.title.clone(),
            skills: extractor.extract(&p.description),
        })
    };
    let results: Vec<Option<JobSkillRecord>> = if workers <= 1 {
        postings.iter().map(record).collect()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::Invalid(format!("thread pool: {e}")))?
            .install(|| postings.par_iter().map(record).collect())
    };
    let mut out = RawDataset::default();
    for r in results {
        match r {
            Some(rec) => out.records.push(rec),
            None => out.dropped_empty_title += 1,
        }
    }
    Ok(out)
}

/// Aggregates raw records by title key. Output is sorted by title key.
pub fn merge_by_title<'a, I>(raw: I) -> Vec<MergedRecord>
where
    I: IntoIterator<Item = &'a JobSkillRecord>,
{
    let mut groups: BTreeMap<&str, (BTreeMap<String, u32>, u32)> = BTreeMap::new();
    for rec in raw {
        let (counts, support) = groups.entry(rec.title_key.as_str()).or_default();
        *support += 1;
        for s in &rec.skills {
            *counts.entry(s.clone()).or_insert(0) += 1;
        }
    }
    groups
        .into_iter()
        .map(|(key, (skill_counts, support))| MergedRecord {
            title_key: key.to_string(),
            skill_counts,
            support,
        })
        .collect()
}
