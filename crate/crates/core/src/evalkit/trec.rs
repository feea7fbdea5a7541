use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::io::{open_lines, write_text};
use crate::ranking::RankedList;

/// Binary relevance judgments keyed by query then document.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Qrels {
    judgments: BTreeMap<String, BTreeMap<String, i32>>,
}

impl Qrels {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, query: &str, doc: &str, relevance: i32) -> Result<()> {
        let docs = self.judgments.entry(query.to_string()).or_default();
        if docs.insert(doc.to_string(), relevance).is_some() {
            return Err(Error::DuplicateId(format!("{query}/{doc}")));
        }
        Ok(())
    }

    pub fn queries(&self) -> impl Iterator<Item = &str> {
        self.judgments.keys().map(String::as_str)
    }

    pub fn judgment(&self, query: &str, doc: &str) -> Option<i32> {
        self.judgments.get(query)?.get(doc).copied()
    }

    /// Documents judged with relevance > 0.
    pub fn relevant(&self, query: &str) -> HashSet<&str> {
        self.judgments
            .get(query)
            .map(|docs| docs.iter().filter(|(_, &r)| r > 0).map(|(d, _)| d.as_str()).collect())
            .unwrap_or_default()
    }

    pub fn len(&self) -> usize {
        self.judgments.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.judgments.is_empty()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (q, docs) in &self.judgments {
            for (d, r) in docs {
                writeln!(s, "{q} 0 {d} {r}").unwrap();
            }
        }
        s
    }
}

pub fn read_qrels(path: &Path) -> Result<Qrels> {
    let mut qrels = Qrels::new();
    for (line_no, line) in open_lines(path)? {
        let line = line?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        let bad = |message: String| Error::parse(path, line_no, message);
        if fields.len() != 4 {
            return Err(bad(format!("expected 4 fields, found {}", fields.len())));
        }
        let rel: i32 = fields[3]
            .parse()
            .map_err(|_| bad(format!("relevance {:?} is not an integer", fields[3])))?;
        qrels
            .insert(fields[0], fields[2], rel)
            .map_err(|_| bad(format!("duplicate judgment for {} {}", fields[0], fields[2])))?;
    }
    Ok(qrels)
}

pub fn write_qrels(path: &Path, qrels: &Qrels) -> Result<()> {
    write_text(path, &qrels.to_text())
}

/// Ranked lists for a set of queries under one system tag.
#[derive(Debug, Clone, PartialEq)]
pub struct Run {
    pub tag: String,
    pub lists: Vec<RankedList>,
}

impl Run {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for list in &self.lists {
            for (rank, (doc, score)) in list.items.iter().enumerate() {
                writeln!(s, "{} Q0 {} {} {} {}", list.query_id, doc, rank + 1, score, self.tag).unwrap();
            }
        }
        s
    }
}

pub fn write_run(path: &Path, run: &Run) -> Result<()> {
    write_text(path, &run.to_text())
}

/// Reads a TREC run. Lines of one query keep file order; the tag is taken
/// from the first line.
pub fn read_run(path: &Path) -> Result<Run> {
    let mut tag = None;
    let mut lists: Vec<RankedList> = Vec::new();
    let mut position: BTreeMap<String, usize> = BTreeMap::new();
    for (line_no, line) in open_lines(path)? {
        let line = line?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        let bad = |message: String| Error::parse(path, line_no, message);
        if fields.len() != 6 {
            return Err(bad(format!("expected 6 fields, found {}", fields.len())));
        }
        fields[3]
            .parse::<u64>()
            .map_err(|_| bad(format!("rank {:?} is not an integer", fields[3])))?;
        let score: f64 = fields[4]
            .parse()
            .ok()
            .filter(|s: &f64| s.is_finite())
            .ok_or_else(|| bad(format!("score {:?} is not a finite number", fields[4])))?;
        tag.get_or_insert_with(|| fields[5].to_string());
        let i = *position.entry(fields[0].to_string()).or_insert_with(|| {
            lists.push(RankedList {
                query_id: fields[0].to_string(),
                items: Vec::new(),
            });
            lists.len() - 1
        });
        lists[i].items.push((fields[2].to_string(), score));
    }
    Ok(Run {
        tag: tag.unwrap_or_default(),
        lists,
    })
}
