use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::metrics::{average_precision, precision_at_k, reciprocal_rank};
use super::{Qrels, Run};
use crate::error::{Error, Result};
use crate::ranking::{compare_items, RankedList};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryMetrics {
    pub query_id: String,
    pub num_relevant: usize,
    pub num_retrieved: usize,
    pub ap: f64,
    pub p5: f64,
    pub p10: f64,
    pub p20: f64,
    pub rr: f64,
}

/// Per-query metrics and their means over queries with a relevant document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub num_queries: usize,
    pub map: f64,
    pub p5: f64,
    pub p10: f64,
    pub p20: f64,
    pub mrr: f64,
    pub per_query: Vec<QueryMetrics>,
    /// Queries left out of the means: no relevant judgment.
    pub excluded: Vec<String>,
}

impl MetricsReport {
    /// trec_eval-style summary lines.
    pub fn to_text(&self) -> String {
        let mut s = format!("{:<16}all\t{}\n", "num_q", self.num_queries);
        for (name, v) in [
            ("map", self.map),
            ("P_5", self.p5),
            ("P_10", self.p10),
            ("P_20", self.p20),
            ("recip_rank", self.mrr),
        ] {
            writeln!(s, "{name:<16}all\t{v:.4}").unwrap();
        }
        s
    }
}

fn query_metrics(query_id: &str, ranked: &[&str], relevant: &HashSet<&str>) -> QueryMetrics {
    QueryMetrics {
        query_id: query_id.to_string(),
        num_relevant: relevant.len(),
        num_retrieved: ranked.len(),
        ap: average_precision(ranked, relevant),
        p5: precision_at_k(ranked, relevant, 5),
        p10: precision_at_k(ranked, relevant, 10),
        p20: precision_at_k(ranked, relevant, 20),
        rr: reciprocal_rank(ranked, relevant),
    }
}

/// Scores a run against judgments. Each query's documents are re-sorted by
/// score (ties by doc id), so line order in a run file does not matter.
/// Judged queries missing from the run score zero.
pub fn evaluate_run(run: &Run, qrels: &Qrels) -> Result<MetricsReport> {
    let mut by_query: BTreeMap<&str, &RankedList> = BTreeMap::new();
    for list in &run.lists {
        if by_query.insert(&list.query_id, list).is_some() {
            return Err(Error::DuplicateId(format!("query {} listed twice", list.query_id)));
        }
        let mut seen = HashSet::new();
        for (d, _) in &list.items {
            if !seen.insert(d.as_str()) {
                return Err(Error::DuplicateId(format!(
                    "document {d} ranked twice for query {}",
                    list.query_id
                )));
            }
        }
    }

    let mut queries: Vec<&str> = qrels.queries().collect();
    queries.extend(by_query.keys());
    queries.sort_unstable();
    queries.dedup();

    let mut per_query = Vec::new();
    let mut excluded = Vec::new();
    for q in queries {
        let relevant = qrels.relevant(q);
        if relevant.is_empty() {
            excluded.push(q.to_string());
            continue;
        }
        let mut items: Vec<(String, f64)> = by_query.get(q).map(|l| l.items.clone()).unwrap_or_default();
        items.sort_by(compare_items);
        let ranked: Vec<&str> = items.iter().map(|(d, _)| d.as_str()).collect();
        per_query.push(query_metrics(q, &ranked, &relevant));
    }

    let n = per_query.len();
    let mean = |f: fn(&QueryMetrics) -> f64| {
        if n == 0 {
            0.0
        } else {
            per_query.iter().map(f).sum::<f64>() / n as f64
        }
    };
    Ok(MetricsReport {
        num_queries: n,
        map: mean(|m| m.ap),
        p5: mean(|m| m.p5),
        p10: mean(|m| m.p10),
        p20: mean(|m| m.p20),
        mrr: mean(|m| m.rr),
        per_query,
        excluded,
    })
}
