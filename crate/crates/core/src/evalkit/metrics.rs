use std::collections::HashSet;

/// trec_eval average precision: relevant documents never retrieved count
/// as zero precision. Returns 0 for an empty relevant set.
pub fn average_precision(ranked: &[&str], relevant: &HashSet<&str>) -> f64 {
    if relevant.is_empty() {
        return 0.0;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, d) in ranked.iter().enumerate() {
        if relevant.contains(d) {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    sum / relevant.len() as f64
}

/// Relevant documents among the first `k`, divided by `k` even when fewer
/// than `k` were retrieved.
pub fn precision_at_k(ranked: &[&str], relevant: &HashSet<&str>, k: usize) -> f64 {
    assert!(k >= 1, "precision cutoff must be positive");
    let hits = ranked.iter().take(k).filter(|d| relevant.contains(*d)).count();
    hits as f64 / k as f64
}

pub fn reciprocal_rank(ranked: &[&str], relevant: &HashSet<&str>) -> f64 {
    ranked
        .iter()
        .position(|d| relevant.contains(d))
        .map_or(0.0, |i| 1.0 / (i + 1) as f64)
}
