use std::collections::BTreeMap;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;

use crate::corpus::MergedRecord;
use crate::error::{Error, Result};

/// Unigram-to-a-power sampling distribution over observed skills.
#[derive(Debug, Clone)]
pub struct NoiseDistribution {
    skills: Vec<String>,
    weights: Vec<f64>,
    sampler: WeightedIndex<f64>,
}

impl NoiseDistribution {
    /// `weights[i]` is the sampling weight of `skills[i]`.
    pub fn from_weights(skills: Vec<String>, weights: Vec<f64>) -> Result<Self> {
        if skills.is_empty() {
            return Err(Error::Invalid("skill universe is empty".into()));
        }
        if skills.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: skills.len(),
                actual: weights.len(),
            });
        }
        if let Some(bad) = weights.iter().position(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::Invalid(format!(
                "noise weight for {:?} is {} (must be positive and finite)",
                skills[bad], weights[bad]
            )));
        }
        let sampler = WeightedIndex::new(&weights).map_err(|e| Error::Invalid(format!("noise weights: {e}")))?;
        Ok(NoiseDistribution {
            skills,
            weights,
            sampler,
        })
    }

    pub fn skills(&self) -> &[String] {
        &self.skills
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn probability(&self, skill: &str) -> Option<f64> {
        let total: f64 = self.weights.iter().sum();
        self.skills
            .iter()
            .position(|s| s == skill)
            .map(|i| self.weights[i] / total)
    }

    /// Draws a skill index.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.sampler.sample(rng)
    }
}

/// Total skill counts across `merged`, raised to `power`. Skills are
/// ordered by name.
pub fn build_noise_distribution(merged: &[MergedRecord], power: f64) -> Result<NoiseDistribution> {
    let mut totals: BTreeMap<&str, u64> = BTreeMap::new();
    for rec in merged {
        for (s, &c) in &rec.skill_counts {
            *totals.entry(s.as_str()).or_insert(0) += c as u64;
        }
    }
    let (skills, weights) = totals
        .into_iter()
        .map(|(s, c)| (s.to_string(), (c as f64).powf(power)))
        .unzip();
    NoiseDistribution::from_weights(skills, weights)
}
