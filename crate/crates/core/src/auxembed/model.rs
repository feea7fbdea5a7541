use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{build_noise_distribution, AuxConfig, NoiseDistribution};
use crate::binio::{read_file, Reader, Writer};
use crate::corpus::MergedRecord;
use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, log_sigmoid, normalized, round_to_f32, sigmoid, Matrix};

pub(crate) const AUX_MAGIC: &[u8; 4] = b"JSAX";
pub(crate) const DATASET_MAGIC: &[u8; 4] = b"JSDX";

/// Trained PV-DBOW model: one vector per title, one output vector per skill.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxModel {
    pub config: AuxConfig,
    titles: Vec<String>,
    title_index: HashMap<String, usize>,
    doc_vectors: Matrix,
    skills: Vec<String>,
    skill_index: HashMap<String, usize>,
    skill_out: Matrix,
    noise_weights: Vec<f64>,
}

/// Loss and gradients of `−ln σ(d·w⁺) − Σₙ ln σ(−d·wₙ)`.
#[derive(Debug, Clone)]
pub struct PvDbowGradient {
    pub loss: f64,
    pub doc: Vec<f64>,
    pub positive: Vec<f64>,
    pub negatives: Vec<Vec<f64>>,
}

pub fn pvdbow_gradient(doc: &[f64], positive: &[f64], negatives: &[&[f64]]) -> PvDbowGradient {
    let mut grad_doc = vec![0.0; doc.len()];

    let s = dot(doc, positive);
    let mut loss = -log_sigmoid(s);
    let g = sigmoid(s) - 1.0;
    axpy(g, positive, &mut grad_doc);
    let grad_pos = doc.iter().map(|d| g * d).collect();

    let grad_negs = negatives
        .iter()
        .map(|w| {
            let s = dot(doc, w);
            loss -= log_sigmoid(-s);
            let g = sigmoid(s);
            axpy(g, w, &mut grad_doc);
            doc.iter().map(|d| g * d).collect()
        })
        .collect();

    PvDbowGradient {
        loss,
        doc: grad_doc,
        positive: grad_pos,
        negatives: grad_negs,
    }
}

/// One negative-sampling update of `doc` against rows of `skill_out`.
/// Output rows are only touched when `update_out` is set. Returns the loss
/// before the update.
fn sgd_update(
    doc: &mut [f64],
    skill_out: &mut Matrix,
    positive: usize,
    negatives: &[usize],
    lr: f64,
    update_out: bool,
) -> Result<f64> {
    let neg_rows: Vec<&[f64]> = negatives.iter().map(|&n| skill_out.row(n)).collect();
    let grad = pvdbow_gradient(doc, skill_out.row(positive), &neg_rows);
    if !grad.loss.is_finite() || grad.doc.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite {
            what: "PV-DBOW loss",
            context: format!(
                "positive skill #{positive}, {} negatives, lr {lr}, |d| = {}",
                negatives.len(),
                dot(doc, doc).sqrt()
            ),
        });
    }
    if update_out {
        axpy(-lr, &grad.positive, skill_out.row_mut(positive));
        for (&n, g) in negatives.iter().zip(&grad.negatives) {
            axpy(-lr, g, skill_out.row_mut(n));
        }
    }
    axpy(-lr, &grad.doc, doc);
    Ok(grad.loss)
}

/// Per-epoch diagnostics from [`train_pvdbow_with`].
#[derive(Debug, Clone, Default)]
pub struct AuxTrainReport {
    pub epoch_losses: Vec<f64>,
    /// Merged titles without any skill; they get no vector.
    pub skipped_empty: usize,
}

fn init_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let half = 0.5 / dim as f64;
    (0..dim).map(|_| rng.gen_range(-half..half)).collect()
}

struct TitleTargets {
    skills: Vec<usize>,
    sampler: WeightedIndex<f64>,
}

impl TitleTargets {
    fn new(skills: Vec<usize>, weights: &[f64]) -> Result<Self> {
        let sampler = WeightedIndex::new(weights).map_err(|e| Error::Invalid(format!("target weights: {e}")))?;
        Ok(TitleTargets { skills, sampler })
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> usize {
        self.skills[self.sampler.sample(rng)]
    }
}

pub fn train_pvdbow(merged: &[MergedRecord], config: &AuxConfig) -> Result<AuxModel> {
    train_pvdbow_with(merged, config, |_, _| {}).map(|(m, _)| m)
}

/// Trains PV-DBOW vectors, calling `on_epoch(epoch, mean_loss)` after each
/// epoch. Single-threaded and bit-reproducible for a fixed seed.
pub fn train_pvdbow_with(
    merged: &[MergedRecord],
    config: &AuxConfig,
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<(AuxModel, AuxTrainReport)> {
    config.validate()?;
    if merged.is_empty() {
        return Err(Error::Invalid("merged dataset is empty".into()));
    }
    let mut report = AuxTrainReport::default();
    let usable: Vec<&MergedRecord> = merged
        .iter()
        .filter(|r| {
            let keep = !r.skill_counts.is_empty();
            if !keep {
                report.skipped_empty += 1;
            }
            keep
        })
        .collect();
    let usable_owned: Vec<MergedRecord> = usable.iter().map(|r| (*r).clone()).collect();
    let noise = build_noise_distribution(&usable_owned, config.noise_power)?;

    let skills = noise.skills().to_vec();
    let skill_index: HashMap<String, usize> = skills.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let dim = config.dim;
    let mut doc_vectors = Matrix::zeros(usable.len(), dim);
    for t in 0..usable.len() {
        doc_vectors.row_mut(t).copy_from_slice(&init_vector(&mut rng, dim));
    }
    let mut skill_out = Matrix::zeros(skills.len(), dim);

    let targets = usable
        .iter()
        .map(|r| {
            let (ids, weights): (Vec<usize>, Vec<f64>) = r
                .skill_counts
                .iter()
                .map(|(s, &c)| (skill_index[s], config.count_damping.apply(c)))
                .unzip();
            TitleTargets::new(ids, &weights)
        })
        .collect::<Result<Vec<_>>>()?;

    let per_epoch: usize = targets.iter().map(|t| t.skills.len()).sum();
    let total = per_epoch * config.epochs;
    let mut step = 0;
    let mut order: Vec<usize> = (0..usable.len()).collect();
    let mut negatives = vec![0; config.negatives_k];
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for &t in &order {
            for _ in 0..targets[t].skills.len() {
                let pos = targets[t].draw(&mut rng);
                for n in negatives.iter_mut() {
                    *n = noise.sample(&mut rng);
                }
                let lr = config.lr_at(step, total);
                loss_sum += sgd_update(doc_vectors.row_mut(t), &mut skill_out, pos, &negatives, lr, true).map_err(
                    |e| match e {
                        Error::NonFinite { what, context } => Error::NonFinite {
                            what,
                            context: format!("epoch {epoch}, title {:?}: {context}", usable[t].title_key),
                        },
                        other => other,
                    },
                )?;
                step += 1;
            }
        }
        let mean = loss_sum / per_epoch as f64;
        report.epoch_losses.push(mean);
        on_epoch(epoch, mean);
    }

    round_to_f32(&mut doc_vectors.data);
    round_to_f32(&mut skill_out.data);
    let titles: Vec<String> = usable.iter().map(|r| r.title_key.clone()).collect();
    let title_index = titles.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
    Ok((
        AuxModel {
            config: config.clone(),
            titles,
            title_index,
            doc_vectors,
            skills,
            skill_index,
            skill_out,
            noise_weights: noise.weights().to_vec(),
        },
        report,
    ))
}

impl AuxModel {
    pub fn dim(&self) -> usize {
        self.doc_vectors.cols
    }

    pub fn titles(&self) -> &[String] {
        &self.titles
    }

    pub fn skills(&self) -> &[String] {
        &self.skills
    }

    pub fn doc_vector(&self, title_key: &str) -> Option<&[f64]> {
        self.title_index.get(title_key).map(|&i| self.doc_vectors.row(i))
    }

    pub fn skill_vector(&self, skill: &str) -> Option<&[f64]> {
        self.skill_index.get(skill).map(|&i| self.skill_out.row(i))
    }

    pub fn skill_vectors(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.skills
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), self.skill_out.row(i)))
    }

    pub fn noise_weights(&self) -> &[f64] {
        &self.noise_weights
    }

    pub fn noise_distribution(&self) -> Result<NoiseDistribution> {
        NoiseDistribution::from_weights(self.skills.clone(), self.noise_weights.clone())
    }

    /// Single SGD step on `(title_key, positive)` against `negatives`.
    /// Returns the loss evaluated before the update.
    pub fn pvdbow_step(&mut self, title_key: &str, positive: &str, negatives: &[&str], lr: f64) -> Result<f64> {
        let t = *self
            .title_index
            .get(title_key)
            .ok_or_else(|| Error::UnknownId(title_key.to_string()))?;
        let skill = |s: &str| {
            self.skill_index
                .get(s)
                .copied()
                .ok_or_else(|| Error::UnknownId(s.to_string()))
        };
        let pos = skill(positive)?;
        let negs = negatives.iter().map(|s| skill(s)).collect::<Result<Vec<_>>>()?;
        let mut doc = self.doc_vectors.row(t).to_vec();
        let loss = sgd_update(&mut doc, &mut self.skill_out, pos, &negs, lr, true)?;
        self.doc_vectors.row_mut(t).copy_from_slice(&doc);
        Ok(loss)
    }

    /// Infers a vector for an unseen skill multiset with output vectors
    /// frozen. Unknown skills are dropped.
    pub fn infer_doc_vector(&self, skills: &BTreeMap<String, u32>, config: &AuxConfig) -> Result<Vec<f64>> {
        let (ids, weights): (Vec<usize>, Vec<f64>) = skills
            .iter()
            .filter(|(_, &c)| c > 0)
            .filter_map(|(s, &c)| self.skill_index.get(s).map(|&i| (i, config.count_damping.apply(c))))
            .unzip();
        if ids.is_empty() {
            return Err(Error::NoKnownSkills);
        }
        let targets = TitleTargets::new(ids, &weights)?;
        let noise = self.noise_distribution()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut doc = init_vector(&mut rng, self.dim());
        let mut frozen = self.skill_out.clone();
        let per_epoch = targets.skills.len();
        let total = per_epoch * config.epochs;
        let mut negatives = vec![0; config.negatives_k];
        for step in 0..total {
            let pos = targets.draw(&mut rng);
            for n in negatives.iter_mut() {
                *n = noise.sample(&mut rng);
            }
            sgd_update(&mut doc, &mut frozen, pos, &negatives, config.lr_at(step, total), false)?;
        }
        Ok(doc)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = Writer::new(AUX_MAGIC);
        w.len_u32(self.dim());
        w.len_u32(self.titles.len());
        w.len_u32(self.skills.len());
        for (i, t) in self.titles.iter().enumerate() {
            w.str(t);
            w.f32_row(self.doc_vectors.row(i));
        }
        for (i, s) in self.skills.iter().enumerate() {
            w.str(s);
            w.f32_row(self.skill_out.row(i));
        }
        for &nw in &self.noise_weights {
            w.f64(nw);
        }
        w.write_to(path)
    }

    /// Loads a model. The stored format carries no training config, so
    /// `config` is the default with the stored dimension.
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = read_file(path)?;
        Self::from_bytes(&bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::open(bytes, AUX_MAGIC)?;
        let dim = r.len("dim")?;
        let n_titles = r.len("title count")?;
        let n_skills = r.len("skill count")?;
        let (titles, doc_vectors) = read_rows(&mut r, n_titles, dim, "doc section")?;
        let (skills, skill_out) = read_rows(&mut r, n_skills, dim, "skill section")?;
        let noise_weights = (0..n_skills)
            .map(|_| r.f64("noise weights"))
            .collect::<Result<Vec<_>>>()?;
        r.finish()?;
        let title_index = index_of(&titles)?;
        let skill_index = index_of(&skills)?;
        NoiseDistribution::from_weights(skills.clone(), noise_weights.clone())?;
        Ok(AuxModel {
            config: AuxConfig {
                dim,
                ..AuxConfig::default()
            },
            titles,
            title_index,
            doc_vectors,
            skills,
            skill_index,
            skill_out,
            noise_weights,
        })
    }
}

fn read_rows(r: &mut Reader<'_>, n: usize, dim: usize, what: &str) -> Result<(Vec<String>, Matrix)> {
    let mut keys = Vec::with_capacity(n.min(1 << 20));
    let mut m = Matrix::zeros(0, dim);
    for _ in 0..n {
        keys.push(r.str(what)?);
        m.data.extend(r.f32_row(dim, what)?);
        m.rows += 1;
    }
    Ok((keys, m))
}

fn index_of(keys: &[String]) -> Result<HashMap<String, usize>> {
    let mut idx = HashMap::with_capacity(keys.len());
    for (i, k) in keys.iter().enumerate() {
        if idx.insert(k.clone(), i).is_some() {
            return Err(Error::DuplicateId(k.clone()));
        }
    }
    Ok(idx)
}

/// Unit-normalized `(title, vector)` training targets for the encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxDataset {
    dim: usize,
    pairs: Vec<(String, Vec<f64>)>,
}

impl AuxDataset {
    /// Builds a dataset, normalizing every vector.
    pub fn new(dim: usize, pairs: Vec<(String, Vec<f64>)>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        let mut out = Vec::with_capacity(pairs.len());
        for (k, v) in pairs {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: v.len(),
                });
            }
            if !seen.insert(k.clone()) {
                return Err(Error::DuplicateId(k));
            }
            let v = normalized(&v).map_err(|_| Error::ZeroVector(format!(" for title {k:?}")))?;
            out.push((k, v));
        }
        Ok(AuxDataset { dim, pairs: out })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn pairs(&self) -> &[(String, Vec<f64>)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Combines datasets (e.g. the same targets keyed by titles in several
    /// languages). A title present in more than one input gets the
    /// renormalized mean of its vectors.
    pub fn concat(datasets: &[AuxDataset]) -> Result<Self> {
        let dim = datasets
            .first()
            .map(|d| d.dim)
            .ok_or_else(|| Error::Invalid("no datasets to combine".into()))?;
        let mut order: Vec<String> = Vec::new();
        let mut sums: HashMap<String, Vec<f64>> = HashMap::new();
        for d in datasets {
            if d.dim != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: d.dim,
                });
            }
            for (k, v) in &d.pairs {
                match sums.get_mut(k) {
                    Some(acc) => axpy(1.0, v, acc),
                    None => {
                        order.push(k.clone());
                        sums.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        let pairs = order
            .into_iter()
            .map(|k| {
                let v = sums.remove(&k).expect("present");
                (k, v)
            })
            .collect();
        AuxDataset::new(dim, pairs)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = Writer::new(DATASET_MAGIC);
        w.len_u32(self.dim);
        w.len_u32(self.pairs.len());
        w.u32(0);
        for (k, v) in &self.pairs {
            w.str(k);
            w.f32_row(v);
        }
        w.write_to(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = read_file(path)?;
        let mut r = Reader::open(&bytes, DATASET_MAGIC)?;
        let dim = r.len("dim")?;
        let n = r.len("title count")?;
        let n_skills = r.len("skill count")?;
        if n_skills != 0 {
            return Err(Error::Format("dataset file must not carry a skill section".into()));
        }
        let (keys, m) = read_rows(&mut r, n, dim, "doc section")?;
        r.finish()?;
        let pairs = keys
            .into_iter()
            .enumerate()
            .map(|(i, k)| (k, m.row(i).to_vec()))
            .collect();
        AuxDataset::new(dim, pairs)
    }
}

/// L2-normalizes every document vector of `model`.
pub fn export_aux_dataset(model: &AuxModel) -> Result<AuxDataset> {
    let pairs = model
        .titles
        .iter()
        .enumerate()
        .map(|(i, t)| (t.clone(), model.doc_vectors.row(i).to_vec()))
        .collect();
    AuxDataset::new(model.dim(), pairs)
}

#[cfg(test)]
pub(crate) fn model_from_parts(titles: Vec<(&str, Vec<f64>)>, skills: Vec<(&str, Vec<f64>)>) -> AuxModel {
    let dim = titles[0].1.len();
    let mut doc_vectors = Matrix::zeros(0, dim);
    for (_, v) in &titles {
        doc_vectors.data.extend(v);
        doc_vectors.rows += 1;
    }
    let mut skill_out = Matrix::zeros(0, dim);
    for (_, v) in &skills {
        skill_out.data.extend(v);
        skill_out.rows += 1;
    }
    let titles: Vec<String> = titles.into_iter().map(|(t, _)| t.to_string()).collect();
    let skills: Vec<String> = skills.into_iter().map(|(s, _)| s.to_string()).collect();
    AuxModel {
        config: AuxConfig {
            dim,
            ..AuxConfig::default()
        },
        title_index: index_of(&titles).unwrap(),
        skill_index: index_of(&skills).unwrap(),
        noise_weights: vec![1.0; skills.len()],
        titles,
        doc_vectors,
        skills,
        skill_out,
    }
}
