use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::auxembed::{pvdbow_gradient, NoiseDistribution};
use crate::binio::{read_file, Reader, Writer};
use crate::corpus::JobSkillRecord;
use crate::encoder::network::{backward, forward, Params};
use crate::encoder::{
    run_training, train_tokenizer, EncoderConfig, EncoderModel, NoObserver, Objective, Schedule, TrainObserver,
    TrainReport,
};
use crate::error::{Error, Result};
use crate::linalg::{axpy, round_to_f32, sigmoid, Matrix};

pub(crate) const SKILL_VECTORS_MAGIC: &[u8; 4] = b"JSNS";

/// Rejection attempts per negative before giving up on it.
const MAX_REJECTIONS: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct NegSampConfig {
    pub encoder: EncoderConfig,
    pub negatives_k: usize,
    pub noise_power: f64,
    /// Optimizer steps per epoch; defaults to one pass over all positive
    /// pairs. Set it to the cosine trainer's value for equal budgets.
    pub steps_per_epoch: Option<usize>,
}

impl Default for NegSampConfig {
    fn default() -> Self {
        NegSampConfig {
            encoder: EncoderConfig::default(),
            negatives_k: 5,
            noise_power: 0.75,
            steps_per_epoch: None,
        }
    }
}

/// Encoder trained to predict skills, plus the skill output vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct NegSampModel {
    pub encoder: EncoderModel,
    skills: Vec<String>,
    skill_index: HashMap<String, usize>,
    skill_out: Matrix,
}

impl NegSampModel {
    fn new(encoder: EncoderModel, skills: Vec<String>, skill_out: Matrix) -> Self {
        let skill_index = skills.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        NegSampModel {
            encoder,
            skills,
            skill_index,
            skill_out,
        }
    }

    pub fn skills(&self) -> &[String] {
        &self.skills
    }

    pub fn skill_vector(&self, skill: &str) -> Option<&[f64]> {
        self.skill_index.get(skill).map(|&i| self.skill_out.row(i))
    }

    pub fn skill_vector_mut(&mut self, skill: &str) -> Option<&mut [f64]> {
        self.skill_index.get(skill).map(|&i| self.skill_out.row_mut(i))
    }

    fn lookup(&self, skill: &str) -> Result<usize> {
        self.skill_index
            .get(skill)
            .copied()
            .ok_or_else(|| Error::UnknownId(skill.to_string()))
    }

    /// σ(η(title)·w_skill) with the unnormalized encoder output.
    pub fn probability(&self, title: &str, skill: &str) -> Result<f64> {
        let ids = self.encoder.tokens(title)?;
        let y = self.encoder.forward_raw(&ids);
        Ok(sigmoid(crate::linalg::dot(&y, self.skill_out.row(self.lookup(skill)?))))
    }

    /// Binary cross-entropy of one positive and its negatives.
    pub fn bce_loss(&self, ids: &[u32], positive: &str, negatives: &[&str]) -> Result<f64> {
        let y = self.encoder.forward_raw(ids);
        let (pos, negs) = self.rows(positive, negatives)?;
        Ok(pvdbow_gradient(&y, pos, &negs).loss)
    }

    /// Loss, encoder parameter gradient, and gradients of the positive and
    /// negative skill vectors (in argument order).
    pub fn bce_loss_gradient(
        &self,
        ids: &[u32],
        positive: &str,
        negatives: &[&str],
    ) -> Result<(f64, Params, Vec<Vec<f64>>)> {
        let params = self.encoder.params();
        let config = self.encoder.config();
        let fwd = forward(params, config, ids, true);
        let (pos, negs) = self.rows(positive, negatives)?;
        let g = pvdbow_gradient(&fwd.output, pos, &negs);
        let mut grad = params.zeros_like();
        backward(params, config, ids, &fwd, &g.doc, &mut grad);
        let mut skill_grads = vec![g.positive];
        skill_grads.extend(g.negatives);
        Ok((g.loss, grad, skill_grads))
    }

    fn rows<'a>(&'a self, positive: &str, negatives: &[&str]) -> Result<(&'a [f64], Vec<&'a [f64]>)> {
        let pos = self.skill_out.row(self.lookup(positive)?);
        let negs = negatives
            .iter()
            .map(|s| self.lookup(s).map(|i| self.skill_out.row(i)))
            .collect::<Result<_>>()?;
        Ok((pos, negs))
    }

    /// Saves the skill output vectors; the encoder is saved separately.
    pub fn save_skill_vectors(&self, path: &Path) -> Result<()> {
        let mut w = Writer::new(SKILL_VECTORS_MAGIC);
        w.len_u32(self.skill_out.cols);
        w.len_u32(self.skills.len());
        for (i, s) in self.skills.iter().enumerate() {
            w.str(s);
            w.f32_row(self.skill_out.row(i));
        }
        w.write_to(path)
    }

    pub fn load(encoder_path: &Path, skill_vectors_path: &Path) -> Result<Self> {
        let encoder = EncoderModel::load(encoder_path)?;
        let bytes = read_file(skill_vectors_path)?;
        let mut r = Reader::open(&bytes, SKILL_VECTORS_MAGIC)?;
        let dim = r.len("dim")?;
        if dim != encoder.dim() {
            return Err(Error::DimensionMismatch {
                expected: encoder.dim(),
                actual: dim,
            });
        }
        let n = r.len("skill count")?;
        let mut skills = Vec::with_capacity(n.min(1 << 20));
        let mut out = Matrix::zeros(0, dim);
        for _ in 0..n {
            skills.push(r.str("skill")?);
            out.data.extend(r.f32_row(dim, "skill vector")?);
            out.rows += 1;
        }
        r.finish()?;
        Ok(Self::new(encoder, skills, out))
    }
}

struct Pair {
    title: usize,
    skill: usize,
}

struct NsObjective<'a> {
    titles: Vec<Vec<u32>>,
    positives: Vec<BTreeSet<usize>>,
    pairs: Vec<Pair>,
    noise: &'a NoiseDistribution,
    k: usize,
    skill_out: Matrix,
    grad: Matrix,
    touched: Vec<usize>,
}

impl NsObjective<'_> {
    fn draw_negatives(&self, title: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
        let positives = &self.positives[title];
        if positives.len() >= self.skill_out.rows {
            return Vec::new();
        }
        (0..self.k)
            .filter_map(|_| {
                (0..MAX_REJECTIONS)
                    .map(|_| self.noise.sample(rng))
                    .find(|s| !positives.contains(s))
            })
            .collect()
    }
}

impl Objective for NsObjective<'_> {
    fn tokens(&self, sample: usize) -> &[u32] {
        &self.titles[self.pairs[sample].title]
    }

    fn loss_and_grad(
        &mut self,
        sample: usize,
        output: &[f64],
        scale: f64,
        rng: &mut ChaCha8Rng,
        d_output: &mut [f64],
    ) -> f64 {
        let Pair { title, skill } = self.pairs[sample];
        let negs = self.draw_negatives(title, rng);
        let neg_rows: Vec<&[f64]> = negs.iter().map(|&n| self.skill_out.row(n)).collect();
        let g = pvdbow_gradient(output, self.skill_out.row(skill), &neg_rows);
        axpy(scale, &g.doc, d_output);
        axpy(scale, &g.positive, self.grad.row_mut(skill));
        self.touched.push(skill);
        for (&n, gn) in negs.iter().zip(&g.negatives) {
            axpy(scale, gn, self.grad.row_mut(n));
            self.touched.push(n);
        }
        g.loss
    }

    fn apply(&mut self, lr: f64) {
        self.touched.sort_unstable();
        self.touched.dedup();
        for &s in &self.touched {
            let (out, grad) = (&mut self.skill_out, &mut self.grad);
            axpy(-lr, grad.row(s), out.row_mut(s));
            grad.row_mut(s).fill(0.0);
        }
        self.touched.clear();
    }

    fn finish(&mut self) {
        round_to_f32(&mut self.skill_out.data);
    }
}

pub fn train_negative_sampling(raw: &[JobSkillRecord], config: &NegSampConfig) -> Result<NegSampModel> {
    train_negative_sampling_with(raw, config, &mut NoObserver).map(|(m, _)| m)
}

/// Trains the encoder architecture of `config.encoder` to tell each
/// record's skills from `k` noise skills drawn from the unigram^power
/// distribution over record-level skill counts.
pub fn train_negative_sampling_with(
    raw: &[JobSkillRecord],
    config: &NegSampConfig,
    observer: &mut dyn TrainObserver,
) -> Result<(NegSampModel, TrainReport)> {
    config.encoder.validate()?;
    if !(config.noise_power.is_finite() && config.noise_power >= 0.0) {
        return Err(Error::Config("noise_power must be >= 0".into()));
    }
    let labelled: Vec<&JobSkillRecord> = raw.iter().filter(|r| !r.skills.is_empty()).collect();
    if labelled.is_empty() {
        return Err(Error::Invalid("no record has any skill".into()));
    }

    // Same tokenizer input as the cosine trainer: distinct title keys, sorted.
    let keys: BTreeSet<&str> = labelled.iter().map(|r| r.title_key.as_str()).collect();
    let tokenizer = train_tokenizer(keys.iter().copied(), config.encoder.vocab_size)?;
    let mut encoder = EncoderModel::init(tokenizer, config.encoder.clone())?;

    let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
    for r in &labelled {
        for s in &r.skills {
            *counts.entry(s).or_insert(0) += 1;
        }
    }
    let skills: Vec<String> = counts.keys().map(|s| s.to_string()).collect();
    let skill_id: HashMap<&str, usize> = counts.keys().enumerate().map(|(i, &s)| (s, i)).collect();
    let noise = NoiseDistribution::from_weights(
        skills.clone(),
        counts.values().map(|&c| (c as f64).powf(config.noise_power)).collect(),
    )?;

    let dim = config.encoder.output_dim;
    let mut init_rng = ChaCha8Rng::seed_from_u64(config.encoder.seed);
    init_rng.set_stream(2);
    let half = 0.5 / dim as f64;
    let mut skill_out = Matrix::zeros(skills.len(), dim);
    skill_out
        .data
        .iter_mut()
        .for_each(|v| *v = init_rng.gen_range(-half..half));

    let mut objective = NsObjective {
        titles: Vec::new(),
        positives: Vec::new(),
        pairs: Vec::new(),
        noise: &noise,
        k: config.negatives_k,
        grad: Matrix::zeros(skills.len(), dim),
        skill_out,
        touched: Vec::new(),
    };
    let mut skipped = 0;
    for r in &labelled {
        let ids = encoder.tokenizer().tokenize(&r.title);
        if ids.is_empty() {
            skipped += 1;
            continue;
        }
        let t = objective.titles.len();
        objective.titles.push(ids);
        let pos: BTreeSet<usize> = r.skills.iter().map(|s| skill_id[s.as_str()]).collect();
        for &skill in &pos {
            objective.pairs.push(Pair { title: t, skill });
        }
        objective.positives.push(pos);
    }
    if objective.pairs.is_empty() {
        return Err(Error::Invalid("no encodable titles with skills".into()));
    }
    let schedule = Schedule {
        samples: objective.pairs.len(),
        steps_per_epoch: config.steps_per_epoch,
    };
    let mut report = run_training(&mut encoder, &mut objective, schedule, observer)?;
    report.skipped_empty = skipped;
    let skill_out = objective.skill_out;
    Ok((NegSampModel::new(encoder, skills, skill_out), report))
}
