use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::model::cosine_loss_and_grad;
use super::network::{backward, forward, Params};
use super::{train_tokenizer, EncoderConfig, EncoderModel};
use crate::auxembed::AuxDataset;
use crate::error::{Error, Result};
use crate::linalg::axpy;

/// Hooks into a training run. All methods default to doing nothing.
pub trait TrainObserver {
    fn on_epoch(&mut self, _epoch: usize, _mean_loss: f64) {}

    /// Optimizer steps between snapshots; `None` disables snapshots.
    fn snapshot_interval(&self) -> Option<usize> {
        None
    }

    /// Called before the first step (step 0), after every
    /// `snapshot_interval` steps, and after the last step.
    fn on_snapshot(&mut self, _step: usize, _model: &EncoderModel) -> Result<()> {
        Ok(())
    }
}

pub struct NoObserver;

impl TrainObserver for NoObserver {}

#[derive(Debug, Clone, Default)]
pub struct TrainReport {
    pub epoch_losses: Vec<f64>,
    pub steps: usize,
    /// Training titles that normalize to nothing and were left out.
    pub skipped_empty: usize,
}

/// A per-sample loss over the encoder output. Implemented by the cosine
/// objective and by negative sampling, which share the loop in
/// [`run_training`].
pub(crate) trait Objective {
    fn tokens(&self, sample: usize) -> &[u32];

    /// Returns the sample loss and writes `scale · ∂loss/∂output` into
    /// `d_output`. Gradients of objective-owned parameters are accumulated
    /// internally with the same scale.
    fn loss_and_grad(
        &mut self,
        sample: usize,
        output: &[f64],
        scale: f64,
        rng: &mut ChaCha8Rng,
        d_output: &mut [f64],
    ) -> f64;

    /// Applies and clears accumulated objective-owned gradients.
    fn apply(&mut self, _lr: f64) {}

    /// Rounds objective-owned parameters to `f32` precision.
    fn finish(&mut self) {}
}

/// Step schedule shared by both trainers so their budgets line up.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Schedule {
    pub samples: usize,
    /// Overrides the default of one pass over the samples per epoch;
    /// batches are then drawn from a continuous stream of shuffles.
    pub steps_per_epoch: Option<usize>,
}

impl Schedule {
    pub fn steps_per_epoch(&self, batch_size: usize) -> usize {
        self.steps_per_epoch
            .unwrap_or_else(|| self.samples.div_ceil(batch_size))
    }
}

struct BatchStream {
    order: Vec<usize>,
    pos: usize,
}

impl BatchStream {
    fn reshuffle(&mut self, rng: &mut ChaCha8Rng) {
        self.order.shuffle(rng);
        self.pos = 0;
    }

    fn next_fixed(&mut self, size: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
        let mut batch = Vec::with_capacity(size);
        while batch.len() < size {
            if self.pos == self.order.len() {
                self.reshuffle(rng);
            }
            batch.push(self.order[self.pos]);
            self.pos += 1;
        }
        batch
    }
}

pub(crate) fn run_training(
    model: &mut EncoderModel,
    objective: &mut dyn Objective,
    schedule: Schedule,
    observer: &mut dyn TrainObserver,
) -> Result<TrainReport> {
    let config = model.config().clone();
    let batch_size = config.batch_size;
    let per_epoch = schedule.steps_per_epoch(batch_size);
    let total = per_epoch * config.epochs;
    let interval = observer.snapshot_interval().filter(|&n| n > 0);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    let mut stream = BatchStream {
        order: (0..schedule.samples).collect(),
        pos: 0,
    };
    stream.reshuffle(&mut rng);

    let mut grad = model.params().zeros_like();
    let mut d_out = vec![0.0; config.output_dim];
    let mut report = TrainReport::default();
    let mut step = 0;
    if interval.is_some() {
        observer.on_snapshot(0, model)?;
    }

    for epoch in 0..config.epochs {
        let batches: Vec<Vec<usize>> = match schedule.steps_per_epoch {
            None => {
                if epoch > 0 {
                    stream.reshuffle(&mut rng);
                }
                stream.order.chunks(batch_size).map(<[usize]>::to_vec).collect()
            }
            Some(n) => (0..n).map(|_| stream.next_fixed(batch_size, &mut rng)).collect(),
        };
        let mut loss_sum = 0.0;
        let mut count = 0usize;
        for (b, batch) in batches.iter().enumerate() {
            let scale = 1.0 / batch.len() as f64;
            zero(&mut grad);
            for &sample in batch {
                let ids = objective.tokens(sample).to_vec();
                let fwd = forward(model.params(), &config, &ids, true);
                d_out.fill(0.0);
                let loss = objective.loss_and_grad(sample, &fwd.output, scale, &mut rng, &mut d_out);
                if !loss.is_finite() {
                    return Err(Error::NonFinite {
                        what: "training loss",
                        context: format!("epoch {}, batch {}, sample {sample}", epoch + 1, b + 1),
                    });
                }
                loss_sum += loss;
                count += 1;
                backward(model.params(), &config, &ids, &fwd, &d_out, &mut grad);
            }
            let lr = config.lr_at(step, total);
            for ((_, p), (_, g)) in model.params_mut().blocks_mut().into_iter().zip(grad.blocks()) {
                axpy(-lr, &g.data, &mut p.data);
            }
            objective.apply(lr);
            if !model.params().is_finite() {
                return Err(Error::NonFinite {
                    what: "encoder parameters",
                    context: format!("epoch {}, batch {}, lr {lr}", epoch + 1, b + 1),
                });
            }
            step += 1;
            if let Some(n) = interval {
                if step % n == 0 && step < total {
                    observer.on_snapshot(step, model)?;
                }
            }
        }
        let mean = if count > 0 { loss_sum / count as f64 } else { 0.0 };
        report.epoch_losses.push(mean);
        observer.on_epoch(epoch + 1, mean);
    }

    model.round_params();
    objective.finish();
    report.steps = step;
    if interval.is_some() && step > 0 {
        observer.on_snapshot(step, model)?;
    }
    Ok(report)
}

fn zero(p: &mut Params) {
    for (_, m) in p.blocks_mut() {
        m.fill(0.0);
    }
}

struct CosineObjective {
    tokens: Vec<Vec<u32>>,
    targets: Vec<Vec<f64>>,
}

impl Objective for CosineObjective {
    fn tokens(&self, sample: usize) -> &[u32] {
        &self.tokens[sample]
    }

    fn loss_and_grad(
        &mut self,
        sample: usize,
        output: &[f64],
        scale: f64,
        _rng: &mut ChaCha8Rng,
        d_output: &mut [f64],
    ) -> f64 {
        let (loss, g) = cosine_loss_and_grad(output, &self.targets[sample]);
        axpy(scale, &g, d_output);
        loss
    }
}

/// Trains a tokenizer on the dataset titles, then the encoder to minimize
/// the cosine distance to each title's target vector.
pub fn train_encoder(aux: &AuxDataset, config: &EncoderConfig) -> Result<EncoderModel> {
    train_encoder_with(aux, config, &mut NoObserver).map(|(m, _)| m)
}

pub fn train_encoder_with(
    aux: &AuxDataset,
    config: &EncoderConfig,
    observer: &mut dyn TrainObserver,
) -> Result<(EncoderModel, TrainReport)> {
    let mut model = init_encoder(aux, config)?;
    train_encoder_from(&mut model, aux, None, observer).map(|report| (model, report))
}

/// Fits the tokenizer on the titles of `aux` and initializes parameters
/// from `config.seed`.
pub fn init_encoder(aux: &AuxDataset, config: &EncoderConfig) -> Result<EncoderModel> {
    config.validate()?;
    if aux.is_empty() {
        return Err(Error::Invalid("auxiliary dataset is empty".into()));
    }
    if config.output_dim != aux.dim() {
        return Err(Error::DimensionMismatch {
            expected: aux.dim(),
            actual: config.output_dim,
        });
    }
    let tokenizer = train_tokenizer(aux.pairs().iter().map(|(t, _)| t.as_str()), config.vocab_size)?;
    EncoderModel::init(tokenizer, config.clone())
}

/// Continues training an existing model. `steps_per_epoch` overrides the
/// default of one pass over `aux` per epoch.
pub fn train_encoder_from(
    model: &mut EncoderModel,
    aux: &AuxDataset,
    steps_per_epoch: Option<usize>,
    observer: &mut dyn TrainObserver,
) -> Result<TrainReport> {
    if model.dim() != aux.dim() {
        return Err(Error::DimensionMismatch {
            expected: aux.dim(),
            actual: model.dim(),
        });
    }
    let mut objective = CosineObjective {
        tokens: Vec::with_capacity(aux.len()),
        targets: Vec::with_capacity(aux.len()),
    };
    let mut skipped = 0;
    for (title, target) in aux.pairs() {
        let ids = model.tokenizer().tokenize(title);
        if ids.is_empty() {
            skipped += 1;
            continue;
        }
        objective.tokens.push(ids);
        objective.targets.push(target.clone());
    }
    if objective.tokens.is_empty() {
        return Err(Error::Invalid("no encodable titles in auxiliary dataset".into()));
    }
    let schedule = Schedule {
        samples: objective.tokens.len(),
        steps_per_epoch,
    };
    let mut report = run_training(model, &mut objective, schedule, observer)?;
    report.skipped_empty = skipped;
    Ok(report)
}
