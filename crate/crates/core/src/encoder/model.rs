use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::network::{backward, forward, Params};
use super::{Architecture, EncoderConfig, Tokenizer};
use crate::binio::{read_file, Reader, Writer};
use crate::error::{Error, Result};
use crate::linalg::{dot, norm, round_to_f32, Matrix};

pub(crate) const MODEL_MAGIC: &[u8; 4] = b"JSTM";

/// Title encoder: tokenizer, network parameters and the config they were
/// built with.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderModel {
    tokenizer: Tokenizer,
    config: EncoderConfig,
    params: Params,
}

impl EncoderModel {
    /// Randomly initialized model; parameters depend only on `config.seed`.
    pub fn init(tokenizer: Tokenizer, config: EncoderConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let params = Params::init(&config, tokenizer.vocab_size(), &mut rng);
        Ok(EncoderModel {
            tokenizer,
            config,
            params,
        })
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.config
    }

    pub fn tokenizer(&self) -> &Tokenizer {
        &self.tokenizer
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut Params {
        &mut self.params
    }

    pub fn dim(&self) -> usize {
        self.config.output_dim
    }

    pub fn tokens(&self, title: &str) -> Result<Vec<u32>> {
        let ids = self.tokenizer.tokenize(title);
        if ids.is_empty() {
            return Err(Error::EmptyTitle);
        }
        Ok(ids)
    }

    /// Projection output before normalization.
    pub fn forward_raw(&self, ids: &[u32]) -> Vec<f64> {
        forward(&self.params, &self.config, ids, false).output
    }

    /// Unit-length encoding of `title`.
    pub fn encode(&self, title: &str) -> Result<Vec<f64>> {
        let ids = self.tokens(title)?;
        let mut y = self.forward_raw(&ids);
        let n = norm(&y);
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::ZeroVector(format!(" encoding {title:?}")));
        }
        y.iter_mut().for_each(|v| *v /= n);
        Ok(y)
    }

    /// Cosine distance between the encoding of `ids` and `target`.
    pub fn cosine_loss(&self, ids: &[u32], target: &[f64]) -> f64 {
        cosine_loss_and_grad(&self.forward_raw(ids), target).0
    }

    /// Loss of [`cosine_loss`](Self::cosine_loss) and its gradient with
    /// respect to every parameter block.
    pub fn cosine_loss_gradient(&self, ids: &[u32], target: &[f64]) -> (f64, Params) {
        let fwd = forward(&self.params, &self.config, ids, true);
        let (loss, d_out) = cosine_loss_and_grad(&fwd.output, target);
        let mut grad = self.params.zeros_like();
        backward(&self.params, &self.config, ids, &fwd, &d_out, &mut grad);
        (loss, grad)
    }

    pub(crate) fn round_params(&mut self) {
        for (_, m) in self.params.blocks_mut() {
            round_to_f32(&mut m.data);
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new(MODEL_MAGIC);
        w.str("tokenizer");
        w.len_u32(self.tokenizer.vocab_size());
        for id in 0..self.tokenizer.vocab_size() as u32 {
            let unit = self.tokenizer.unit(id).expect("dense ids");
            w.len_u32(unit.len());
            unit.iter().for_each(|&b| w.u8(b));
        }
        w.len_u32(self.tokenizer.merges().len());
        for &(a, b) in self.tokenizer.merges() {
            w.u32(a);
            w.u32(b);
        }

        let c = &self.config;
        w.str("config");
        w.u32(c.arch.code());
        w.len_u32(c.token_dim);
        w.len_u32(c.hidden_dim);
        w.len_u32(c.output_dim);
        w.len_u32(c.epochs);
        w.len_u32(c.batch_size);
        w.f64(c.initial_lr);
        w.f64(c.final_lr);
        w.u64(c.seed);
        w.len_u32(c.vocab_size);

        let blocks = self.params.blocks();
        w.len_u32(blocks.len());
        for (name, m) in blocks {
            w.str(name);
            w.len_u32(m.rows);
            w.len_u32(m.cols);
            w.f32_row(&m.data);
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
        let mut r = Reader::open(bytes, MODEL_MAGIC)?;
        r.expect_name("tokenizer")?;
        let n_units = r.len("unit count")?;
        let mut units = Vec::with_capacity(n_units.min(1 << 20));
        for _ in 0..n_units {
            let n = r.len("unit length")?;
            units.push(r.bytes(n, "unit bytes")?.to_vec());
        }
        let n_merges = r.len("merge count")?;
        let mut merges = Vec::with_capacity(n_merges.min(1 << 20));
        for _ in 0..n_merges {
            merges.push((r.u32("merge")?, r.u32("merge")?));
        }
        let tokenizer = Tokenizer::from_merges(merges)?;
        let consistent = units.len() == tokenizer.vocab_size()
            && units
                .iter()
                .enumerate()
                .all(|(id, u)| tokenizer.unit(id as u32) == Some(u.as_slice()));
        if !consistent {
            return Err(Error::Format("unit table disagrees with merge list".into()));
        }

        r.expect_name("config")?;
        let config = EncoderConfig {
            arch: Architecture::from_code(r.u32("arch")?)?,
            token_dim: r.len("token_dim")?,
            hidden_dim: r.len("hidden_dim")?,
            output_dim: r.len("output_dim")?,
            epochs: r.len("epochs")?,
            batch_size: r.len("batch_size")?,
            initial_lr: r.f64("initial_lr")?,
            final_lr: r.f64("final_lr")?,
            seed: r.u64("seed")?,
            vocab_size: r.len("vocab_size")?,
        };
        config.validate()?;

        let mut params = Params::init(&config, tokenizer.vocab_size(), &mut ChaCha8Rng::seed_from_u64(0));
        let n_blocks = r.len("block count")?;
        let mut blocks = params.blocks_mut();
        if n_blocks != blocks.len() {
            return Err(Error::Format(format!(
                "{} parameter blocks, expected {} for {}",
                n_blocks,
                blocks.len(),
                config.arch.name()
            )));
        }
        for (name, m) in blocks.iter_mut() {
            r.expect_name(name)?;
            let rows = r.len("rows")?;
            let cols = r.len("cols")?;
            if (rows, cols) != (m.rows, m.cols) {
                return Err(Error::Format(format!(
                    "block {name} is {rows}x{cols}, expected {}x{}",
                    m.rows, m.cols
                )));
            }
            **m = Matrix {
                rows,
                cols,
                data: r.f32_row(rows * cols, name)?,
            };
        }
        drop(blocks);
        r.finish()?;
        if !params.is_finite() {
            return Err(Error::Format("non-finite parameter".into()));
        }
        Ok(EncoderModel {
            tokenizer,
            config,
            params,
        })
    }
}

/// `1 − cos(y, e)` and its gradient with respect to `y`.
pub fn cosine_loss_and_grad(y: &[f64], e: &[f64]) -> (f64, Vec<f64>) {
    let ny = norm(y);
    let ne = norm(e);
    let ye = dot(y, e);
    let loss = 1.0 - ye / (ny * ne);
    let grad = y
        .iter()
        .zip(e)
        .map(|(yi, ei)| -(ei / (ny * ne) - ye * yi / (ny * ny * ny * ne)))
        .collect();
    (loss, grad)
}
