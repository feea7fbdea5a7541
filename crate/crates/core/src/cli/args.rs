use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::auxembed::{AuxConfig, CountDamping};
use crate::baselines::Bm25Params;
use crate::encoder::{Architecture, EncoderConfig};
use crate::error::Result;
use crate::evalkit::SyntheticBenchConfig;

#[derive(Debug, Parser)]
#[command(name = "skillsim", version, about = "Job title similarity from noisy skill labels")]
pub struct Cli {
    /// Threads for extraction, encoding and ranking.
    #[arg(long, global = true, default_value_t = 1)]
    pub workers: usize,

    /// Suppress progress lines on standard error.
    #[arg(long, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract skills from postings by dictionary matching.
    Extract {
        #[arg(long)]
        vocab: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Merge raw records into per-title skill multisets.
    Merge {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train PV-DBOW vectors over merged skill multisets.
    TrainAux {
        #[arg(long = "in")]
        input: PathBuf,
        /// Model file (JSAX).
        #[arg(long)]
        out: PathBuf,
        /// Normalized title/vector dataset (JSDX) for encoder training.
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[command(flatten)]
        aux: AuxArgs,
    },
    /// Train the title encoder on one or more auxiliary datasets.
    TrainEncoder {
        /// Repeat to train on the concatenation of several datasets.
        #[arg(long, required = true)]
        aux: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        encoder: EncoderArgs,
    },
    /// Train the encoder by skill negative sampling on raw records.
    TrainNegsamp {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Where to write the skill output vectors (JSNS).
        #[arg(long)]
        skill_vectors: Option<PathBuf>,
        #[command(flatten)]
        encoder: EncoderArgs,
        #[command(flatten)]
        negsamp: NegSampArgs,
    },
    /// Encode titles to unit vectors (JSON lines).
    Encode {
        #[arg(long)]
        model: PathBuf,
        /// `id<TAB>title` lines.
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build a retrieval index over a corpus.
    Index {
        #[arg(long, value_enum, default_value_t = Method::Encoder)]
        method: Method,
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Merged records, for `tfidf`.
        #[arg(long)]
        merged: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        bm25: Bm25Args,
    },
    /// Rank a corpus for each query and write a TREC run.
    Rank(RankArgs),
    /// Map raw titles onto a normalized title list (TREC run output).
    Normalize {
        #[arg(long)]
        model: PathBuf,
        /// Normalized titles, `id<TAB>title`.
        #[arg(long)]
        titles: PathBuf,
        /// Raw titles, `id<TAB>title`.
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long, default_value = "skillsim")]
        tag: String,
    },
    /// Predict the top skills of titles from the auxiliary skill vectors.
    PredictSkills {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        aux_model: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        n: usize,
    },
    /// Score a TREC run against qrels; writes a JSON report.
    Evaluate {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        qrels: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a seeded synthetic benchmark.
    GenBench {
        #[arg(long)]
        out_dir: PathBuf,
        #[command(flatten)]
        bench: BenchArgs,
    },
    /// Record MAP/P@5/P@20 at training snapshots.
    LearningCurve {
        #[arg(long, value_enum)]
        trainer: Trainer,
        /// Auxiliary dataset(s), for `jst`.
        #[arg(long)]
        aux: Vec<PathBuf>,
        /// Raw records, for `negsamp`.
        #[arg(long)]
        raw: Option<PathBuf>,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        queries: PathBuf,
        #[arg(long)]
        qrels: PathBuf,
        /// Optimizer steps between rows.
        #[arg(long)]
        interval: usize,
        /// CSV path; with several seeds one file per seed is written,
        /// named `<stem>.seed<N>.csv`.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        encoder: EncoderArgs,
        #[command(flatten)]
        negsamp: NegSampArgs,
    },
    /// Run extract → merge → train-aux → train-encoder → index → rank →
    /// evaluate from a `key = value` config file, skipping unchanged stages.
    Pipeline {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Encoder,
    Bm25,
    Tfidf,
    Doc2vec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Trainer {
    Jst,
    Negsamp,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    #[arg(long, value_enum, default_value_t = Method::Encoder)]
    pub method: Method,
    /// Queries, `id<TAB>title` (encoder, bm25).
    #[arg(long)]
    pub queries: Option<PathBuf>,
    /// Query postings whose descriptions supply query skills (tfidf, doc2vec).
    #[arg(long)]
    pub query_postings: Option<PathBuf>,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Prebuilt index (JSIX for encoder, JSBM for bm25, JSTF for tfidf).
    #[arg(long)]
    pub index: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub aux_model: Option<PathBuf>,
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    #[arg(long)]
    pub merged: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Results per query; all when omitted.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub tag: Option<String>,
    /// PV-DBOW inference epochs for doc2vec query vectors.
    #[arg(long, default_value_t = 200)]
    pub infer_epochs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub bm25: Bm25Args,
}

#[derive(Debug, Args)]
pub struct Bm25Args {
    #[arg(long, default_value_t = Bm25Params::default().k1)]
    pub k1: f64,
    #[arg(long, default_value_t = Bm25Params::default().b)]
    pub b: f64,
}

impl Bm25Args {
    pub fn params(&self) -> Bm25Params {
        Bm25Params { k1: self.k1, b: self.b }
    }
}

#[derive(Debug, Args)]
pub struct AuxArgs {
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = AuxConfig::default().dim)]
    pub dim: usize,
    #[arg(long, default_value_t = AuxConfig::default().epochs)]
    pub epochs: usize,
    #[arg(long, default_value_t = AuxConfig::default().initial_lr)]
    pub lr: f64,
    #[arg(long, default_value_t = AuxConfig::default().final_lr)]
    pub final_lr: f64,
    #[arg(long, default_value_t = AuxConfig::default().negatives_k)]
    pub negatives: usize,
    #[arg(long, default_value_t = AuxConfig::default().noise_power)]
    pub noise_power: f64,
    #[arg(long, default_value = "log1p")]
    pub damping: CountDamping,
}

impl AuxArgs {
    pub fn config(&self) -> Result<AuxConfig> {
        let c = AuxConfig {
            dim: self.dim,
            epochs: self.epochs,
            initial_lr: self.lr,
            final_lr: self.final_lr,
            negatives_k: self.negatives,
            noise_power: self.noise_power,
            count_damping: self.damping,
            seed: self.seed,
        };
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Args)]
pub struct EncoderArgs {
    #[arg(long, required = true, num_args = 1)]
    pub seed: Vec<u64>,
    #[arg(long, default_value = "bilstm")]
    pub arch: Architecture,
    #[arg(long, default_value_t = EncoderConfig::default().token_dim)]
    pub token_dim: usize,
    #[arg(long, default_value_t = EncoderConfig::default().hidden_dim)]
    pub hidden_dim: usize,
    /// Defaults to the auxiliary dimension for `train-encoder` and to 100
    /// otherwise.
    #[arg(long)]
    pub output_dim: Option<usize>,
    #[arg(long, default_value_t = EncoderConfig::default().epochs)]
    pub epochs: usize,
    #[arg(long, default_value_t = EncoderConfig::default().batch_size)]
    pub batch_size: usize,
    #[arg(long, default_value_t = EncoderConfig::default().initial_lr)]
    pub lr: f64,
    #[arg(long, default_value_t = EncoderConfig::default().final_lr)]
    pub final_lr: f64,
    #[arg(long, default_value_t = EncoderConfig::default().vocab_size)]
    pub vocab_size: usize,
    /// Optimizer steps per epoch; defaults to one pass over the samples.
    #[arg(long)]
    pub steps_per_epoch: Option<usize>,
}

impl EncoderArgs {
    pub fn config(&self, seed: u64, default_output_dim: usize) -> Result<EncoderConfig> {
        let c = EncoderConfig {
            arch: self.arch,
            token_dim: self.token_dim,
            hidden_dim: self.hidden_dim,
            output_dim: self.output_dim.unwrap_or(default_output_dim),
            epochs: self.epochs,
            batch_size: self.batch_size,
            initial_lr: self.lr,
            final_lr: self.final_lr,
            seed,
            vocab_size: self.vocab_size,
        };
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Args)]
pub struct NegSampArgs {
    #[arg(long, default_value_t = 5)]
    pub negatives: usize,
    #[arg(long, default_value_t = 0.75)]
    pub noise_power: f64,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = SyntheticBenchConfig::default().n_clusters)]
    pub n_clusters: usize,
    #[arg(long, default_value_t = SyntheticBenchConfig::default().titles_per_cluster)]
    pub titles_per_cluster: usize,
    #[arg(long, default_value_t = SyntheticBenchConfig::default().skills_per_cluster)]
    pub skills_per_cluster: usize,
    #[arg(long, default_value_t = SyntheticBenchConfig::default().shared_skill_noise_rate)]
    pub noise_rate: f64,
    #[arg(long, default_value_t = SyntheticBenchConfig::default().filler_vocab_size)]
    pub filler_vocab_size: usize,
    #[arg(long, default_value_t = SyntheticBenchConfig::default().postings_per_title)]
    pub postings_per_title: usize,
    #[arg(long, default_value_t = SyntheticBenchConfig::default().queries_per_cluster)]
    pub queries_per_cluster: usize,
    #[arg(long, default_value_t = SyntheticBenchConfig::default().mention_rate)]
    pub mention_rate: f64,
}

impl BenchArgs {
    pub fn config(&self) -> SyntheticBenchConfig {
        SyntheticBenchConfig {
            n_clusters: self.n_clusters,
            titles_per_cluster: self.titles_per_cluster,
            skills_per_cluster: self.skills_per_cluster,
            shared_skill_noise_rate: self.noise_rate,
            filler_vocab_size: self.filler_vocab_size,
            seed: self.seed,
            postings_per_title: self.postings_per_title,
            queries_per_cluster: self.queries_per_cluster,
            mention_rate: self.mention_rate,
        }
    }
}
