use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::commands::{self, require};
use super::Progress;
use crate::auxembed::{AuxConfig, AuxDataset};
use crate::encoder::{EncoderConfig, EncoderModel};
use crate::error::{Error, Result};
use crate::evalkit::{write_run, Run};
use crate::io::{read_id_text_tsv, write_text};
use crate::ranking::VectorIndex;

const CACHE_FILE: &str = "pipeline.cache";

/// Inputs, outputs and hyperparameters of one end-to-end run.
///
/// Read from line-oriented `key = value` text; `#` starts a comment.
/// Relative paths are taken from the config file's directory.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub vocab: PathBuf,
    pub postings: PathBuf,
    pub corpus: PathBuf,
    pub queries: PathBuf,
    pub qrels: PathBuf,
    /// Intermediate files and the stage cache live here.
    pub work_dir: PathBuf,
    pub report: PathBuf,
    pub aux: AuxConfig,
    pub encoder: EncoderConfig,
    pub k: Option<usize>,
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| Error::Config(format!("{key} = {value:?}: {e}")))
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new(""));
        Self::parse(&text, base).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            e => e,
        })
    }

    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut kv = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            let k = k.trim().to_string();
            if kv.insert(k.clone(), v.trim().to_string()).is_some() {
                return Err(Error::Config(format!("line {}: {k} given twice", i + 1)));
            }
        }
        let mut take = |key: &str| kv.remove(key);
        let path = |v: String| base_dir.join(v);
        let mut required = |key: &str| {
            take(key)
                .map(path)
                .ok_or_else(|| Error::Config(format!("missing key {key}")))
        };
        let vocab = required("vocab")?;
        let postings = required("postings")?;
        let corpus = required("corpus")?;
        let queries = required("queries")?;
        let qrels = required("qrels")?;
        let work_dir = required("work_dir")?;

        let seed = take("seed");
        let aux_seed = take("aux_seed").or_else(|| seed.clone());
        let encoder_seed = take("encoder_seed").or(seed);
        let (Some(aux_seed), Some(encoder_seed)) = (aux_seed, encoder_seed) else {
            return Err(Error::Config("missing key seed (or aux_seed and encoder_seed)".into()));
        };

        let mut aux = AuxConfig {
            seed: parse_value("aux_seed", &aux_seed)?,
            ..AuxConfig::default()
        };
        let mut encoder = EncoderConfig {
            seed: parse_value("encoder_seed", &encoder_seed)?,
            ..EncoderConfig::default()
        };
        let report = take("report").map(path).unwrap_or_else(|| work_dir.join("report.json"));
        let k = take("k").map(|v| parse_value("k", &v)).transpose()?;

        macro_rules! set {
            ($key:literal, $field:expr) => {
                if let Some(v) = take($key) {
                    $field = parse_value($key, &v)?;
                }
            };
        }
        set!("aux_dim", aux.dim);
        set!("aux_epochs", aux.epochs);
        set!("aux_lr", aux.initial_lr);
        set!("aux_final_lr", aux.final_lr);
        set!("aux_negatives", aux.negatives_k);
        set!("aux_noise_power", aux.noise_power);
        set!("aux_damping", aux.count_damping);
        set!("encoder_arch", encoder.arch);
        set!("encoder_token_dim", encoder.token_dim);
        set!("encoder_hidden_dim", encoder.hidden_dim);
        set!("encoder_epochs", encoder.epochs);
        set!("encoder_batch_size", encoder.batch_size);
        set!("encoder_lr", encoder.initial_lr);
        set!("encoder_final_lr", encoder.final_lr);
        set!("encoder_vocab_size", encoder.vocab_size);
        encoder.output_dim = aux.dim;

        if let Some(key) = kv.keys().next() {
            return Err(Error::Config(format!("unknown key {key}")));
        }
        aux.validate()?;
        encoder.validate()?;
        Ok(PipelineConfig {
            vocab,
            postings,
            corpus,
            queries,
            qrels,
            work_dir,
            report,
            aux,
            encoder,
            k,
        })
    }

    fn work(&self, name: &str) -> PathBuf {
        self.work_dir.join(name)
    }
}

/// Stage hashes from the last successful run, one `stage hash` per line.
struct Cache {
    path: PathBuf,
    entries: BTreeMap<String, String>,
}

impl Cache {
    fn open(work_dir: &Path) -> Self {
        let path = work_dir.join(CACHE_FILE);
        let entries = fs::read_to_string(&path)
            .unwrap_or_default()
            .lines()
            .filter_map(|l| l.split_once(' '))
            .map(|(s, h)| (s.to_string(), h.to_string()))
            .collect();
        Cache { path, entries }
    }

    fn is_fresh(&self, stage: &str, hash: &str, outputs: &[&Path]) -> bool {
        self.entries.get(stage).is_some_and(|h| h == hash) && outputs.iter().all(|p| p.exists())
    }

    fn record(&mut self, stage: &str, hash: String) -> Result<()> {
        self.entries.insert(stage.to_string(), hash);
        let text: String = self.entries.iter().map(|(s, h)| format!("{s} {h}\n")).collect();
        write_text(&self.path, &text)
    }
}

fn stage_hash(stage: &str, params: &str, inputs: &[&Path]) -> Result<String> {
    let mut h = Sha256::new();
    h.update(stage.as_bytes());
    h.update([0]);
    h.update(params.as_bytes());
    for path in inputs {
        h.update([0]);
        h.update(fs::read(path).map_err(|e| Error::io(*path, e))?);
    }
    Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

/// Name, parameter string, inputs, outputs and body of one stage.
type Stage<'a> = (
    &'static str,
    String,
    Vec<&'a Path>,
    Vec<&'a Path>,
    Box<dyn Fn(Progress) -> Result<()> + 'a>,
);

/// Runs extract, merge, train-aux, train-encoder, index, rank and evaluate.
/// A stage is skipped when its inputs and parameters hash to the value
/// recorded after its last success and its outputs still exist.
pub fn run_pipeline(config_path: &Path, workers: usize, quiet: bool) -> Result<()> {
    require(&[config_path])?;
    let cfg = PipelineConfig::load(config_path)?;
    require(&[&cfg.vocab, &cfg.postings, &cfg.corpus, &cfg.queries, &cfg.qrels])?;
    fs::create_dir_all(&cfg.work_dir).map_err(|e| Error::io(&cfg.work_dir, e))?;
    let mut cache = Cache::open(&cfg.work_dir);

    let raw = cfg.work("raw.jsonl");
    let merged = cfg.work("merged.jsonl");
    let aux_model = cfg.work("aux.model");
    let aux_data = cfg.work("aux.dataset");
    let encoder = cfg.work("encoder.model");
    let index = cfg.work("corpus.index");
    let run = cfg.work("run.txt");
    let aux_params = serde_json::to_string(&cfg.aux).expect("serializable config");
    let encoder_params = serde_json::to_string(&cfg.encoder).expect("serializable config");
    let k_param = format!("{:?}", cfg.k);

    let stages: Vec<Stage> = vec![
        (
            "extract",
            String::new(),
            vec![&cfg.vocab, &cfg.postings],
            vec![&raw],
            Box::new(|p| commands::extract(&cfg.vocab, &cfg.postings, &raw, workers, p)),
        ),
        (
            "merge",
            String::new(),
            vec![&raw],
            vec![&merged],
            Box::new(|p| commands::merge(&raw, &merged, p)),
        ),
        (
            "train-aux",
            aux_params,
            vec![&merged],
            vec![&aux_model, &aux_data],
            Box::new(|p| commands::train_aux(&merged, &aux_model, Some(&aux_data), &cfg.aux, p)),
        ),
        (
            "train-encoder",
            encoder_params,
            vec![&aux_data],
            vec![&encoder],
            Box::new(|p| {
                commands::train_encoder_config(&AuxDataset::load(&aux_data)?, &encoder, &cfg.encoder, None, p)
            }),
        ),
        (
            "index",
            String::new(),
            vec![&encoder, &cfg.corpus],
            vec![&index],
            Box::new(|p| commands::index_encoder(&encoder, &cfg.corpus, &index, workers, p)),
        ),
        (
            "rank",
            k_param,
            vec![&encoder, &index, &cfg.queries],
            vec![&run],
            Box::new(|p| {
                let model = EncoderModel::load(&encoder)?;
                let idx = VectorIndex::load(&index)?;
                let queries = read_id_text_tsv(&cfg.queries)?;
                let lists = commands::rank_with_encoder(&model, &idx, &queries, cfg.k, workers)?;
                write_run(
                    &run,
                    &Run {
                        tag: "skillsim".into(),
                        lists,
                    },
                )?;
                p.line(format!("{} queries ranked", queries.len()));
                Ok(())
            }),
        ),
        (
            "evaluate",
            String::new(),
            vec![&run, &cfg.qrels],
            vec![&cfg.report],
            Box::new(|p| commands::evaluate(&run, &cfg.qrels, &cfg.report, p).map(|_| ())),
        ),
    ];

    for (name, params, inputs, outputs, run) in stages {
        let p = Progress::new(name, quiet);
        let fail = |e: Error| Error::Invalid(format!("stage {name} failed: {e}"));
        let hash = stage_hash(name, &params, &inputs).map_err(fail)?;
        if cache.is_fresh(name, &hash, &outputs) {
            p.line("cached");
            continue;
        }
        run(p).map_err(fail)?;
        cache.record(name, hash)?;
    }
    Ok(())
}
