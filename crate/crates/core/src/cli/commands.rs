use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::args::{Cli, Command, EncoderArgs, Method, RankArgs, Trainer};
use super::{run_pipeline, Progress};
use crate::auxembed::{export_aux_dataset, train_pvdbow_with, AuxConfig, AuxDataset, AuxModel};
use crate::baselines::{train_negative_sampling_with, Bm25Index, Bm25Params, NegSampConfig, SkillStats, TfidfVector};
use crate::corpus::{
    build_raw_dataset, load_skill_vocabulary, merge_by_title, normalize_title, read_postings, JobSkillRecord,
    MergedRecord, SkillExtractor,
};
use crate::encoder::{
    init_encoder, train_encoder_from, train_encoder_with, EncoderConfig, EncoderModel, TrainObserver,
};
use crate::error::{Error, Result};
use crate::evalkit::{
    evaluate_run, generate_synthetic_benchmark, read_qrels, read_run, write_run, CurveRecorder, EvalBundle,
    MetricsReport, Run,
};
use crate::io::{read_id_text_tsv, read_jsonl, write_jsonl, write_text};
use crate::linalg::cosine_similarity;
use crate::ranking::{build_index, predict_skills, rank_many, Normalizer, RankedList, VectorIndex};

pub(super) fn run(cli: Cli) -> Result<()> {
    let quiet = cli.quiet;
    let workers = cli.workers.max(1);
    let p = |stage| Progress::new(stage, quiet);
    match cli.command {
        Command::Extract { vocab, input, out } => extract(&vocab, &input, &out, workers, p("extract")),
        Command::Merge { input, out } => merge(&input, &out, p("merge")),
        Command::TrainAux {
            input,
            out,
            dataset,
            aux,
        } => train_aux(&input, &out, dataset.as_deref(), &aux.config()?, p("train-aux")),
        Command::TrainEncoder { aux, out, encoder } => {
            let seed = single_seed(&encoder)?;
            train_encoder(&aux, &out, &encoder, seed, p("train-encoder"))
        }
        Command::TrainNegsamp {
            input,
            out,
            skill_vectors,
            encoder,
            negsamp,
        } => {
            require(&[&input])?;
            let seed = single_seed(&encoder)?;
            let config = NegSampConfig {
                encoder: encoder.config(seed, 100)?,
                negatives_k: negsamp.negatives,
                noise_power: negsamp.noise_power,
                steps_per_epoch: encoder.steps_per_epoch,
            };
            train_negsamp(&input, &out, skill_vectors.as_deref(), &config, p("train-negsamp"))
        }
        Command::Encode { model, input, out } => encode(&model, &input, &out, p("encode")),
        Command::Index {
            method,
            corpus,
            model,
            merged,
            out,
            bm25,
        } => index(method, corpus, model, merged, &out, bm25.params(), workers, p("index")),
        Command::Rank(args) => rank(&args, workers, p("rank")),
        Command::Normalize {
            model,
            titles,
            input,
            out,
            k,
            tag,
        } => normalize(&model, &titles, &input, &out, k, &tag, p("normalize")),
        Command::PredictSkills {
            model,
            aux_model,
            input,
            out,
            n,
        } => predict(&model, &aux_model, &input, &out, n, p("predict-skills")),
        Command::Evaluate { run, qrels, out } => evaluate(&run, &qrels, &out, p("evaluate")).map(|_| ()),
        Command::GenBench { out_dir, bench } => {
            let p = p("gen-bench");
            let b = generate_synthetic_benchmark(&bench.config())?;
            b.write_to(&out_dir)?;
            p.line(format!(
                "{} postings, {} corpus titles, {} queries, {} skills -> {}",
                b.postings.len(),
                b.corpus.len(),
                b.queries.len(),
                b.vocabulary.size(),
                out_dir.display()
            ));
            Ok(())
        }
        Command::LearningCurve {
            trainer,
            aux,
            raw,
            corpus,
            queries,
            qrels,
            interval,
            out,
            encoder,
            negsamp,
        } => {
            let p = p("learning-curve");
            if interval == 0 {
                return Err(Error::Config("--interval must be positive".into()));
            }
            require(&[&corpus, &queries, &qrels])?;
            let bundle = EvalBundle {
                corpus: read_id_text_tsv(&corpus)?,
                queries: read_id_text_tsv(&queries)?,
                qrels: read_qrels(&qrels)?,
            };
            for &seed in &encoder.seed {
                let path = if encoder.seed.len() > 1 {
                    seeded_path(&out, seed)
                } else {
                    out.clone()
                };
                let mut rec = CurveRecorder::new(&bundle, interval)
                    .with_csv(&path)?
                    .with_progress(|pt| {
                        p.line(format!(
                            "seed {seed} step {} map {:.4} p5 {:.4} p20 {:.4}",
                            pt.step, pt.map, pt.p5, pt.p20
                        ))
                    });
                match trainer {
                    Trainer::Jst => {
                        let data = load_aux_datasets(&aux)?;
                        let config = encoder.config(seed, data.dim())?;
                        let mut model = init_encoder(&data, &config)?;
                        train_encoder_from(&mut model, &data, encoder.steps_per_epoch, &mut rec)?;
                    }
                    Trainer::Negsamp => {
                        let raw = raw
                            .as_ref()
                            .ok_or_else(|| Error::Config("--raw is required for negsamp".into()))?;
                        let records: Vec<JobSkillRecord> = read_jsonl(raw)?;
                        let config = NegSampConfig {
                            encoder: encoder.config(seed, 100)?,
                            negatives_k: negsamp.negatives,
                            noise_power: negsamp.noise_power,
                            steps_per_epoch: encoder.steps_per_epoch,
                        };
                        train_negative_sampling_with(&records, &config, &mut rec)?;
                    }
                }
                p.line(format!("wrote {}", path.display()));
            }
            Ok(())
        }
        Command::Pipeline { config } => run_pipeline(&config, workers, quiet),
    }
}

fn seeded_path(out: &Path, seed: u64) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    out.with_file_name(format!("{stem}.seed{seed}.csv"))
}

fn single_seed(encoder: &EncoderArgs) -> Result<u64> {
    match encoder.seed.as_slice() {
        [seed] => Ok(*seed),
        _ => Err(Error::Config("exactly one --seed is allowed here".into())),
    }
}

/// Fails with the first missing input, named.
pub(super) fn require(paths: &[&Path]) -> Result<()> {
    for path in paths {
        if !path.exists() {
            return Err(Error::io(
                path,
                std::io::Error::new(std::io::ErrorKind::NotFound, "no such file"),
            ));
        }
    }
    Ok(())
}

fn need<'a>(value: &'a Option<PathBuf>, flag: &str, method: &str) -> Result<&'a Path> {
    let path = value
        .as_deref()
        .ok_or_else(|| Error::Config(format!("--{flag} is required for {method}")))?;
    require(&[path])?;
    Ok(path)
}

pub(super) fn extract(vocab: &Path, input: &Path, out: &Path, workers: usize, p: Progress) -> Result<()> {
    require(&[vocab, input])?;
    let vocabulary = load_skill_vocabulary(vocab)?;
    let extractor = SkillExtractor::new(&vocabulary);
    let postings = read_postings(input)?;
    let raw = build_raw_dataset(&postings.postings, &extractor, workers)?;
    write_jsonl(out, &raw.records)?;
    let with_skills = raw.records.iter().filter(|r| !r.skills.is_empty()).count();
    p.line(format!(
        "{} postings, {} malformed lines skipped, {} empty titles dropped, {} records ({} with skills)",
        postings.postings.len(),
        postings.malformed,
        raw.dropped_empty_title,
        raw.records.len(),
        with_skills
    ));
    Ok(())
}

pub(super) fn merge(input: &Path, out: &Path, p: Progress) -> Result<()> {
    require(&[input])?;
    let raw: Vec<JobSkillRecord> = read_jsonl(input)?;
    let merged = merge_by_title(&raw);
    write_jsonl(out, &merged)?;
    p.line(format!("{} records -> {} titles", raw.len(), merged.len()));
    Ok(())
}

pub(super) fn train_aux(
    input: &Path,
    out: &Path,
    dataset: Option<&Path>,
    config: &AuxConfig,
    p: Progress,
) -> Result<()> {
    require(&[input])?;
    let merged: Vec<MergedRecord> = read_jsonl(input)?;
    let total = config.epochs;
    let (model, report) = train_pvdbow_with(&merged, config, |epoch, loss| {
        p.line(format!("epoch {epoch}/{total} loss {loss:.6}"));
    })?;
    if report.skipped_empty > 0 {
        p.line(format!(
            "warning: {} titles without skills skipped",
            report.skipped_empty
        ));
    }
    model.save(out)?;
    if let Some(path) = dataset {
        export_aux_dataset(&model)?.save(path)?;
    }
    p.line(format!(
        "{} titles, {} skills, dim {}",
        model.titles().len(),
        model.skills().len(),
        model.dim()
    ));
    Ok(())
}

fn load_aux_datasets(paths: &[PathBuf]) -> Result<AuxDataset> {
    if paths.is_empty() {
        return Err(Error::Config("--aux is required".into()));
    }
    let refs: Vec<&Path> = paths.iter().map(PathBuf::as_path).collect();
    require(&refs)?;
    let sets = paths.iter().map(|p| AuxDataset::load(p)).collect::<Result<Vec<_>>>()?;
    if sets.len() == 1 {
        Ok(sets.into_iter().next().unwrap())
    } else {
        AuxDataset::concat(&sets)
    }
}

struct EpochLog<'a>(Progress<'a>, usize);

impl TrainObserver for EpochLog<'_> {
    fn on_epoch(&mut self, epoch: usize, mean_loss: f64) {
        self.0.line(format!("epoch {epoch}/{} loss {mean_loss:.6}", self.1));
    }
}

pub(super) fn train_encoder(aux: &[PathBuf], out: &Path, args: &EncoderArgs, seed: u64, p: Progress) -> Result<()> {
    let data = load_aux_datasets(aux)?;
    let config = args.config(seed, data.dim())?;
    train_encoder_config(&data, out, &config, args.steps_per_epoch, p)
}

pub(super) fn train_encoder_config(
    data: &AuxDataset,
    out: &Path,
    config: &EncoderConfig,
    steps_per_epoch: Option<usize>,
    p: Progress,
) -> Result<()> {
    let report = if steps_per_epoch.is_some() {
        let mut model = init_encoder(data, config)?;
        let r = train_encoder_from(&mut model, data, steps_per_epoch, &mut EpochLog(p, config.epochs))?;
        model.save(out)?;
        r
    } else {
        let (model, r) = train_encoder_with(data, config, &mut EpochLog(p, config.epochs))?;
        model.save(out)?;
        r
    };
    p.line(format!(
        "{} titles, {} steps ({} per epoch)",
        data.len() - report.skipped_empty,
        report.steps,
        report.steps / config.epochs.max(1)
    ));
    Ok(())
}

fn train_negsamp(
    input: &Path,
    out: &Path,
    skill_vectors: Option<&Path>,
    config: &NegSampConfig,
    p: Progress,
) -> Result<()> {
    let records: Vec<JobSkillRecord> = read_jsonl(input)?;
    let (model, report) = train_negative_sampling_with(&records, config, &mut EpochLog(p, config.encoder.epochs))?;
    model.encoder.save(out)?;
    if let Some(path) = skill_vectors {
        model.save_skill_vectors(path)?;
    }
    p.line(format!("{} skills, {} steps", model.skills().len(), report.steps));
    Ok(())
}

#[derive(Serialize)]
struct Encoded<'a> {
    id: &'a str,
    vector: Vec<f64>,
}

fn encode(model: &Path, input: &Path, out: &Path, p: Progress) -> Result<()> {
    require(&[model, input])?;
    let m = EncoderModel::load(model)?;
    let titles = read_id_text_tsv(input)?;
    let mut rows = Vec::with_capacity(titles.len());
    let mut skipped = 0;
    for (id, t) in &titles {
        match m.encode(t) {
            Ok(v) => rows.push(Encoded { id, vector: v }),
            Err(Error::EmptyTitle) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    write_jsonl(out, &rows)?;
    p.line(format!("{} titles encoded, {} empty skipped", rows.len(), skipped));
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn index(
    method: Method,
    corpus: Option<PathBuf>,
    model: Option<PathBuf>,
    merged: Option<PathBuf>,
    out: &Path,
    bm25: Bm25Params,
    workers: usize,
    p: Progress,
) -> Result<()> {
    match method {
        Method::Encoder => index_encoder(
            need(&model, "model", "encoder")?,
            need(&corpus, "corpus", "encoder")?,
            out,
            workers,
            p,
        ),
        Method::Bm25 => {
            let corpus = read_id_text_tsv(need(&corpus, "corpus", "bm25")?)?;
            let idx = Bm25Index::build(&corpus, bm25)?;
            idx.save(out)?;
            p.line(format!("{} documents, avgdl {:.3}", idx.num_docs(), idx.avgdl()));
            Ok(())
        }
        Method::Tfidf => {
            let merged: Vec<MergedRecord> = read_jsonl(need(&merged, "merged", "tfidf")?)?;
            let stats = SkillStats::build(&merged)?;
            stats.save(out)?;
            p.line(format!(
                "{} titles, {} skills",
                stats.num_titles(),
                stats.skills().len()
            ));
            Ok(())
        }
        Method::Doc2vec => Err(Error::Config(
            "doc2vec ranks from the auxiliary model directly; no index".into(),
        )),
    }
}

pub(super) fn index_encoder(model: &Path, corpus: &Path, out: &Path, workers: usize, p: Progress) -> Result<()> {
    require(&[model, corpus])?;
    let m = EncoderModel::load(model)?;
    let corpus = read_id_text_tsv(corpus)?;
    let (idx, skipped) = build_index(&corpus, &m, workers)?;
    if skipped > 0 {
        p.line(format!(
            "warning: {skipped} titles normalize to nothing and were skipped"
        ));
    }
    idx.save(out)?;
    p.line(format!("{} entries, dim {}", idx.len(), idx.dim()));
    Ok(())
}

fn in_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Invalid(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Encodes queries; queries that normalize to nothing get empty lists.
pub(super) fn rank_with_encoder(
    model: &EncoderModel,
    index: &VectorIndex,
    queries: &[(String, String)],
    k: Option<usize>,
    workers: usize,
) -> Result<Vec<RankedList>> {
    let mut encoded = Vec::with_capacity(queries.len());
    let mut empty = Vec::new();
    for (qid, t) in queries {
        match model.encode(t) {
            Ok(v) => encoded.push((qid.clone(), v)),
            Err(Error::EmptyTitle) => empty.push(qid.clone()),
            Err(e) => return Err(e),
        }
    }
    let mut lists = in_pool(workers, || rank_many(index, &encoded, k))??;
    lists.extend(empty.into_iter().map(|query_id| RankedList {
        query_id,
        items: Vec::new(),
    }));
    Ok(lists)
}

/// Skill multisets of query postings, keyed by posting id.
fn query_skills(vocab: &Path, postings: &Path) -> Result<Vec<(String, BTreeMap<String, u32>)>> {
    let extractor = SkillExtractor::new(&load_skill_vocabulary(vocab)?);
    Ok(read_postings(postings)?
        .postings
        .iter()
        .map(|p| {
            let counts = extractor.extract(&p.description).into_iter().map(|s| (s, 1)).collect();
            (p.id.clone(), counts)
        })
        .collect())
}

struct CorpusDoc {
    id: String,
    title_key: String,
    /// Merged skill counts of the title, if it was seen in training data.
    counts: Option<BTreeMap<String, u32>>,
}

fn corpus_skills(corpus: &Path, merged: &[MergedRecord]) -> Result<Vec<CorpusDoc>> {
    let by_key: HashMap<&str, &BTreeMap<String, u32>> =
        merged.iter().map(|m| (m.title_key.as_str(), &m.skill_counts)).collect();
    Ok(read_id_text_tsv(corpus)?
        .into_iter()
        .map(|(id, t)| {
            let title_key = normalize_title(&t);
            let counts = by_key.get(title_key.as_str()).map(|c| (*c).clone());
            CorpusDoc { id, title_key, counts }
        })
        .collect())
}

fn rank(args: &RankArgs, workers: usize, p: Progress) -> Result<()> {
    let method = args.method;
    let name = match method {
        Method::Encoder => "encoder",
        Method::Bm25 => "bm25",
        Method::Tfidf => "tfidf",
        Method::Doc2vec => "doc2vec",
    };
    let lists = match method {
        Method::Encoder => {
            let model = EncoderModel::load(need(&args.model, "model", name)?)?;
            let queries = read_id_text_tsv(need(&args.queries, "queries", name)?)?;
            let index = match &args.index {
                Some(path) => {
                    require(&[path])?;
                    VectorIndex::load(path)?
                }
                None => build_index(&read_id_text_tsv(need(&args.corpus, "corpus", name)?)?, &model, workers)?.0,
            };
            rank_with_encoder(&model, &index, &queries, args.k, workers)?
        }
        Method::Bm25 => {
            let queries = read_id_text_tsv(need(&args.queries, "queries", name)?)?;
            let index = match &args.index {
                Some(path) => {
                    require(&[path])?;
                    Bm25Index::load(path)?
                }
                None => Bm25Index::build(
                    &read_id_text_tsv(need(&args.corpus, "corpus", name)?)?,
                    args.bm25.params(),
                )?,
            };
            queries.iter().map(|(q, t)| index.rank(q, t, args.k)).collect()
        }
        Method::Tfidf => {
            let vocab = need(&args.vocab, "vocab", name)?;
            let qp = need(&args.query_postings, "query-postings", name)?;
            let merged: Vec<MergedRecord> = read_jsonl(need(&args.merged, "merged", name)?)?;
            let corpus = corpus_skills(need(&args.corpus, "corpus", name)?, &merged)?;
            let stats = match &args.index {
                Some(path) => {
                    require(&[path])?;
                    SkillStats::load(path)?
                }
                None => SkillStats::build(&merged)?,
            };
            let docs: Vec<(String, TfidfVector)> = corpus
                .into_iter()
                .filter_map(|d| d.counts.map(|c| (d.id, stats.vector(&c))))
                .filter(|(_, v)| v.is_rankable())
                .collect();
            let queries = query_skills(vocab, qp)?;
            let unrankable = queries.iter().filter(|(_, c)| !stats.vector(c).is_rankable()).count();
            if unrankable > 0 {
                p.line(format!("warning: {unrankable} queries have no rankable skills"));
            }
            queries.iter().map(|(q, c)| stats.rank(q, c, &docs, args.k)).collect()
        }
        Method::Doc2vec => {
            let aux = AuxModel::load(need(&args.aux_model, "aux-model", name)?)?;
            let vocab = need(&args.vocab, "vocab", name)?;
            let qp = need(&args.query_postings, "query-postings", name)?;
            let merged: Vec<MergedRecord> = read_jsonl(need(&args.merged, "merged", name)?)?;
            let corpus = corpus_skills(need(&args.corpus, "corpus", name)?, &merged)?;
            doc2vec_rank(&aux, &corpus, &query_skills(vocab, qp)?, args, p)?
        }
    };
    let run = Run {
        tag: args.tag.clone().unwrap_or_else(|| format!("skillsim-{name}")),
        lists,
    };
    write_run(&args.out, &run)?;
    p.line(format!("{} queries ranked with {name}", run.lists.len()));
    Ok(())
}

fn doc2vec_rank(
    aux: &AuxModel,
    corpus: &[CorpusDoc],
    queries: &[(String, BTreeMap<String, u32>)],
    args: &RankArgs,
    p: Progress,
) -> Result<Vec<RankedList>> {
    let config = AuxConfig {
        dim: aux.dim(),
        epochs: args.infer_epochs,
        seed: args.seed,
        ..AuxConfig::default()
    };
    let infer = |c: &BTreeMap<String, u32>| match aux.infer_doc_vector(c, &config) {
        Ok(v) => Ok(Some(v)),
        Err(Error::NoKnownSkills) => Ok(None),
        Err(e) => Err(e),
    };
    // Titles seen in training keep their trained vector; others are inferred.
    let mut docs = Vec::new();
    for d in corpus {
        let Some(counts) = &d.counts else { continue };
        let v = match aux.doc_vector(&d.title_key) {
            Some(v) => Some(v.to_vec()),
            None => infer(counts)?,
        };
        if let Some(v) = v {
            docs.push((d.id.clone(), v));
        }
    }
    let mut lists = Vec::with_capacity(queries.len());
    let mut unrankable = 0;
    for (qid, counts) in queries {
        let items = match infer(counts)? {
            Some(q) => docs
                .iter()
                .filter_map(|(id, v)| cosine_similarity(&q, v).ok().map(|s| (id.clone(), s)))
                .collect(),
            None => {
                unrankable += 1;
                Vec::new()
            }
        };
        lists.push(RankedList::from_scores(qid.clone(), items, args.k));
    }
    if unrankable > 0 {
        p.line(format!("warning: {unrankable} queries have no known skills"));
    }
    Ok(lists)
}

fn normalize(model: &Path, titles: &Path, input: &Path, out: &Path, k: usize, tag: &str, p: Progress) -> Result<()> {
    require(&[model, titles, input])?;
    let m = EncoderModel::load(model)?;
    let normalizer = Normalizer::new(&m, &read_id_text_tsv(titles)?)?;
    let raw = read_id_text_tsv(input)?;
    let mut lists = Vec::with_capacity(raw.len());
    for (id, t) in &raw {
        let mut list = match normalizer.normalize(t, Some(k)) {
            Ok(l) => l,
            Err(Error::EmptyTitle) => RankedList {
                query_id: String::new(),
                items: Vec::new(),
            },
            Err(e) => return Err(e),
        };
        list.query_id = id.clone();
        lists.push(list);
    }
    write_run(
        out,
        &Run {
            tag: tag.to_string(),
            lists,
        },
    )?;
    p.line(format!(
        "{} titles normalized against {} entries",
        raw.len(),
        normalizer.index().len()
    ));
    Ok(())
}

#[derive(Serialize)]
struct Prediction<'a> {
    id: &'a str,
    skills: Vec<ScoredSkill>,
}

#[derive(Serialize)]
struct ScoredSkill {
    skill: String,
    score: f64,
}

fn predict(model: &Path, aux_model: &Path, input: &Path, out: &Path, n: usize, p: Progress) -> Result<()> {
    require(&[model, aux_model, input])?;
    if n == 0 {
        return Err(Error::Config("--n must be positive".into()));
    }
    let m = EncoderModel::load(model)?;
    let aux = AuxModel::load(aux_model)?;
    let titles = read_id_text_tsv(input)?;
    let mut rows = Vec::with_capacity(titles.len());
    for (id, t) in &titles {
        let skills = match predict_skills(&m, &aux, t, n) {
            Ok(s) => s,
            Err(Error::EmptyTitle) => Vec::new(),
            Err(e) => return Err(e),
        };
        rows.push(Prediction {
            id,
            skills: skills
                .into_iter()
                .map(|(skill, score)| ScoredSkill { skill, score })
                .collect(),
        });
    }
    write_jsonl(out, &rows)?;
    p.line(format!("{} titles", rows.len()));
    Ok(())
}

pub(super) fn evaluate(run: &Path, qrels: &Path, out: &Path, p: Progress) -> Result<MetricsReport> {
    require(&[run, qrels])?;
    let report = evaluate_run(&read_run(run)?, &read_qrels(qrels)?)?;
    let json = serde_json::to_string_pretty(&report).expect("serializable report");
    write_text(out, &(json + "\n"))?;
    for line in report.to_text().lines() {
        p.line(line);
    }
    if !report.excluded.is_empty() {
        p.line(format!(
            "{} queries without relevant documents excluded",
            report.excluded.len()
        ));
    }
    Ok(report)
}
