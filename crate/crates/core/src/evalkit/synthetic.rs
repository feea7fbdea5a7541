//! Seeded synthetic benchmark: occupational clusters with synonym-style
//! title vocabularies and dedicated skill sets.
//!
//! Every title combines one of its cluster's core words with modifiers and
//! role nouns shared by all clusters, so lexical overlap is a weak signal
//! while skill overlap is a strong one.

use std::collections::{BTreeSet, HashSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{write_qrels, Qrels};
use crate::corpus::{normalize_title, write_skill_vocabulary, PostingRecord, SkillVocabulary};
use crate::error::{Error, Result};
use crate::io::{write_id_text_tsv, write_jsonl};

const MODIFIERS: [&str; 6] = ["senior", "junior", "lead", "chief", "assistant", "principal"];
const ROLES: [&str; 8] = [
    "engineer",
    "manager",
    "specialist",
    "officer",
    "analyst",
    "consultant",
    "technician",
    "coordinator",
];
const CORE_WORDS_PER_CLUSTER: usize = 6;
const MIN_MENTIONS: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticBenchConfig {
    pub n_clusters: usize,
    pub titles_per_cluster: usize,
    pub skills_per_cluster: usize,
    /// Probability that each own-skill mention is accompanied by a skill
    /// from another cluster.
    pub shared_skill_noise_rate: f64,
    pub filler_vocab_size: usize,
    pub seed: u64,
    pub postings_per_title: usize,
    pub queries_per_cluster: usize,
    /// Probability that a posting mentions each of its cluster's skills.
    pub mention_rate: f64,
}

impl Default for SyntheticBenchConfig {
    fn default() -> Self {
        SyntheticBenchConfig {
            n_clusters: 10,
            titles_per_cluster: 20,
            skills_per_cluster: 20,
            shared_skill_noise_rate: 0.1,
            filler_vocab_size: 200,
            seed: 42,
            postings_per_title: 1,
            queries_per_cluster: 5,
            mention_rate: 0.4,
        }
    }
}

impl SyntheticBenchConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("n_clusters", self.n_clusters),
            ("titles_per_cluster", self.titles_per_cluster),
            ("skills_per_cluster", self.skills_per_cluster),
            ("filler_vocab_size", self.filler_vocab_size),
            ("postings_per_title", self.postings_per_title),
            ("queries_per_cluster", self.queries_per_cluster),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        for (name, v) in [
            ("shared_skill_noise_rate", self.shared_skill_noise_rate),
            ("mention_rate", self.mention_rate),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must be in [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Ground truth for one corpus title or query.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldRecord {
    pub id: String,
    pub title: String,
    pub cluster: usize,
    /// The cluster's full skill set.
    pub skills: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticBench {
    pub vocabulary: SkillVocabulary,
    pub postings: Vec<PostingRecord>,
    /// `(doc id, title)` of every distinct corpus title.
    pub corpus: Vec<(String, String)>,
    pub queries: Vec<(String, String)>,
    /// One posting per query, id equal to the query id.
    pub query_postings: Vec<PostingRecord>,
    pub qrels: Qrels,
    pub gold: Vec<GoldRecord>,
}

pub const BENCH_FILES: [&str; 7] = [
    "skills.tsv",
    "postings.jsonl",
    "corpus.tsv",
    "queries.tsv",
    "query_postings.jsonl",
    "qrels.txt",
    "gold.jsonl",
];

impl SyntheticBench {
    /// Writes the files named in [`BENCH_FILES`] into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_skill_vocabulary(&dir.join("skills.tsv"), &self.vocabulary)?;
        write_jsonl(&dir.join("postings.jsonl"), &self.postings)?;
        write_id_text_tsv(&dir.join("corpus.tsv"), &self.corpus)?;
        write_id_text_tsv(&dir.join("queries.tsv"), &self.queries)?;
        write_jsonl(&dir.join("query_postings.jsonl"), &self.query_postings)?;
        write_qrels(&dir.join("qrels.txt"), &self.qrels)?;
        write_jsonl(&dir.join("gold.jsonl"), &self.gold)
    }
}

struct Words {
    rng: ChaCha8Rng,
    used: HashSet<String>,
}

impl Words {
    fn fresh(&mut self) -> String {
        const ONSETS: [&str; 16] = [
            "b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "tr",
        ];
        const VOWELS: [&str; 6] = ["a", "e", "i", "o", "u", "y"];
        const CODAS: [&str; 6] = ["", "", "n", "r", "l", "x"];
        loop {
            let syllables = self.rng.gen_range(2..=3);
            let mut w = String::new();
            for _ in 0..syllables {
                w.push_str(ONSETS.choose(&mut self.rng).unwrap());
                w.push_str(VOWELS.choose(&mut self.rng).unwrap());
            }
            w.push_str(CODAS.choose(&mut self.rng).unwrap());
            if self.used.insert(w.clone()) {
                return w;
            }
        }
    }
}

struct Cluster {
    skills: Vec<usize>,
    titles: Vec<String>,
    queries: Vec<String>,
}

fn title_case(text: &str) -> String {
    text.split(' ')
        .map(|w| {
            let mut c = w.chars();
            c.next()
                .map(|f| f.to_uppercase().chain(c).collect::<String>())
                .unwrap_or_default()
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Surface forms per skill: canonical first, then aliases.
type Surfaces = Vec<Vec<String>>;

fn description(
    rng: &mut ChaCha8Rng,
    config: &SyntheticBenchConfig,
    clusters: &[Cluster],
    cluster: usize,
    surfaces: &Surfaces,
    filler: &[String],
) -> String {
    let own = &clusters[cluster].skills;
    let mut mentions: Vec<usize> = own
        .iter()
        .copied()
        .filter(|_| rng.gen_bool(config.mention_rate))
        .collect();
    while mentions.len() < MIN_MENTIONS.min(own.len()) {
        let s = *own.choose(rng).unwrap();
        if !mentions.contains(&s) {
            mentions.push(s);
        }
    }
    let mut with_noise = Vec::with_capacity(mentions.len() * 2);
    for &s in &mentions {
        with_noise.push(s);
        if clusters.len() > 1 && rng.gen_bool(config.shared_skill_noise_rate) {
            let other = loop {
                let c = rng.gen_range(0..clusters.len());
                if c != cluster {
                    break c;
                }
            };
            with_noise.push(*clusters[other].skills.choose(rng).unwrap());
        }
    }
    with_noise.shuffle(rng);

    let mut sentences = Vec::new();
    for chunk in with_noise.chunks(2) {
        let mut words: Vec<String> = (0..rng.gen_range(3..7))
            .map(|_| filler.choose(rng).unwrap().clone())
            .collect();
        for &s in chunk {
            let form = surfaces[s].choose(rng).unwrap();
            let form = if rng.gen_bool(0.3) {
                title_case(form)
            } else {
                form.clone()
            };
            let at = rng.gen_range(0..=words.len());
            words.insert(at, format!("{form},"));
        }
        let mut sentence = words.join(" ");
        sentence = sentence.trim_end_matches(',').to_string();
        sentence.push('.');
        sentences.push(title_case_first(&sentence));
    }
    sentences.join(" ")
}

fn title_case_first(s: &str) -> String {
    let mut c = s.chars();
    c.next()
        .map(|f| f.to_uppercase().chain(c).collect())
        .unwrap_or_default()
}

pub fn generate_synthetic_benchmark(config: &SyntheticBenchConfig) -> Result<SyntheticBench> {
    config.validate()?;
    let mut words = Words {
        rng: ChaCha8Rng::seed_from_u64(config.seed),
        used: MODIFIERS.iter().chain(&ROLES).map(|w| w.to_string()).collect(),
    };

    let mut surfaces: Surfaces = Vec::new();
    let mut clusters = Vec::with_capacity(config.n_clusters);
    let per_cluster_titles = config.titles_per_cluster + config.queries_per_cluster;
    let combos_per_core = (MODIFIERS.len() + 1) * ROLES.len();
    let n_core = CORE_WORDS_PER_CLUSTER.max(per_cluster_titles.div_ceil(combos_per_core));
    for _ in 0..config.n_clusters {
        let mut skills = Vec::with_capacity(config.skills_per_cluster);
        for _ in 0..config.skills_per_cluster {
            let canonical = if words.rng.gen_bool(0.3) {
                format!("{} {}", words.fresh(), words.fresh())
            } else {
                words.fresh()
            };
            let mut forms = vec![canonical];
            if words.rng.gen_bool(0.3) {
                forms.push(words.fresh());
            }
            skills.push(surfaces.len());
            surfaces.push(forms);
        }
        let core: Vec<String> = (0..n_core).map(|_| words.fresh()).collect();
        let mut combos = Vec::with_capacity(n_core * combos_per_core);
        for c in &core {
            for m in std::iter::once(None).chain(MODIFIERS.iter().map(Some)) {
                for r in ROLES {
                    combos.push(match m {
                        Some(m) => format!("{m} {c} {r}"),
                        None => format!("{c} {r}"),
                    });
                }
            }
        }
        combos.shuffle(&mut words.rng);
        let queries = combos.split_off(config.titles_per_cluster);
        clusters.push(Cluster {
            skills,
            titles: combos,
            queries: queries.into_iter().take(config.queries_per_cluster).collect(),
        });
    }
    let filler: Vec<String> = (0..config.filler_vocab_size).map(|_| words.fresh()).collect();
    let mut rng = words.rng;

    let vocabulary = SkillVocabulary::from_entries(surfaces.iter().map(|f| (f[0].clone(), f[1..].to_vec())))?;
    let cluster_skills = |c: usize| -> Vec<String> {
        let set: BTreeSet<&str> = clusters[c].skills.iter().map(|&s| surfaces[s][0].as_str()).collect();
        set.into_iter().map(str::to_string).collect()
    };

    let mut titles: Vec<(usize, &str)> = clusters
        .iter()
        .enumerate()
        .flat_map(|(c, cl)| cl.titles.iter().map(move |t| (c, t.as_str())))
        .collect();
    titles.shuffle(&mut rng);
    let width = titles.len().to_string().len().max(4);

    let mut corpus = Vec::with_capacity(titles.len());
    let mut gold = Vec::with_capacity(titles.len());
    let mut postings = Vec::with_capacity(titles.len() * config.postings_per_title);
    for (i, &(c, title)) in titles.iter().enumerate() {
        let id = format!("d{i:0width$}");
        corpus.push((id.clone(), title.to_string()));
        gold.push(GoldRecord {
            id,
            title: title.to_string(),
            cluster: c,
            skills: cluster_skills(c),
        });
        for _ in 0..config.postings_per_title {
            let shown = if rng.gen_bool(0.5) {
                title_case(title)
            } else {
                title.to_string()
            };
            postings.push(PostingRecord {
                id: String::new(),
                title: shown,
                description: description(&mut rng, config, &clusters, c, &surfaces, &filler),
                lang: None,
            });
        }
    }
    postings.shuffle(&mut rng);
    let pwidth = postings.len().to_string().len().max(5);
    for (i, p) in postings.iter_mut().enumerate() {
        p.id = format!("p{i:0pwidth$}");
    }

    let mut queries = Vec::new();
    let mut query_postings = Vec::new();
    let mut qrels = Qrels::new();
    let qwidth = (config.n_clusters * config.queries_per_cluster)
        .to_string()
        .len()
        .max(3);
    let mut q = 0;
    for (c, cl) in clusters.iter().enumerate() {
        for title in &cl.queries {
            let id = format!("q{q:0qwidth$}");
            q += 1;
            queries.push((id.clone(), title_case(title)));
            query_postings.push(PostingRecord {
                id: id.clone(),
                title: title_case(title),
                description: description(&mut rng, config, &clusters, c, &surfaces, &filler),
                lang: None,
            });
            for (doc, gc) in corpus.iter().zip(&gold) {
                qrels.insert(&id, &doc.0, i32::from(gc.cluster == c))?;
            }
            gold.push(GoldRecord {
                id,
                title: normalize_title(title),
                cluster: c,
                skills: cluster_skills(c),
            });
        }
    }

    Ok(SyntheticBench {
        vocabulary,
        postings,
        corpus,
        queries,
        query_postings,
        qrels,
        gold,
    })
}
