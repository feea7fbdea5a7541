use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::corpus::{JobSkillRecord, MergedRecord};
use crate::encoder::{Architecture, EncoderConfig};
use crate::linalg::norm;

fn docs(items: &[(&str, &str)]) -> Vec<(String, String)> {
    items.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect()
}

#[test]
fn bm25_closed_form_fixture() {
    let idx = Bm25Index::build(
        &docs(&[("d1", "data scientist"), ("d2", "data engineer"), ("d3", "nurse")]),
        Bm25Params::default(),
    )
    .unwrap();
    let s = idx.score("data scientist", "d1").unwrap();
    assert!((s - 1.3411060256161413).abs() < 1e-12, "{s}");
    assert_eq!(idx.score("plumber welder", "d1").unwrap(), 0.0);
    assert!(matches!(idx.score("data", "d9"), Err(crate::Error::UnknownId(_))));
    let r = idx.rank("q", "data scientist", None);
    assert_eq!(r.doc_ids().collect::<Vec<_>>(), vec!["d1", "d2", "d3"]);
}

#[test]
fn bm25_counts() {
    let idx = Bm25Index::build(&docs(&[("a", "x"), ("b", "y"), ("c", "z")]), Bm25Params::default()).unwrap();
    assert_eq!(idx.num_docs(), 3);
    assert_eq!(idx.avgdl(), 1.0);

    let corpus = docs(&[
        ("1", "Software Engineer"),
        ("2", "engineer, civil"),
        ("3", "nurse"),
        ("4", "engineering manager"),
        ("5", "Engineer engineer"),
    ]);
    let idx = Bm25Index::build(&corpus, Bm25Params::default()).unwrap();
    assert_eq!(idx.df("engineer"), 3);
    assert_eq!(idx.doc_stats("5").unwrap().1["engineer"], 2);

    let idx = Bm25Index::build(&docs(&[("p", "chef cook"), ("q", "chef cook")]), Bm25Params::default()).unwrap();
    assert_eq!(idx.doc_stats("p"), idx.doc_stats("q"));
    let every = idx.idf("chef");
    assert!((every - (1.0 + 0.5 / 2.5f64).ln()).abs() < 1e-15 && every > 0.0);
}

#[test]
fn bm25_rejects_bad_input() {
    assert!(Bm25Index::build(&[], Bm25Params::default()).is_err());
    assert!(Bm25Index::build(&docs(&[("a", "x"), ("a", "y")]), Bm25Params::default()).is_err());
    assert!(Bm25Index::build(&docs(&[("a", "x")]), Bm25Params { k1: 1.2, b: 1.5 }).is_err());
}

#[test]
fn bm25_file_round_trip() {
    let idx = Bm25Index::build(
        &docs(&[("d1", "data scientist"), ("d2", "data engineer"), ("d3", "nurse")]),
        Bm25Params { k1: 0.9, b: 0.4 },
    )
    .unwrap();
    let bytes = idx.to_bytes();
    assert_eq!(Bm25Index::from_bytes(&bytes).unwrap(), idx);
    assert!(Bm25Index::from_bytes(&bytes[..bytes.len() - 1]).is_err());
}

proptest! {
    #[test]
    fn bm25_monotone_in_tf(
        tf in 0.0f64..50.0,
        n in 1u32..1000,
        df_frac in 0.0f64..=1.0,
        dl in 1.0f64..40.0,
        avgdl in 0.5f64..20.0,
        k1 in 0.0f64..3.0,
        b in 0.0f64..=1.0,
    ) {
        let df = (1.0 + df_frac * (n - 1) as f64).floor();
        let idf = (1.0 + (n as f64 - df + 0.5) / (df + 0.5)).ln();
        let p = Bm25Params { k1, b };
        let lo = bm25_term_score(idf, tf, dl, avgdl, p);
        let hi = bm25_term_score(idf, tf + 1.0, dl, avgdl, p);
        prop_assert!(lo >= 0.0);
        prop_assert!(hi >= lo, "tf {tf}: {lo} > {hi}");
    }
}

fn merged(items: &[&[(&str, u32)]]) -> Vec<MergedRecord> {
    items
        .iter()
        .enumerate()
        .map(|(i, skills)| MergedRecord {
            title_key: format!("t{i}"),
            skill_counts: skills.iter().map(|(s, c)| (s.to_string(), *c)).collect(),
            support: 1,
        })
        .collect()
}

fn counts(items: &[(&str, u32)]) -> BTreeMap<String, u32> {
    items.iter().map(|(s, c)| (s.to_string(), *c)).collect()
}

#[test]
fn tfidf_components() {
    let stats = SkillStats::build(&merged(&[&[("a", 1), ("b", 1)], &[("b", 3)], &[("b", 1)], &[("b", 2)]])).unwrap();
    assert_eq!(stats.num_titles(), 4);
    assert_eq!(stats.df("a"), Some(1));
    let v = stats.vector(&counts(&[("a", 2), ("b", 5), ("zzz", 9)]));
    assert_eq!(v.entries.len(), 1);
    assert!((v.entries[0].1 - 2.772588722239781).abs() < 1e-12);

    let only_common = stats.vector(&counts(&[("b", 3)]));
    assert!(!only_common.is_rankable());
    assert!(!stats.vector(&counts(&[("zzz", 1)])).is_rankable());
}

#[test]
fn tfidf_cosine_identity_and_scale_invariance() {
    let stats = SkillStats::build(&merged(&[
        &[("a", 1), ("b", 2)],
        &[("b", 1), ("c", 1)],
        &[("c", 4), ("d", 1)],
        &[("d", 1)],
        &[("e", 1), ("a", 3)],
    ]))
    .unwrap();
    let q = counts(&[("a", 2), ("c", 1), ("d", 1)]);
    let v = stats.vector(&q);
    assert!((v.cosine(&v).unwrap() - 1.0).abs() < 1e-12);

    let corpus: Vec<(String, BTreeMap<String, u32>)> = vec![
        ("x".into(), counts(&[("a", 1), ("b", 1)])),
        ("y".into(), counts(&[("c", 2), ("d", 1)])),
        ("z".into(), counts(&[("e", 1)])),
        ("w".into(), counts(&[("a", 1), ("d", 3)])),
    ];
    let ranked = |scale: u32| {
        let docs: Vec<(String, TfidfVector)> = corpus
            .iter()
            .map(|(id, c)| {
                let scaled = c.iter().map(|(s, n)| (s.clone(), n * scale)).collect();
                (id.clone(), stats.vector(&scaled))
            })
            .collect();
        let q: BTreeMap<String, u32> = q.iter().map(|(s, n)| (s.clone(), n * scale)).collect();
        stats
            .rank("q", &q, &docs, None)
            .doc_ids()
            .map(str::to_string)
            .collect::<Vec<_>>()
    };
    assert_eq!(ranked(1), ranked(7));
}

#[test]
fn skill_stats_round_trip() {
    let stats = SkillStats::build(&merged(&[&[("a", 1)], &[("a", 2), ("b", 1)]])).unwrap();
    assert_eq!(SkillStats::from_bytes(&stats.to_bytes()).unwrap(), stats);
}

fn raw(items: &[(&str, &[&str])]) -> Vec<JobSkillRecord> {
    items
        .iter()
        .map(|(t, skills)| JobSkillRecord {
            title_key: t.to_string(),
            title: t.to_string(),
            skills: skills.iter().map(|s| s.to_string()).collect::<BTreeSet<_>>(),
        })
        .collect()
}

fn ns_config(arch: Architecture, k: usize, epochs: usize) -> NegSampConfig {
    NegSampConfig {
        encoder: EncoderConfig {
            arch,
            token_dim: 4,
            hidden_dim: 3,
            output_dim: 5,
            epochs,
            batch_size: 2,
            initial_lr: 0.5,
            final_lr: 0.0,
            seed: 6,
            vocab_size: 300,
        },
        negatives_k: k,
        ..NegSampConfig::default()
    }
}

fn rel_err(a: &[f64], n: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(n).map(|(x, y)| x - y).collect();
    norm(&d) / norm(a).max(norm(n)).max(1e-12)
}

#[test]
fn bce_gradient_matches_differences() {
    let data = raw(&[("nurse", &["care", "triage"]), ("chef", &["cooking", "menus", "care"])]);
    let skills = ["care", "cooking", "menus", "triage"];
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for point in 0..100 {
        let arch = if point % 2 == 0 {
            Architecture::BiLstm
        } else {
            Architecture::BagOfSubwords
        };
        let mut cfg = ns_config(arch, 2, 0);
        cfg.encoder.seed = point;
        let mut m = train_negative_sampling(&data, &cfg).unwrap();
        for s in skills {
            m.skill_vector_mut(s)
                .unwrap()
                .iter_mut()
                .for_each(|v| *v = rng.gen_range(-1.0..1.0));
        }
        let ids: Vec<u32> = (0..rng.gen_range(1..5)).map(|_| rng.gen_range(0..6)).collect();
        let pos = skills[rng.gen_range(0..4)];
        let negs: Vec<&str> = (0..rng.gen_range(0..4)).map(|_| skills[rng.gen_range(0..4)]).collect();
        let (_, grad, skill_grads) = m.bce_loss_gradient(&ids, pos, &negs).unwrap();

        let eps = 1e-5;
        let n_blocks = grad.blocks().len();
        for b in 0..n_blocks {
            let analytic = grad.blocks()[b].1.data.clone();
            let limit = if b == 0 { 6 * 4 } else { analytic.len() };
            let mut numeric = vec![0.0; analytic.len()];
            for (i, slot) in numeric.iter_mut().enumerate().take(limit) {
                let orig = m.encoder.params().blocks()[b].1.data[i];
                m.encoder.params_mut().blocks_mut()[b].1.data[i] = orig + eps;
                let up = m.bce_loss(&ids, pos, &negs).unwrap();
                m.encoder.params_mut().blocks_mut()[b].1.data[i] = orig - eps;
                let down = m.bce_loss(&ids, pos, &negs).unwrap();
                m.encoder.params_mut().blocks_mut()[b].1.data[i] = orig;
                *slot = (up - down) / (2.0 * eps);
            }
            let err = rel_err(&analytic, &numeric);
            assert!(err < 1e-4, "point {point} block {b}: {err}");
        }

        // skill vectors: one gradient per argument slot, so a skill listed
        // twice has its slots summed
        let mut names = vec![pos];
        names.extend(&negs);
        for s in skills {
            let mut analytic = vec![0.0; 5];
            for (n, g) in names.iter().zip(&skill_grads) {
                if *n == s {
                    analytic.iter_mut().zip(g).for_each(|(a, g)| *a += g);
                }
            }
            let mut numeric = vec![0.0; 5];
            for (i, slot) in numeric.iter_mut().enumerate() {
                let orig = m.skill_vector(s).unwrap()[i];
                m.skill_vector_mut(s).unwrap()[i] = orig + eps;
                let up = m.bce_loss(&ids, pos, &negs).unwrap();
                m.skill_vector_mut(s).unwrap()[i] = orig - eps;
                let down = m.bce_loss(&ids, pos, &negs).unwrap();
                m.skill_vector_mut(s).unwrap()[i] = orig;
                *slot = (up - down) / (2.0 * eps);
            }
            let err = rel_err(&analytic, &numeric);
            assert!(err < 1e-4, "point {point} skill {s}: {err}");
        }
    }
}

#[test]
fn single_positive_overfits_without_negatives() {
    for arch in [Architecture::BagOfSubwords, Architecture::BiLstm] {
        let data = raw(&[("welder", &["welding"])]);
        let m = train_negative_sampling(&data, &ns_config(arch, 0, 200)).unwrap();
        let p = m.probability("welder", "welding").unwrap();
        assert!(p > 0.99, "{arch:?}: {p}");
    }
}

#[test]
fn negative_sampling_is_deterministic_and_budgeted() {
    let data = raw(&[
        ("nurse", &["care", "triage"]),
        ("chef", &["cooking", "menus"]),
        ("sous chef", &["cooking", "menus", "care"]),
        ("data analyst", &["sql", "excel"]),
    ]);
    let mut cfg = ns_config(Architecture::BiLstm, 2, 3);
    let (a, report) = train_negative_sampling_with(&data, &cfg, &mut crate::encoder::NoObserver).unwrap();
    let b = train_negative_sampling(&data, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.encoder.to_bytes(), b.encoder.to_bytes());
    assert_eq!(report.steps, 3 * 5);

    cfg.steps_per_epoch = Some(7);
    let (_, report) = train_negative_sampling_with(&data, &cfg, &mut crate::encoder::NoObserver).unwrap();
    assert_eq!(report.steps, 21);
}

#[test]
fn negative_sampling_needs_skills() {
    let data = raw(&[("nurse", &[])]);
    assert!(train_negative_sampling(&data, &ns_config(Architecture::BagOfSubwords, 1, 1)).is_err());
}

#[test]
fn skill_vectors_round_trip() {
    let data = raw(&[("nurse", &["care", "triage"]), ("chef", &["cooking"])]);
    let m = train_negative_sampling(&data, &ns_config(Architecture::BagOfSubwords, 1, 2)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (e, s) = (dir.path().join("m.jstm"), dir.path().join("m.jsns"));
    m.encoder.save(&e).unwrap();
    m.save_skill_vectors(&s).unwrap();
    assert_eq!(NegSampModel::load(&e, &s).unwrap(), m);
}
