//! Acceptance suite: one test per criterion, each printing a PASS line.
//!
//! Run with `cargo test -p sqlsim-core --test acceptance -- --nocapture`
//! to see the per-criterion lines.

mod common;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use common::{fixture_path, pick, random_link_set, random_tree, rng, QueryTemplate};

use sqlsim_core::corpus::{
    emit_corpus, generate_pairs, load_dataset, read_corpus, CorpusMeta, GeneratePairsOptions,
};
use sqlsim_core::embedding::EmbeddingSet;
use sqlsim_core::evalrank::{evaluate, kendall_tau, mean_absolute_error, sigmoid, PredictionSet};
use sqlsim_core::schema::{jaccard_similarity, SchemaLinkSet};
use sqlsim_core::similarity::{score_pool, ScoreOptions};
use sqlsim_core::skeleton::build_skeleton;
use sqlsim_core::sql::parse_sql;
use sqlsim_core::ted::{
    normalize_distances, ted_bruteforce, tree_edit_distance, EditDistance, PostorderTree,
};

const ALPHABET: &[&str] = &["A", "B", "C", "D"];

#[test]
fn criterion_01_ted_oracle_equivalence() {
    let start = Instant::now();
    let mut r = rng(101);
    for i in 0..200 {
        let t1 = PostorderTree::from_node(&random_tree(&mut r, 7, ALPHABET));
        let t2 = PostorderTree::from_node(&random_tree(&mut r, 7, ALPHABET));
        let fast = tree_edit_distance(&t1, &t2).unwrap();
        let slow = ted_bruteforce(&t1, &t2).unwrap();
        assert_eq!(fast, slow, "pair {i}: zs={fast} brute={slow}");
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}");
    println!(
        "ACCEPTANCE 1 PASS: tree_edit_distance == ted_bruteforce on 200 random pairs in {elapsed:?}"
    );
}

#[test]
fn criterion_02_ted_metric_axioms() {
    let mut r = rng(102);
    for i in 0..500 {
        let a = random_tree(&mut r, 8, ALPHABET);
        let b = random_tree(&mut r, 8, ALPHABET);
        let c = random_tree(&mut r, 8, ALPHABET);
        let (pa, pb, pc) = (
            PostorderTree::from_node(&a),
            PostorderTree::from_node(&b),
            PostorderTree::from_node(&c),
        );
        let d = |x: &PostorderTree, y: &PostorderTree| tree_edit_distance(x, y).unwrap().0;

        let dab = d(&pa, &pb);
        let dba = d(&pb, &pa);
        let dac = d(&pa, &pc);
        let dbc = d(&pb, &pc);
        assert_eq!(dab, dba, "triple {i}: symmetry");
        assert_eq!(d(&pa, &pa), 0, "triple {i}: identity");
        assert_eq!(dab == 0, a == b, "triple {i}: zero iff label-isomorphic");
        assert!(dac <= dab + dbc, "triple {i}: triangle {dac} > {dab}+{dbc}");
    }
    println!("ACCEPTANCE 2 PASS: metric axioms hold on 500 random triples (exact integers)");
}

#[test]
fn criterion_03_masking_invariance() {
    let mut r = rng(103);
    let mut distances = Vec::new();
    let mut within_pair_indices = Vec::new();
    let mut previous: Option<PostorderTree> = None;

    for i in 0..100 {
        let template = QueryTemplate::random(&mut r);
        let q1 = template.instantiate(&mut r);
        let q2 = template.instantiate(&mut r);
        let s1 = build_skeleton(&parse_sql(&q1).unwrap());
        let s2 = build_skeleton(&parse_sql(&q2).unwrap());
        assert_eq!(s1, s2, "pair {i}: skeletons differ\n  {q1}\n  {q2}");

        let p1 = PostorderTree::from(&s1);
        let p2 = PostorderTree::from(&s2);
        within_pair_indices.push(distances.len());
        distances.push(tree_edit_distance(&p1, &p2).unwrap());
        // cross-template distances give the pool a non-trivial maximum
        if let Some(prev) = &previous {
            distances.push(tree_edit_distance(prev, &p1).unwrap());
        }
        previous = Some(p1);
    }

    let sims = normalize_distances(&distances);
    for &idx in &within_pair_indices {
        assert_eq!(sims[idx], 1.0, "pool-normalized similarity must be exactly 1.0");
    }
    println!(
        "ACCEPTANCE 3 PASS: 100 identifier/literal-renamed pairs are label-identical with \
         pool-normalized similarity exactly 1.0"
    );
}

#[test]
fn criterion_04_jaccard_oracle_and_metric() {
    fn oracle(a: &SchemaLinkSet, b: &SchemaLinkSet) -> f64 {
        let ua: Vec<&str> = a.combined().into_iter().collect();
        let ub: Vec<&str> = b.combined().into_iter().collect();
        if ua.is_empty() && ub.is_empty() {
            return 1.0;
        }
        let mut inter = 0usize;
        for x in &ua {
            if ub.contains(x) {
                inter += 1;
            }
        }
        inter as f64 / (ua.len() + ub.len() - inter) as f64
    }

    let mut r = rng(104);
    for i in 0..500 {
        let a = random_link_set(&mut r);
        let b = random_link_set(&mut r);
        assert_eq!(
            jaccard_similarity(&a, &b).to_bits(),
            oracle(&a, &b).to_bits(),
            "pair {i}"
        );
        let c = random_link_set(&mut r);
        let d = |x: &SchemaLinkSet, y: &SchemaLinkSet| 1.0 - jaccard_similarity(x, y);
        assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-12, "triple {i}");
    }

    let set = |items: &[&str]| -> std::collections::BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    };
    let a = SchemaLinkSet {
        tables: set(&["t"]),
        columns: set(&["t.a"]),
    };
    let b = SchemaLinkSet {
        tables: set(&["t"]),
        columns: set(&["t.b"]),
    };
    assert!((jaccard_similarity(&a, &b) - 1.0 / 3.0).abs() < 1e-12);
    println!(
        "ACCEPTANCE 4 PASS: Jaccard matches the enumeration oracle on 500 pairs, 1-J obeys the \
         triangle inequality, and the {{t,t.a}} vs {{t,t.b}} fixture is 1/3"
    );
}

#[test]
fn criterion_05_normalization_rule() {
    let mut r = rng(105);
    for _ in 0..200 {
        let n = 1 + pick(&mut r, 15);
        let distances: Vec<EditDistance> =
            (0..n).map(|_| EditDistance(pick(&mut r, 7))).collect();
        let sims = normalize_distances(&distances);
        assert!(sims.iter().all(|s| (0.0..=1.0).contains(s)));
        let d_max = distances.iter().map(|d| d.0).max().unwrap();
        if d_max > 0 {
            assert_eq!(
                sims.iter().cloned().fold(f64::INFINITY, f64::min),
                0.0,
                "minimum normalized similarity must be 0 when d_max > 0"
            );
        }
        for (d, s) in distances.iter().zip(&sims) {
            if d.0 == 0 {
                assert_eq!(*s, 1.0, "identical skeletons must score exactly 1.0");
            }
        }
    }
    println!(
        "ACCEPTANCE 5 PASS: 1 - d/d_max normalization bounded in [0,1], min 0 when d_max > 0, \
         identical pairs exactly 1.0"
    );
}

#[test]
fn criterion_06_mean_label_on_fixture() {
    let ds = load_dataset(&fixture_path("pool3.json"), &fixture_path("tables.json")).unwrap();
    let emb = EmbeddingSet::from_jsonl(&fixture_path("pool3_embeddings.jsonl")).unwrap();
    let scores = score_pool(
        &ds.examples,
        &ds.catalogs["concert_singer"],
        &emb,
        &ScoreOptions::default(),
    )
    .unwrap();

    let golden: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(fixture_path("pool3_labels.json")).unwrap())
            .unwrap();
    for pair in golden["pairs"].as_array().unwrap() {
        let a = pair["a"].as_u64().unwrap() as u32;
        let b = pair["b"].as_u64().unwrap() as u32;
        let label = scores.get(a, b).unwrap();
        for (field, actual) in [
            ("question_sim", label.question_sim),
            ("skeleton_sim", label.skeleton_sim),
            ("link_sim", label.link_sim),
        ] {
            assert!((0.0..=1.0).contains(&actual), "({a},{b}) {field} out of range");
            let expected = pair[field].as_f64().unwrap();
            assert!(
                (actual - expected).abs() < 1e-12,
                "({a},{b}) {field}: {actual} vs golden {expected}"
            );
        }
        let recomputed = (label.question_sim + label.skeleton_sim + label.link_sim) / 3.0;
        let diff_ulps = label.mean.to_bits().abs_diff(recomputed.to_bits());
        assert!(diff_ulps <= 1, "({a},{b}) mean differs by {diff_ulps} ulps");
    }
    println!(
        "ACCEPTANCE 6 PASS: fixture components match the golden table and every mean is the \
         arithmetic mean within 1 ulp"
    );
}

#[test]
fn criterion_07_pair_counts_and_byte_determinism() {
    let tables = fixture_path("tables.json");
    let emb = EmbeddingSet::hashed(64);

    let ds6 = load_dataset(&fixture_path("dataset_6.json"), &tables).unwrap();
    let opts = GeneratePairsOptions {
        seed: 7,
        ..Default::default()
    };
    let (records6, _) = generate_pairs(&ds6, &emb, &opts).unwrap();
    assert_eq!(records6.len(), 30, "6 examples, k=20: 6 * 5 = 30");

    let ds30 = load_dataset(&fixture_path("dataset_30.json"), &tables).unwrap();
    let (records30, _) = generate_pairs(&ds30, &emb, &opts).unwrap();
    assert_eq!(records30.len(), 600, "30 examples, k=20: 30 * 20 = 600");

    let dir = std::env::temp_dir().join("sqlsim_acceptance_c7");
    std::fs::create_dir_all(&dir).unwrap();
    let meta = CorpusMeta::new(&opts);
    let out_a = dir.join("run_a.jsonl");
    let out_b = dir.join("run_b.jsonl");
    let (again, _) = generate_pairs(&ds30, &emb, &opts).unwrap();
    emit_corpus(&records30, &out_a, &meta).unwrap();
    emit_corpus(&again, &out_b, &meta).unwrap();
    assert_eq!(
        std::fs::read(&out_a).unwrap(),
        std::fs::read(&out_b).unwrap(),
        "same seed must produce byte-identical corpora"
    );
    println!(
        "ACCEPTANCE 7 PASS: record counts 30 and 600 match the formula; byte-identical output \
         across two runs with the same seed"
    );
}

fn optional_dataset(
    name: &str,
    data_env: &str,
    tables_env: &str,
    default_data: &str,
    default_tables: &str,
) -> Option<(PathBuf, PathBuf)> {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..");
    let data = std::env::var(data_env)
        .map(PathBuf::from)
        .unwrap_or_else(|_| root.join(default_data));
    let tables = std::env::var(tables_env)
        .map(PathBuf::from)
        .unwrap_or_else(|_| root.join(default_tables));
    if data.exists() && tables.exists() {
        Some((data, tables))
    } else {
        println!(
            "ACCEPTANCE 8 SKIP ({name}): place the files at {} and {} or set {data_env}/{tables_env}",
            data.display(),
            tables.display()
        );
        None
    }
}

#[test]
fn criterion_08_published_dataset_loaders() {
    let mut checked = false;
    if let Some((data, tables)) = optional_dataset(
        "Spider",
        "SQLSIM_SPIDER_DATA",
        "SQLSIM_SPIDER_TABLES",
        "data/spider/dev.json",
        "data/spider/tables.json",
    ) {
        let ds = load_dataset(&data, &tables).unwrap();
        assert_eq!(ds.examples.len(), 1034, "Spider dev example count");
        println!("ACCEPTANCE 8 PASS (Spider): loaded 1,034 development examples");
        checked = true;
    }
    if let Some((data, tables)) = optional_dataset(
        "BIRD",
        "SQLSIM_BIRD_DATA",
        "SQLSIM_BIRD_TABLES",
        "data/bird/dev.json",
        "data/bird/dev_tables.json",
    ) {
        let ds = load_dataset(&data, &tables).unwrap();
        assert_eq!(ds.examples.len(), 1534, "BIRD dev example count");
        println!("ACCEPTANCE 8 PASS (BIRD): loaded 1,534 development examples");
        checked = true;
    }
    if !checked {
        println!(
            "ACCEPTANCE 8 PASS (vacuous): published dev sets not present; loader paths covered \
             by fixture tests"
        );
    }
}

#[test]
fn criterion_09_evaluation_identity_inversion_and_fixtures() {
    // hand-enumerated tau fixture: scores (1,2,3,4) vs (1,2,4,3)
    let tau = kendall_tau(&[1.0, 2.0, 3.0, 4.0], &[1.0, 2.0, 4.0, 3.0]).unwrap();
    assert!((tau - 0.6667).abs() < 1e-3);
    assert!((tau - 2.0 / 3.0).abs() < 1e-9);

    // MAE fixtures straight from the loss definition
    let reference: BTreeMap<(u32, u32), f64> = [((0, 1), 0.0), ((0, 2), 1.0)].into_iter().collect();
    let exact = PredictionSet::from_scores(reference.clone());
    assert_eq!(mean_absolute_error(&exact, &reference).unwrap(), 0.0);
    let halves =
        PredictionSet::from_scores([((0, 1), 0.5), ((0, 2), 0.5)].into_iter().collect());
    assert_eq!(mean_absolute_error(&halves, &reference).unwrap(), 0.5);
    assert_eq!(sigmoid(0.0), 0.5);

    // identity and inversion against a generated oracle corpus
    let ds = load_dataset(&fixture_path("dataset_6.json"), &fixture_path("tables.json")).unwrap();
    let (records, _) = generate_pairs(
        &ds,
        &EmbeddingSet::hashed(64),
        &GeneratePairsOptions {
            seed: 3,
            ..Default::default()
        },
    )
    .unwrap();

    let identity = PredictionSet::from_scores(
        records
            .iter()
            .map(|r| ((r.anchor_id, r.candidate_id), r.label))
            .collect(),
    );
    let report = evaluate(&identity, &records, &[1, 2, 3, 5]).unwrap();
    assert_eq!(report.mean_tau, Some(1.0), "identity tau");
    for (k, p) in &report.mean_precision {
        assert_eq!(*p, 1.0, "identity P@{k}");
    }
    assert_eq!(report.mae, 0.0);

    let inverted = PredictionSet::from_scores(
        records
            .iter()
            .map(|r| ((r.anchor_id, r.candidate_id), 1.0 - r.label))
            .collect(),
    );
    let inv_report = evaluate(&inverted, &records, &[1]).unwrap();
    // anchors whose labels contain ties cannot reach exactly -1; require it
    // only of the tie-free ones, which must exist in this fixture
    let mut saw_tie_free = false;
    for anchor in &inv_report.per_anchor {
        if let Some(t) = anchor.tau {
            let labels: Vec<f64> = records
                .iter()
                .filter(|r| r.anchor_id == anchor.anchor_id)
                .map(|r| r.label)
                .collect();
            let mut sorted = labels.clone();
            sorted.sort_by(f64::total_cmp);
            sorted.dedup();
            if sorted.len() == labels.len() {
                assert_eq!(t, -1.0, "anchor {} should invert fully", anchor.anchor_id);
                saw_tie_free = true;
            }
        }
    }
    assert!(saw_tie_free, "fixture must contain a tie-free anchor");
    println!(
        "ACCEPTANCE 9 PASS: identity evaluation scores tau=1.0 and P@k=1.0, tie-free inversions \
         score -1.0, tau fixture = 0.6667, MAE fixtures exact"
    );
}

#[test]
fn criterion_10_end_to_end_corpus_then_evaluate() {
    let start = Instant::now();

    // build-corpus on the fixture dataset with the fallback provider
    let ds = load_dataset(&fixture_path("dataset_30.json"), &fixture_path("tables.json")).unwrap();
    let opts = GeneratePairsOptions {
        seed: 11,
        ..Default::default()
    };
    let (records, report) = generate_pairs(&ds, &EmbeddingSet::hashed(256), &opts).unwrap();
    assert_eq!(report.total_records, 600);

    let dir = std::env::temp_dir().join("sqlsim_acceptance_c10");
    std::fs::create_dir_all(&dir).unwrap();
    let corpus_path = dir.join("corpus.jsonl");
    emit_corpus(&records, &corpus_path, &CorpusMeta::new(&opts)).unwrap();
    let corpus = read_corpus(&corpus_path).unwrap();

    // single-component scorers as predictors, mirroring the mean-vs-parts
    // comparison
    for (name, extract) in [
        ("skeleton-only", (|r| r.components.skeleton_sim) as fn(&sqlsim_core::corpus::PairRecord) -> f64),
        ("question-only", |r| r.components.question_sim),
        ("link-only", |r| r.components.link_sim),
    ] {
        let preds = PredictionSet::from_scores(
            corpus
                .iter()
                .map(|r| ((r.anchor_id, r.candidate_id), extract(r)))
                .collect(),
        );
        let report = evaluate(&preds, &corpus, &[1, 5, 10, 15, 20]).unwrap();
        assert!(report.n_anchors > 0);
        if let Some(tau) = report.mean_tau {
            assert!(tau.is_finite(), "{name}: tau must be finite");
        }
        assert!(report.mae.is_finite(), "{name}: MAE must be finite");
        for (k, p) in &report.mean_precision {
            assert!(p.is_finite(), "{name}: P@{k} must be finite");
        }
    }

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "took {elapsed:?}");
    println!(
        "ACCEPTANCE 10 PASS: build-corpus then single-metric evaluation end-to-end with finite \
         reports in {elapsed:?}"
    );
}
