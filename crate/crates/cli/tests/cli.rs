//! End-to-end tests of the `sqlsim` binary: exit codes, output formats, and
//! the build-corpus -> evaluate -> select pipeline.

use std::path::PathBuf;
use std::process::{Command, Output};

fn sqlsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sqlsim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/fixtures")
        .join(name)
        .display()
        .to_string()
}

fn temp_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join("sqlsim_cli_tests").join(name);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).to_string()
}

#[test]
fn skeleton_prints_canonical_form() {
    let out = sqlsim(&["skeleton", "--sql", "SELECT a FROM t"]);
    assert!(out.status.success());
    assert_eq!(stdout_of(&out).trim(), "SELECT-STMT(SELECT(COL),FROM(TAB))");
}

#[test]
fn skeleton_parse_error_exits_2() {
    let out = sqlsim(&["skeleton", "--sql", "SELECT FROM"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("parse error"));
    assert!(out.stdout.is_empty());
}

#[test]
fn unknown_flag_exits_2() {
    let out = sqlsim(&["skeleton", "--nope"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_file_exits_1() {
    let out = sqlsim(&["skeleton", "--file", "/definitely/not/here.sql"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn distance_between_two_queries() {
    let out = sqlsim(&[
        "distance",
        "--sql-a",
        "SELECT a FROM t",
        "--sql-b",
        "SELECT a FROM t WHERE b = 1",
    ]);
    assert!(out.status.success());
    assert_eq!(stdout_of(&out).trim(), "4");
}

#[test]
fn distance_pool_matrix() {
    let dir = temp_dir("distance_pool");
    let pool = dir.join("pool.jsonl");
    std::fs::write(
        &pool,
        "{\"sql\": \"SELECT a FROM t\"}\n\
         {\"sql\": \"SELECT b FROM u\"}\n\
         {\"sql\": \"SELECT COUNT(*) FROM t WHERE x > 1\"}\n",
    )
    .unwrap();
    let out = sqlsim(&["distance", "--pool", &pool.display().to_string()]);
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_str(stdout_of(&out).trim()).unwrap();
    assert_eq!(doc["n"], 3);
    let matrix = doc["similarity"].as_array().unwrap();
    assert_eq!(matrix.len(), 3);
    assert_eq!(matrix[0][0], 1.0);
    assert_eq!(matrix[0][1], 1.0); // identical skeletons
    assert_eq!(matrix[0][1], matrix[1][0]);
}

#[test]
fn score_pairs_writes_all_unordered_pairs() {
    let dir = temp_dir("score_pairs");
    let out_path = dir.join("scores.jsonl");
    let out = sqlsim(&[
        "score-pairs",
        "--dataset",
        &fixture("dataset_6.json"),
        "--tables",
        &fixture("tables.json"),
        "--db",
        "concert_singer",
        "--out",
        &out_path.display().to_string(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let lines = std::fs::read_to_string(&out_path).unwrap();
    assert_eq!(lines.lines().count(), 15); // C(6,2)
    assert!(dir.join("scores.jsonl.meta.json").exists());
}

#[test]
fn corpus_evaluate_select_pipeline() {
    let dir = temp_dir("pipeline");
    let corpus_path = dir.join("corpus.jsonl");

    let out = sqlsim(&[
        "build-corpus",
        "--data",
        &fixture("dataset_6.json"),
        "--tables",
        &fixture("tables.json"),
        "--k",
        "20",
        "--seed",
        "42",
        "--out",
        &corpus_path.display().to_string(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(stdout_of(&out).trim()).unwrap();
    assert_eq!(report["total_records"], 30);
    let corpus_text = std::fs::read_to_string(&corpus_path).unwrap();
    assert_eq!(corpus_text.lines().count(), 30);
    assert!(dir.join("corpus.jsonl.meta.json").exists());

    // identical seed, identical bytes, regardless of worker count
    let again = dir.join("corpus_again.jsonl");
    let out = sqlsim(&[
        "build-corpus",
        "--data",
        &fixture("dataset_6.json"),
        "--tables",
        &fixture("tables.json"),
        "--k",
        "20",
        "--seed",
        "42",
        "--jobs",
        "3",
        "--out",
        &again.display().to_string(),
    ]);
    assert!(out.status.success());
    assert_eq!(
        std::fs::read(&corpus_path).unwrap(),
        std::fs::read(&again).unwrap()
    );

    // predictions = oracle labels -> perfect report
    let pred_path = dir.join("pred.jsonl");
    let mut preds = String::new();
    for line in corpus_text.lines() {
        let r: serde_json::Value = serde_json::from_str(line).unwrap();
        preds.push_str(&format!(
            "{{\"anchor_id\": {}, \"candidate_id\": {}, \"score\": {}}}\n",
            r["anchor_id"], r["candidate_id"], r["label"]
        ));
    }
    std::fs::write(&pred_path, preds).unwrap();

    let report_path = dir.join("report.json");
    let out = sqlsim(&[
        "evaluate",
        "--oracle",
        &corpus_path.display().to_string(),
        "--pred",
        &pred_path.display().to_string(),
        "--ks",
        "1,5",
        "--report",
        &report_path.display().to_string(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(report["mean_tau"], 1.0);
    assert_eq!(report["mae"], 0.0);
    assert_eq!(report["config"]["ks"], serde_json::json!([1, 5]));

    // select against the same fixture with the oracle scorer
    let out = sqlsim(&[
        "select",
        "--data",
        &fixture("dataset_6.json"),
        "--tables",
        &fixture("tables.json"),
        "--db",
        "concert_singer",
        "--question",
        "How many concerts are there?",
        "--sql",
        "SELECT COUNT(*) FROM concert",
        "--scorer",
        "oracle",
        "--k",
        "2",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: serde_json::Value = serde_json::from_str(stdout_of(&out).trim()).unwrap();
    let selected = doc["selected"].as_array().unwrap();
    assert_eq!(selected.len(), 2);
    assert_eq!(selected[0]["id"], 2); // the identical example wins
    assert_eq!(selected[0]["score"], 1.0);
}

#[test]
fn select_emit_prompt_matches_golden() {
    let out = sqlsim(&[
        "select",
        "--data",
        &fixture("pool3.json"),
        "--tables",
        &fixture("tables.json"),
        "--db",
        "concert_singer",
        "--question",
        "How many concerts are there?",
        "--sql",
        "SELECT COUNT(*) FROM concert",
        "--scorer",
        "oracle",
        "--k",
        "1",
        "--emit-prompt",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let golden = std::fs::read_to_string(
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/prompt_golden.txt"),
    )
    .unwrap();
    assert_eq!(stdout_of(&out), golden);
}

#[test]
fn select_with_external_scores_file() {
    let dir = temp_dir("external_scores");
    let scores = dir.join("scores.jsonl");
    std::fs::write(
        &scores,
        "{\"candidate_id\": 0, \"score\": 0.2}\n\
         {\"candidate_id\": 1, \"score\": 0.9}\n\
         {\"candidate_id\": 2, \"score\": 0.4}\n\
         {\"candidate_id\": 3, \"score\": 0.9}\n\
         {\"candidate_id\": 4, \"score\": 0.1}\n\
         {\"candidate_id\": 5, \"score\": 0.5}\n",
    )
    .unwrap();
    let out = sqlsim(&[
        "select",
        "--data",
        &fixture("dataset_6.json"),
        "--tables",
        &fixture("tables.json"),
        "--db",
        "concert_singer",
        "--question",
        "whatever the predictor was asked",
        "--scorer",
        "file",
        "--scores",
        &scores.display().to_string(),
        "--k",
        "3",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: serde_json::Value = serde_json::from_str(stdout_of(&out).trim()).unwrap();
    let ids: Vec<u64> = doc["selected"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["id"].as_u64().unwrap())
        .collect();
    // 0.9 tie between ids 1 and 3 breaks by ascending id
    assert_eq!(ids, vec![1, 3, 5]);
}

#[test]
fn select_without_sql_for_oracle_fails_usefully() {
    let out = sqlsim(&[
        "select",
        "--data",
        &fixture("dataset_6.json"),
        "--tables",
        &fixture("tables.json"),
        "--db",
        "concert_singer",
        "--question",
        "anything",
        "--scorer",
        "oracle",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unavailable"));
}

#[test]
fn build_corpus_holdout_split() {
    let dir = temp_dir("holdout");
    let out_path = dir.join("corpus.jsonl");
    let out = sqlsim(&[
        "build-corpus",
        "--data",
        &fixture("dataset_6.json"),
        "--tables",
        &fixture("tables.json"),
        "--seed",
        "1",
        "--holdout",
        "5",
        "--out",
        &out_path.display().to_string(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let main_lines = std::fs::read_to_string(&out_path).unwrap().lines().count();
    let holdout_lines = std::fs::read_to_string(dir.join("corpus.jsonl.holdout.jsonl"))
        .unwrap()
        .lines()
        .count();
    assert_eq!(main_lines, 25);
    assert_eq!(holdout_lines, 5);
}

#[test]
fn build_corpus_skip_policy_drops_bad_examples() {
    let dir = temp_dir("skip_policy");
    let data = dir.join("data.json");
    std::fs::write(
        &data,
        r#"[
            {"question": "good one", "query": "SELECT name FROM singer", "db_id": "concert_singer"},
            {"question": "broken sql", "query": "SELEC name FROM singer", "db_id": "concert_singer"},
            {"question": "bad column", "query": "SELECT ghost FROM singer", "db_id": "concert_singer"},
            {"question": "also good", "query": "SELECT age FROM singer", "db_id": "concert_singer"},
            {"question": "third good", "query": "SELECT COUNT(*) FROM concert", "db_id": "concert_singer"}
        ]"#,
    )
    .unwrap();
    let out_path = dir.join("corpus.jsonl");

    // strict mode fails on the first bad example
    let strict = sqlsim(&[
        "build-corpus",
        "--data",
        &data.display().to_string(),
        "--tables",
        &fixture("tables.json"),
        "--seed",
        "1",
        "--out",
        &out_path.display().to_string(),
    ]);
    assert_eq!(strict.status.code(), Some(2), "parse errors map to exit 2");

    // skip mode drops the two bad examples: 3 usable -> 3 * 2 = 6 records
    let skip = sqlsim(&[
        "build-corpus",
        "--data",
        &data.display().to_string(),
        "--tables",
        &fixture("tables.json"),
        "--seed",
        "1",
        "--on-error",
        "skip",
        "--out",
        &out_path.display().to_string(),
    ]);
    assert!(skip.status.success(), "{}", String::from_utf8_lossy(&skip.stderr));
    assert_eq!(
        std::fs::read_to_string(&out_path).unwrap().lines().count(),
        6
    );
    let report: serde_json::Value = serde_json::from_str(stdout_of(&skip).trim()).unwrap();
    assert_eq!(report["per_db"]["concert_singer"]["usable"], 3);
    assert_eq!(
        report["per_db"]["concert_singer"]["skipped"]
            .as_array()
            .unwrap()
            .len(),
        2
    );
}

#[test]
fn distance_pool_with_bad_sql_exits_2() {
    let dir = temp_dir("bad_pool");
    let pool = dir.join("pool.jsonl");
    std::fs::write(&pool, "{\"sql\": \"SELECT a FROM t\"}\n{\"sql\": \"SELEC nope\"}\n").unwrap();
    let out = sqlsim(&["distance", "--pool", &pool.display().to_string()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("parse error"));
}

#[test]
fn multi_database_corpus_never_crosses_databases() {
    let dir = temp_dir("multi_db");
    let out_path = dir.join("corpus.jsonl");
    let out = sqlsim(&[
        "build-corpus",
        "--data",
        &fixture("dataset_multi.json"),
        "--tables",
        &fixture("tables.json"),
        "--seed",
        "5",
        "--out",
        &out_path.display().to_string(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    // 3 concert_singer examples (3*2=6) + 4 pets examples (4*3=12)
    let text = std::fs::read_to_string(&out_path).unwrap();
    assert_eq!(text.lines().count(), 18);
    let ds: Vec<serde_json::Value> = text
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    let ids_by_db = |db: &str| -> Vec<u64> {
        ds.iter()
            .filter(|r| r["db_id"] == db)
            .flat_map(|r| {
                [
                    r["anchor_id"].as_u64().unwrap(),
                    r["candidate_id"].as_u64().unwrap(),
                ]
            })
            .collect()
    };
    // concert_singer examples are ids 0..3, pets are 3..7
    assert!(ids_by_db("concert_singer").iter().all(|id| *id < 3));
    assert!(ids_by_db("pets").iter().all(|id| *id >= 3));
}
