//! Dataset ingestion and training-corpus generation.
//!
//! Datasets are Spider/BIRD-style: a JSON array of examples carrying
//! `question`, `db_id`, and the gold SQL under `query`, `SQL`, or `sql`,
//! plus a `tables.json` with the schemas. For each example, `generate_pairs`
//! samples `min(k, n_db - 1)` other questions from the same database without
//! replacement, scores every pair with the mean-of-three label, and emits
//! one JSONL record per (anchor, candidate) with the serialized schema DDL
//! and both question texts.
//!
//! Sampling is reproducible across platforms: each anchor gets its own
//! ChaCha8 generator seeded with
//! `seed XOR fnv1a64(db_id) XOR anchor_id * 0x9E3779B97F4A7C15`, and
//! candidates are drawn by partial Fisher-Yates using `next_u64() % remaining`.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::{fnv1a64, EmbeddingSet, ExampleId};
use crate::schema::{load_catalogs, CatalogError, SchemaCatalog};
use crate::similarity::{
    score_pool, ErrorPolicy, QuestionSqlPair, ScoreError, ScoreOptions, SimilarityLabel,
};
use crate::ted::EditDistance;

#[derive(Debug, Clone)]
pub struct Dataset {
    pub examples: Vec<QuestionSqlPair>,
    pub catalogs: BTreeMap<String, SchemaCatalog>,
}

/// One training example for a similarity predictor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub db_id: String,
    pub anchor_id: ExampleId,
    pub candidate_id: ExampleId,
    pub schema_ddl: String,
    pub question_1: String,
    pub question_2: String,
    pub components: SimilarityLabel,
    pub label: f64,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {detail}")]
    Format { path: String, detail: String },
    #[error("no catalog for database(s): {}", db_ids.join(", "))]
    MissingCatalog { db_ids: Vec<String> },
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error("refusing to write an empty corpus")]
    NoRecords,
    #[error("{path} line {line}: stored label is not the mean of its components")]
    LabelMismatch { path: String, line: usize },
}

/// Examples rejected by the lenient loader, with the missing database id.
#[derive(Debug, Clone, Default)]
pub struct LoadReport {
    pub rejected: Vec<(ExampleId, String)>,
}

/// Strict loader: every example must have a catalog.
pub fn load_dataset(data_path: &Path, tables_path: &Path) -> Result<Dataset, CorpusError> {
    let (dataset, report) = load_dataset_inner(data_path, tables_path)?;
    if !report.rejected.is_empty() {
        let mut db_ids: Vec<String> = report
            .rejected
            .iter()
            .map(|(_, db)| db.clone())
            .collect();
        db_ids.sort();
        db_ids.dedup();
        return Err(CorpusError::MissingCatalog { db_ids });
    }
    Ok(dataset)
}

/// Lenient loader: examples whose `db_id` has no catalog are dropped and
/// reported. Ids always equal the example's position in the data file, so
/// they stay aligned with external embedding files either way.
pub fn load_dataset_lenient(
    data_path: &Path,
    tables_path: &Path,
) -> Result<(Dataset, LoadReport), CorpusError> {
    load_dataset_inner(data_path, tables_path)
}

fn load_dataset_inner(
    data_path: &Path,
    tables_path: &Path,
) -> Result<(Dataset, LoadReport), CorpusError> {
    let catalogs = load_catalogs(tables_path)?;
    let text = fs::read_to_string(data_path).map_err(|source| CorpusError::Io {
        path: data_path.display().to_string(),
        source,
    })?;
    let raw: Vec<serde_json::Value> =
        serde_json::from_str(&text).map_err(|e| CorpusError::Format {
            path: data_path.display().to_string(),
            detail: format!("not a JSON array of examples: {e}"),
        })?;

    let field = |v: &serde_json::Value, keys: &[&str], i: usize| -> Result<String, CorpusError> {
        for k in keys {
            if let Some(s) = v.get(*k).and_then(|s| s.as_str()) {
                return Ok(s.to_string());
            }
        }
        Err(CorpusError::Format {
            path: data_path.display().to_string(),
            detail: format!("record {i}: missing field {}", keys.join("/")),
        })
    };

    let mut examples = Vec::with_capacity(raw.len());
    let mut report = LoadReport::default();
    for (i, v) in raw.iter().enumerate() {
        let question = field(v, &["question"], i)?;
        let sql = field(v, &["query", "SQL", "sql"], i)?;
        let db_id = field(v, &["db_id"], i)?;
        let id = i as ExampleId;
        if !catalogs.contains_key(&db_id) {
            report.rejected.push((id, db_id));
            continue;
        }
        examples.push(QuestionSqlPair {
            id,
            db_id,
            question,
            sql,
        });
    }

    Ok((Dataset { examples, catalogs }, report))
}

/// Which pool the skeleton-distance maximum is taken over.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum NormalizationScope {
    /// All pairs within one database (the pool examples are drawn from).
    #[default]
    PerDatabase,
    /// The maximum over every database in the dataset.
    Global,
}

impl NormalizationScope {
    pub fn as_str(self) -> &'static str {
        match self {
            NormalizationScope::PerDatabase => "per-database",
            NormalizationScope::Global => "global",
        }
    }
}

#[derive(Debug, Clone)]
pub struct GeneratePairsOptions {
    pub k: usize,
    pub seed: u64,
    pub normalization: NormalizationScope,
    pub on_error: ErrorPolicy,
    pub dedupe: bool,
    pub jobs: usize,
}

impl Default for GeneratePairsOptions {
    fn default() -> Self {
        GeneratePairsOptions {
            k: 20,
            seed: 0,
            normalization: NormalizationScope::PerDatabase,
            on_error: ErrorPolicy::Fail,
            dedupe: false,
            jobs: 1,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct DbReport {
    pub examples: usize,
    pub usable: usize,
    pub records: usize,
    pub d_max: usize,
    pub skipped: Vec<(ExampleId, String)>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct GenerationReport {
    pub per_db: BTreeMap<String, DbReport>,
    pub total_records: usize,
}

/// Generate the supervised similarity corpus.
///
/// Records come out sorted by `(db_id, anchor_id, candidate_id)`; the same
/// seed always produces byte-identical output.
pub fn generate_pairs(
    dataset: &Dataset,
    embeddings: &EmbeddingSet,
    opts: &GeneratePairsOptions,
) -> Result<(Vec<PairRecord>, GenerationReport), CorpusError> {
    let mut by_db: BTreeMap<&str, Vec<&QuestionSqlPair>> = BTreeMap::new();
    for ex in &dataset.examples {
        by_db.entry(&ex.db_id).or_default().push(ex);
    }

    // score every database pool once
    let mut scored: BTreeMap<&str, crate::similarity::PoolScores> = BTreeMap::new();
    for (db_id, pool) in &by_db {
        scored.insert(db_id, score_db(dataset, db_id, pool, embeddings, opts, None)?);
    }

    // the global scope re-normalizes every pool against the dataset maximum
    if opts.normalization == NormalizationScope::Global {
        let global_max = scored
            .values()
            .map(|s| s.d_max)
            .max()
            .unwrap_or(EditDistance(0));
        for (db_id, pool) in &by_db {
            scored.insert(
                db_id,
                score_db(dataset, db_id, pool, embeddings, opts, Some(global_max))?,
            );
        }
    }

    let mut records = Vec::new();
    let mut report = GenerationReport::default();
    for (db_id, pool) in &by_db {
        let scores = &scored[db_id];
        let ddl = serialize_schema_ddl(&dataset.catalogs[*db_id]);
        let skipped_ids: Vec<ExampleId> = scores.skipped.iter().map(|(id, _)| *id).collect();
        let usable: Vec<&QuestionSqlPair> = pool
            .iter()
            .copied()
            .filter(|p| !skipped_ids.contains(&p.id))
            .collect();

        let mut db_records = 0usize;
        for anchor in &usable {
            let others: Vec<&QuestionSqlPair> = usable
                .iter()
                .copied()
                .filter(|p| p.id != anchor.id)
                .collect();
            let chosen = sample_candidates(db_id, anchor.id, &others, opts.k, opts.seed);
            for candidate in chosen {
                let label = *scores
                    .get(anchor.id, candidate.id)
                    .expect("every usable pair was scored");
                records.push(PairRecord {
                    db_id: (*db_id).to_string(),
                    anchor_id: anchor.id,
                    candidate_id: candidate.id,
                    schema_ddl: ddl.clone(),
                    question_1: anchor.question.clone(),
                    question_2: candidate.question.clone(),
                    components: label,
                    label: label.mean,
                });
                db_records += 1;
            }
        }
        report.per_db.insert(
            (*db_id).to_string(),
            DbReport {
                examples: pool.len(),
                usable: usable.len(),
                records: db_records,
                d_max: scores.d_max.0,
                skipped: scores.skipped.clone(),
            },
        );
    }

    records.sort_by(|a, b| {
        (&a.db_id, a.anchor_id, a.candidate_id).cmp(&(&b.db_id, b.anchor_id, b.candidate_id))
    });

    if opts.dedupe {
        let mut seen = std::collections::BTreeSet::new();
        records.retain(|r| {
            seen.insert((
                r.db_id.clone(),
                r.anchor_id.min(r.candidate_id),
                r.anchor_id.max(r.candidate_id),
            ))
        });
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for r in &records {
            *counts.entry(r.db_id.as_str()).or_default() += 1;
        }
        for (db_id, db) in report.per_db.iter_mut() {
            db.records = counts.get(db_id.as_str()).copied().unwrap_or(0);
        }
    }

    report.total_records = records.len();
    Ok((records, report))
}

fn score_db(
    dataset: &Dataset,
    db_id: &str,
    pool: &[&QuestionSqlPair],
    embeddings: &EmbeddingSet,
    opts: &GeneratePairsOptions,
    d_max_override: Option<EditDistance>,
) -> Result<crate::similarity::PoolScores, CorpusError> {
    let catalog = &dataset.catalogs[db_id];
    let owned: Vec<QuestionSqlPair> = pool.iter().map(|p| (*p).clone()).collect();
    Ok(score_pool(
        &owned,
        catalog,
        embeddings,
        &ScoreOptions {
            on_error: opts.on_error,
            d_max_override,
            jobs: opts.jobs,
        },
    )?)
}

fn sample_candidates<'a>(
    db_id: &str,
    anchor_id: ExampleId,
    others: &[&'a QuestionSqlPair],
    k: usize,
    seed: u64,
) -> Vec<&'a QuestionSqlPair> {
    let anchor_seed = seed
        ^ fnv1a64(db_id.as_bytes())
        ^ u64::from(anchor_id).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    let mut rng = ChaCha8Rng::seed_from_u64(anchor_seed);
    let mut idx: Vec<usize> = (0..others.len()).collect();
    let k = k.min(others.len());
    for i in 0..k {
        let j = i + (rng.next_u64() as usize) % (idx.len() - i);
        idx.swap(i, j);
    }
    let mut chosen: Vec<&QuestionSqlPair> = idx[..k].iter().map(|&i| others[i]).collect();
    chosen.sort_by_key(|p| p.id);
    chosen
}

/// Deterministic CREATE TABLE serialization of a catalog: tables and columns
/// in file order, single-column primary keys inline, composite ones as a
/// table constraint, foreign keys as inline REFERENCES clauses.
pub fn serialize_schema_ddl(catalog: &SchemaCatalog) -> String {
    let mut out = String::new();
    for (t, table) in catalog.tables.iter().enumerate() {
        let pk_cols: Vec<usize> = catalog
            .primary_keys
            .iter()
            .filter(|id| id.table == t)
            .map(|id| id.column)
            .collect();
        let mut parts: Vec<String> = Vec::new();
        for (c, col) in table.columns.iter().enumerate() {
            let mut def = format!("{} {}", quote_ident(&col.name), col.ty.to_uppercase());
            if pk_cols.len() == 1 && pk_cols[0] == c {
                def.push_str(" PRIMARY KEY");
            }
            if let Some((_, target)) = catalog
                .foreign_keys
                .iter()
                .find(|(from, _)| from.table == t && from.column == c)
            {
                def.push_str(&format!(
                    " REFERENCES {}({})",
                    quote_ident(&catalog.tables[target.table].name),
                    quote_ident(&catalog.tables[target.table].columns[target.column].name)
                ));
            }
            parts.push(def);
        }
        if pk_cols.len() > 1 {
            let names: Vec<String> = pk_cols
                .iter()
                .map(|&c| quote_ident(&table.columns[c].name))
                .collect();
            parts.push(format!("PRIMARY KEY ({})", names.join(", ")));
        }
        out.push_str(&format!(
            "CREATE TABLE {} ({});\n",
            quote_ident(&table.name),
            parts.join(", ")
        ));
    }
    out
}

fn quote_ident(name: &str) -> String {
    let bare = !name.is_empty()
        && name
            .chars()
            .next()
            .is_some_and(|c| c == '_' || c.is_ascii_alphabetic())
        && name.chars().all(|c| c == '_' || c.is_ascii_alphanumeric());
    if bare {
        name.to_string()
    } else {
        format!("\"{}\"", name.replace('"', "\"\""))
    }
}

/// Effective configuration echoed next to every generated corpus.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusMeta {
    pub seed: u64,
    pub k: usize,
    pub normalization: String,
    pub rescaling: String,
    pub dedupe: bool,
    pub tool_version: String,
    pub generated_at_unix: u64,
}

impl CorpusMeta {
    pub fn new(opts: &GeneratePairsOptions) -> Self {
        CorpusMeta {
            seed: opts.seed,
            k: opts.k,
            normalization: opts.normalization.as_str().to_string(),
            rescaling: "question_sim = (cosine + 1) / 2".to_string(),
            dedupe: opts.dedupe,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            generated_at_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }
}

/// Write records as JSONL plus a `<out>.meta.json` sidecar; returns the
/// record count.
pub fn emit_corpus(
    records: &[PairRecord],
    out_path: &Path,
    meta: &CorpusMeta,
) -> Result<usize, CorpusError> {
    if records.is_empty() {
        return Err(CorpusError::NoRecords);
    }
    let io_err = |source: std::io::Error| CorpusError::Io {
        path: out_path.display().to_string(),
        source,
    };
    let mut file = fs::File::create(out_path).map_err(io_err)?;
    for r in records {
        let line = serde_json::to_string(r).expect("record serialization cannot fail");
        file.write_all(line.as_bytes()).map_err(io_err)?;
        file.write_all(b"\n").map_err(io_err)?;
    }
    let meta_path = format!("{}.meta.json", out_path.display());
    let meta_json =
        serde_json::to_string_pretty(meta).expect("metadata serialization cannot fail");
    fs::write(&meta_path, meta_json).map_err(|source| CorpusError::Io {
        path: meta_path.clone(),
        source,
    })?;
    Ok(records.len())
}

/// Read a corpus back, re-checking that every stored label equals the mean
/// of its components to within one ulp.
pub fn read_corpus(path: &Path) -> Result<Vec<PairRecord>, CorpusError> {
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: PairRecord = serde_json::from_str(line).map_err(|e| CorpusError::Format {
            path: path.display().to_string(),
            detail: format!("line {}: {e}", i + 1),
        })?;
        let mean = (record.components.question_sim
            + record.components.skeleton_sim
            + record.components.link_sim)
            / 3.0;
        if (record.label - mean).abs() > ulp(mean) {
            return Err(CorpusError::LabelMismatch {
                path: path.display().to_string(),
                line: i + 1,
            });
        }
        out.push(record);
    }
    Ok(out)
}

fn ulp(x: f64) -> f64 {
    if x == 0.0 {
        f64::MIN_POSITIVE
    } else {
        let bits = x.abs().to_bits();
        f64::from_bits(bits + 1) - x.abs()
    }
}

/// Split off the last `n` records (after the canonical sort) for validation.
pub fn split_holdout(records: Vec<PairRecord>, n: usize) -> (Vec<PairRecord>, Vec<PairRecord>) {
    let n = n.min(records.len());
    let cut = records.len() - n;
    let mut records = records;
    let holdout = records.split_off(cut);
    (records, holdout)
}
