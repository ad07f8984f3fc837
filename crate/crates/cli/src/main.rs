//! `sqlsim` — structural similarity tooling for NL2SQL question/SQL pairs.
//!
//! Exit codes: 0 on success, 1 on runtime errors, 2 on usage errors and SQL
//! parse errors. Diagnostics go to standard error; data goes to standard
//! output or `--out` files. Machine output is JSON; `--pretty` indents it.

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use sqlsim_core::corpus::{
    emit_corpus, generate_pairs, load_dataset, load_dataset_lenient, read_corpus, split_holdout,
    CorpusMeta, Dataset, GeneratePairsOptions, NormalizationScope,
};
use sqlsim_core::embedding::EmbeddingSet;
use sqlsim_core::evalrank::{evaluate, PredictionSet, DEFAULT_KS};
use sqlsim_core::selector::{build_prompt, select_top_k, Scorer};
use sqlsim_core::similarity::{score_pool, ErrorPolicy, ScoreOptions};
use sqlsim_core::skeleton::{
    build_skeleton, render_skeleton, render_skeleton_indented,
};
use sqlsim_core::sql::{parse_sql, ParseError};
use sqlsim_core::ted::{normalized_similarity, skeleton_distance, EditDistance};

#[derive(Parser)]
#[command(name = "sqlsim", version, about = "Structural similarity for NL2SQL question/SQL pairs")]
struct Cli {
    /// Worker threads for pairwise scoring; 0 means all available cores.
    /// Results never depend on this value.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the canonical skeleton of a SQL query.
    Skeleton(SkeletonArgs),
    /// Tree edit distance between two queries, or the normalized similarity
    /// matrix over a pool.
    Distance(DistanceArgs),
    /// Score every pair of one database's examples.
    ScorePairs(ScorePairsArgs),
    /// Generate the supervised similarity corpus.
    BuildCorpus(BuildCorpusArgs),
    /// Evaluate a similarity predictor against an oracle corpus.
    Evaluate(EvaluateArgs),
    /// Select top-k in-domain examples for a question.
    Select(SelectArgs),
}

#[derive(Args)]
struct SkeletonArgs {
    /// SQL text to skeletonize.
    #[arg(long, conflicts_with = "file")]
    sql: Option<String>,
    /// Read the SQL from a file instead.
    #[arg(long)]
    file: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = RenderMode::Sexpr)]
    render: RenderMode,
}

#[derive(Clone, Copy, ValueEnum)]
enum RenderMode {
    /// Canonical parenthesized form.
    Sexpr,
    /// Indented one-node-per-line form.
    Tree,
}

#[derive(Args)]
struct DistanceArgs {
    #[arg(long = "sql-a", requires = "sql_b", conflicts_with = "pool")]
    sql_a: Option<String>,
    #[arg(long = "sql-b", requires = "sql_a")]
    sql_b: Option<String>,
    /// JSONL pool, one `{"sql": ...}` object per line.
    #[arg(long)]
    pool: Option<PathBuf>,
    #[arg(long)]
    pretty: bool,
}

#[derive(Args)]
struct ScorePairsArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    tables: PathBuf,
    /// Precomputed embedding JSONL; omitted means the hashed fallback
    /// provider.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Database whose examples form the pool.
    #[arg(long)]
    db: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long = "on-error", value_enum, default_value_t = OnError::Fail)]
    on_error: OnError,
    /// Dimension of the hashed fallback provider.
    #[arg(long = "hash-dim", default_value_t = 256)]
    hash_dim: usize,
}

#[derive(Args)]
struct BuildCorpusArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    tables: PathBuf,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    dedupe: bool,
    #[arg(long = "on-error", value_enum, default_value_t = OnError::Fail)]
    on_error: OnError,
    #[arg(long, value_enum, default_value_t = Normalization::PerDb)]
    normalization: Normalization,
    /// Split off the last N records into `<out>.holdout.jsonl`.
    #[arg(long)]
    holdout: Option<usize>,
    #[arg(long = "hash-dim", default_value_t = 256)]
    hash_dim: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum OnError {
    Fail,
    Skip,
}

impl From<OnError> for ErrorPolicy {
    fn from(v: OnError) -> Self {
        match v {
            OnError::Fail => ErrorPolicy::Fail,
            OnError::Skip => ErrorPolicy::Skip,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Normalization {
    /// Distance maximum taken within each database.
    PerDb,
    /// Distance maximum taken over the whole dataset.
    Global,
}

impl From<Normalization> for NormalizationScope {
    fn from(v: Normalization) -> Self {
        match v {
            Normalization::PerDb => NormalizationScope::PerDatabase,
            Normalization::Global => NormalizationScope::Global,
        }
    }
}

#[derive(Args)]
struct EvaluateArgs {
    /// Oracle corpus JSONL (from build-corpus).
    #[arg(long)]
    oracle: PathBuf,
    /// Predictions JSONL `{"anchor_id":, "candidate_id":, "score":}`.
    #[arg(long)]
    pred: PathBuf,
    /// Comma-separated precision cutoffs.
    #[arg(long, value_delimiter = ',')]
    ks: Vec<usize>,
    /// Write the report here instead of standard output.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Treat prediction scores as raw logits and apply the sigmoid.
    #[arg(long)]
    sigmoid: bool,
    #[arg(long)]
    pretty: bool,
}

#[derive(Args)]
struct SelectArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    tables: PathBuf,
    #[arg(long)]
    db: String,
    #[arg(long)]
    question: String,
    /// Gold SQL of the target; required by the oracle, skeleton, and link
    /// scorers.
    #[arg(long)]
    sql: Option<String>,
    #[arg(long, value_enum, default_value_t = ScorerArg::Oracle)]
    scorer: ScorerArg,
    /// External scores JSONL for `--scorer file`.
    #[arg(long)]
    scores: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// Print the assembled few-shot prompt instead of the ranked list.
    #[arg(long = "emit-prompt")]
    emit_prompt: bool,
    #[arg(long)]
    pretty: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScorerArg {
    Oracle,
    Skeleton,
    Link,
    Embed,
    File,
}

/// Marker for violations of the CLI grammar that clap cannot express.
#[derive(Debug)]
struct UsageError(String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl std::error::Error for UsageError {}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let jobs = if cli.jobs == 0 {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    } else {
        cli.jobs
    };
    match run(cli.command, jobs) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let usage = e.chain().any(|c| {
                c.downcast_ref::<ParseError>().is_some() || c.downcast_ref::<UsageError>().is_some()
            });
            ExitCode::from(if usage { 2 } else { 1 })
        }
    }
}

fn run(command: Command, jobs: usize) -> Result<()> {
    match command {
        Command::Skeleton(args) => cmd_skeleton(args),
        Command::Distance(args) => cmd_distance(args),
        Command::ScorePairs(args) => cmd_score_pairs(args, jobs),
        Command::BuildCorpus(args) => cmd_build_corpus(args, jobs),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Select(args) => cmd_select(args),
    }
}

fn cmd_skeleton(args: SkeletonArgs) -> Result<()> {
    let sql = match (args.sql, args.file) {
        (Some(sql), None) => sql,
        (None, Some(path)) => std::fs::read_to_string(&path)
            .with_context(|| format!("reading {}", path.display()))?,
        _ => return Err(anyhow!(UsageError("pass exactly one of --sql or --file".into()))),
    };
    let ast = parse_sql(sql.trim())?;
    let tree = build_skeleton(&ast);
    match args.render {
        RenderMode::Sexpr => println!("{}", render_skeleton(&tree)),
        RenderMode::Tree => print!("{}", render_skeleton_indented(&tree)),
    }
    Ok(())
}

fn cmd_distance(args: DistanceArgs) -> Result<()> {
    match (args.sql_a, args.sql_b, args.pool) {
        (Some(a), Some(b), None) => {
            let ta = build_skeleton(&parse_sql(a.trim())?);
            let tb = build_skeleton(&parse_sql(b.trim())?);
            println!("{}", skeleton_distance(&ta, &tb));
            Ok(())
        }
        (None, None, Some(pool_path)) => {
            let text = std::fs::read_to_string(&pool_path)
                .with_context(|| format!("reading {}", pool_path.display()))?;
            let mut trees = Vec::new();
            for (i, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let value: serde_json::Value = serde_json::from_str(line)
                    .with_context(|| format!("{} line {}", pool_path.display(), i + 1))?;
                let sql = value
                    .get("sql")
                    .and_then(|s| s.as_str())
                    .ok_or_else(|| anyhow!("{} line {}: missing \"sql\"", pool_path.display(), i + 1))?;
                trees.push(sqlsim_core::ted::PostorderTree::from(&build_skeleton(
                    &parse_sql(sql).with_context(|| format!("line {}", i + 1))?,
                )));
            }
            if trees.is_empty() {
                return Err(anyhow!(UsageError("pool is empty".into())));
            }
            let n = trees.len();
            let mut distances = vec![vec![EditDistance(0); n]; n];
            let mut d_max = EditDistance(0);
            for i in 0..n {
                for j in i + 1..n {
                    let d = sqlsim_core::ted::tree_edit_distance(&trees[i], &trees[j])
                        .expect("non-empty trees");
                    distances[i][j] = d;
                    distances[j][i] = d;
                    d_max = d_max.max(d);
                }
            }
            let matrix: Vec<Vec<f64>> = distances
                .iter()
                .map(|row| row.iter().map(|d| normalized_similarity(*d, d_max)).collect())
                .collect();
            let doc = serde_json::json!({
                "n": n,
                "d_max": d_max.0,
                "similarity": matrix,
                "config": {"pool": pool_path.display().to_string()},
            });
            print_json(&doc, args.pretty)?;
            Ok(())
        }
        _ => Err(anyhow!(UsageError(
            "pass either --sql-a with --sql-b, or --pool".into()
        ))),
    }
}

fn load_embeddings(path: &Option<PathBuf>, hash_dim: usize) -> Result<EmbeddingSet> {
    match path {
        Some(p) => Ok(EmbeddingSet::from_jsonl(p)?.with_fallback(hash_dim)),
        None => Ok(EmbeddingSet::hashed(hash_dim)),
    }
}

fn load_dataset_with_policy(
    data: &Path,
    tables: &Path,
    on_error: OnError,
) -> Result<Dataset> {
    match on_error {
        OnError::Fail => Ok(load_dataset(data, tables)?),
        OnError::Skip => {
            let (dataset, report) = load_dataset_lenient(data, tables)?;
            for (id, db) in &report.rejected {
                eprintln!("skipping example {id}: no catalog for database `{db}`");
            }
            Ok(dataset)
        }
    }
}

fn cmd_score_pairs(args: ScorePairsArgs, jobs: usize) -> Result<()> {
    let dataset = load_dataset_with_policy(&args.dataset, &args.tables, args.on_error)?;
    let catalog = dataset
        .catalogs
        .get(&args.db)
        .ok_or_else(|| anyhow!(UsageError(format!("no catalog for database `{}`", args.db))))?;
    let pool: Vec<_> = dataset
        .examples
        .iter()
        .filter(|e| e.db_id == args.db)
        .cloned()
        .collect();
    if pool.is_empty() {
        return Err(anyhow!(UsageError(format!(
            "database `{}` has no examples",
            args.db
        ))));
    }
    let embeddings = load_embeddings(&args.embeddings, args.hash_dim)?;
    let scores = score_pool(
        &pool,
        catalog,
        &embeddings,
        &ScoreOptions {
            on_error: args.on_error.into(),
            d_max_override: None,
            jobs,
        },
    )?;

    let mut lines = String::new();
    for ((a, b), label) in &scores.labels {
        let line = serde_json::json!({
            "a": a,
            "b": b,
            "question_sim": label.question_sim,
            "skeleton_sim": label.skeleton_sim,
            "link_sim": label.link_sim,
            "mean": label.mean,
        });
        lines.push_str(&line.to_string());
        lines.push('\n');
    }
    std::fs::write(&args.out, lines)
        .with_context(|| format!("writing {}", args.out.display()))?;
    for (id, reason) in &scores.skipped {
        eprintln!("skipped example {id}: {reason}");
    }
    let meta = serde_json::json!({
        "db": args.db,
        "pairs": scores.labels.len(),
        "d_max": scores.d_max.0,
        "skipped": scores.skipped.len(),
        "embeddings": args.embeddings.as_ref().map(|p| p.display().to_string()),
        "hash_dim": args.hash_dim,
    });
    std::fs::write(
        format!("{}.meta.json", args.out.display()),
        serde_json::to_string_pretty(&meta)?,
    )?;
    eprintln!("wrote {} pair scores to {}", scores.labels.len(), args.out.display());
    Ok(())
}

fn cmd_build_corpus(args: BuildCorpusArgs, jobs: usize) -> Result<()> {
    let dataset = load_dataset_with_policy(&args.data, &args.tables, args.on_error)?;
    let embeddings = load_embeddings(&args.embeddings, args.hash_dim)?;
    let opts = GeneratePairsOptions {
        k: args.k,
        seed: args.seed,
        normalization: args.normalization.into(),
        on_error: args.on_error.into(),
        dedupe: args.dedupe,
        jobs,
    };
    let (records, report) = generate_pairs(&dataset, &embeddings, &opts)?;
    let meta = CorpusMeta::new(&opts);

    let (records, holdout) = match args.holdout {
        Some(n) => split_holdout(records, n),
        None => (records, Vec::new()),
    };
    let written = emit_corpus(&records, &args.out, &meta)?;
    if !holdout.is_empty() {
        let holdout_path = PathBuf::from(format!("{}.holdout.jsonl", args.out.display()));
        emit_corpus(&holdout, &holdout_path, &meta)?;
        eprintln!("held out {} records to {}", holdout.len(), holdout_path.display());
    }
    eprintln!("wrote {written} records to {}", args.out.display());
    println!("{}", serde_json::to_string(&report)?);
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<()> {
    let corpus = read_corpus(&args.oracle)?;
    let mut predictions = PredictionSet::from_jsonl(&args.pred)?;
    if args.sigmoid {
        predictions = predictions.apply_sigmoid();
    }
    let ks: Vec<usize> = if args.ks.is_empty() {
        DEFAULT_KS.to_vec()
    } else {
        args.ks.clone()
    };
    let report = evaluate(&predictions, &corpus, &ks)?;
    let mut doc = serde_json::to_value(&report)?;
    doc.as_object_mut().expect("report is an object").insert(
        "config".to_string(),
        serde_json::json!({
            "oracle": args.oracle.display().to_string(),
            "pred": args.pred.display().to_string(),
            "ks": ks,
            "sigmoid": args.sigmoid,
        }),
    );
    match &args.report {
        Some(path) => {
            let text = if args.pretty {
                serde_json::to_string_pretty(&doc)?
            } else {
                doc.to_string()
            };
            std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
            eprintln!("wrote report to {}", path.display());
        }
        None => print_json(&doc, args.pretty)?,
    }
    Ok(())
}

fn cmd_select(args: SelectArgs) -> Result<()> {
    let dataset = load_dataset(&args.data, &args.tables)?;
    let catalog = dataset
        .catalogs
        .get(&args.db)
        .ok_or_else(|| anyhow!(UsageError(format!("no catalog for database `{}`", args.db))))?;
    let pool: Vec<_> = dataset
        .examples
        .iter()
        .filter(|e| e.db_id == args.db)
        .cloned()
        .collect();

    let scorer = match args.scorer {
        ScorerArg::Oracle => Scorer::oracle_mean(),
        ScorerArg::Skeleton => Scorer::skeleton(),
        ScorerArg::Link => Scorer::link(),
        ScorerArg::Embed => Scorer::embedding(),
        ScorerArg::File => {
            let path = args.scores.as_ref().ok_or_else(|| {
                anyhow!(UsageError("--scorer file requires --scores <jsonl>".into()))
            })?;
            Scorer::external_from_jsonl(path)?
        }
    };

    let selected = select_top_k(
        &args.question,
        args.sql.as_deref(),
        &pool,
        catalog,
        &scorer,
        args.k,
    )?;

    if args.emit_prompt {
        print!("{}", build_prompt(&selected, &args.question, catalog));
        return Ok(());
    }

    let items: Vec<serde_json::Value> = selected
        .iter()
        .map(|c| {
            let mut obj = serde_json::json!({
                "id": c.candidate.id,
                "score": c.score,
                "question": c.candidate.question,
                "sql": c.candidate.sql,
            });
            if let Some(components) = &c.components {
                obj.as_object_mut()
                    .expect("object")
                    .insert("components".to_string(), serde_json::to_value(components).expect("label"));
            }
            obj
        })
        .collect();
    let doc = serde_json::json!({
        "config": {
            "db": args.db,
            "scorer": scorer.kind.name(),
            "k": args.k,
        },
        "selected": items,
    });
    print_json(&doc, args.pretty)?;
    Ok(())
}

fn print_json(doc: &serde_json::Value, pretty: bool) -> Result<()> {
    if pretty {
        println!("{}", serde_json::to_string_pretty(doc)?);
    } else {
        println!("{doc}");
    }
    Ok(())
}
