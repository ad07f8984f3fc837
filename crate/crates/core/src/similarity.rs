//! Component similarities and the mean-of-three label.
//!
//! For a pool of question/SQL pairs from one database, every unordered pair
//! gets three component scores: question similarity (cosine over embedding
//! vectors, rescaled from `[-1,1]` to `[0,1]` via `(c+1)/2`), skeleton
//! similarity (tree edit distance normalized over the pool: `1 - d/d_max`),
//! and schema-link similarity (Jaccard). The label is their arithmetic mean.

use std::collections::BTreeMap;
use std::thread;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::{EmbeddingError, EmbeddingSet, EmbeddingVector, ExampleId};
use crate::schema::{extract_links, jaccard_similarity, LinkError, SchemaCatalog, SchemaLinkSet};
use crate::skeleton::build_skeleton;
use crate::sql::{parse_sql, ParseError};
use crate::ted::{normalized_similarity, tree_edit_distance, EditDistance, PostorderTree};

/// A natural-language question with its gold SQL and database id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionSqlPair {
    pub id: ExampleId,
    pub db_id: String,
    pub question: String,
    pub sql: String,
}

/// The three component similarities and their mean for one pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityLabel {
    pub question_sim: f64,
    pub skeleton_sim: f64,
    pub link_sim: f64,
    pub mean: f64,
}

impl SimilarityLabel {
    pub fn from_components(question_sim: f64, skeleton_sim: f64, link_sim: f64) -> Self {
        SimilarityLabel {
            question_sim,
            skeleton_sim,
            link_sim,
            mean: (question_sim + skeleton_sim + link_sim) / 3.0,
        }
    }
}

#[derive(Debug, Error)]
pub enum SimilarityError {
    #[error("vector dimensions differ: {expected} vs {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("cosine similarity of a zero vector is undefined")]
    ZeroVector,
}

/// Cosine of the angle between two vectors, clamped to [-1, 1].
pub fn cosine_similarity(
    a: &EmbeddingVector,
    b: &EmbeddingVector,
) -> Result<f64, SimilarityError> {
    if a.values.len() != b.values.len() {
        return Err(SimilarityError::DimensionMismatch {
            expected: a.values.len(),
            got: b.values.len(),
        });
    }
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for (x, y) in a.values.iter().zip(&b.values) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Err(SimilarityError::ZeroVector);
    }
    if a.values == b.values {
        // self-similarity is 1 by definition; keep it exact
        return Ok(1.0);
    }
    Ok((dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0))
}

/// Map a cosine in [-1, 1] onto [0, 1] so it can enter the mean label.
pub fn rescale_question_sim(cos: f64) -> f64 {
    (cos + 1.0) / 2.0
}

/// What to do when one example of a pool fails to parse or resolve.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum ErrorPolicy {
    /// Stop at the first failing example.
    #[default]
    Fail,
    /// Drop failing examples from the pool and report them.
    Skip,
}

#[derive(Debug, Clone)]
pub struct ScoreOptions {
    pub on_error: ErrorPolicy,
    /// Normalize skeleton distances against this maximum instead of the
    /// pool's own; similarities clamp to [0, 1] if it is exceeded.
    pub d_max_override: Option<EditDistance>,
    /// Worker threads for the distance matrix; results are identical for
    /// any value.
    pub jobs: usize,
}

impl Default for ScoreOptions {
    fn default() -> Self {
        ScoreOptions {
            on_error: ErrorPolicy::Fail,
            d_max_override: None,
            jobs: 1,
        }
    }
}

#[derive(Debug, Error)]
pub enum ScoreError {
    #[error("example {id}: {source}")]
    Parse {
        id: ExampleId,
        #[source]
        source: ParseError,
    },
    #[error("example {id}: {source}")]
    Link {
        id: ExampleId,
        #[source]
        source: LinkError,
    },
    #[error("example {id}: {source}")]
    Embedding {
        id: ExampleId,
        #[source]
        source: EmbeddingError,
    },
    #[error("example {id} belongs to database `{found}`, pool is `{expected}`")]
    MixedDatabase {
        id: ExampleId,
        expected: String,
        found: String,
    },
    #[error("example {id}: embedding dimension {got} differs from the pool's {expected}")]
    InconsistentDimension {
        id: ExampleId,
        expected: usize,
        got: usize,
    },
    #[error("example {id}: embedding is a zero vector")]
    ZeroEmbedding { id: ExampleId },
}

/// Result of scoring one pool: labels keyed by the canonical
/// `(min id, max id)` pair, plus what was skipped and the normalization
/// maximum actually used.
#[derive(Debug, Clone)]
pub struct PoolScores {
    pub labels: BTreeMap<(ExampleId, ExampleId), SimilarityLabel>,
    pub skipped: Vec<(ExampleId, String)>,
    pub d_max: EditDistance,
}

impl PoolScores {
    /// Symmetric lookup.
    pub fn get(&self, a: ExampleId, b: ExampleId) -> Option<&SimilarityLabel> {
        self.labels.get(&(a.min(b), a.max(b)))
    }
}

struct Prepared {
    id: ExampleId,
    postorder: PostorderTree,
    links: SchemaLinkSet,
    vector: EmbeddingVector,
}

/// Score every unordered pair of a single-database pool.
pub fn score_pool(
    pool: &[QuestionSqlPair],
    catalog: &SchemaCatalog,
    embeddings: &EmbeddingSet,
    opts: &ScoreOptions,
) -> Result<PoolScores, ScoreError> {
    let mut skipped = Vec::new();
    let mut prepared = Vec::with_capacity(pool.len());
    let mut expected_dim: Option<usize> = None;

    for pair in pool {
        if pair.db_id != catalog.db_id {
            return Err(ScoreError::MixedDatabase {
                id: pair.id,
                expected: catalog.db_id.clone(),
                found: pair.db_id.clone(),
            });
        }
        match prepare(pair, catalog, embeddings, &mut expected_dim) {
            Ok(p) => prepared.push(p),
            Err(e) => match opts.on_error {
                ErrorPolicy::Fail => return Err(e),
                ErrorPolicy::Skip => skipped.push((pair.id, e.to_string())),
            },
        }
    }

    let pairs: Vec<(usize, usize)> = (0..prepared.len())
        .flat_map(|i| (i + 1..prepared.len()).map(move |j| (i, j)))
        .collect();
    let distances = distance_matrix(&prepared, &pairs, opts.jobs);

    let d_max = opts
        .d_max_override
        .unwrap_or_else(|| distances.iter().copied().max().unwrap_or(EditDistance(0)));

    let mut labels = BTreeMap::new();
    for ((i, j), d) in pairs.iter().zip(&distances) {
        let a = &prepared[*i];
        let b = &prepared[*j];
        let skeleton_sim = normalized_similarity(*d, d_max);
        let link_sim = jaccard_similarity(&a.links, &b.links);
        let cos = cosine_similarity(&a.vector, &b.vector)
            .expect("dimensions and non-zero norms validated during preparation");
        let question_sim = rescale_question_sim(cos);
        let key = (a.id.min(b.id), a.id.max(b.id));
        labels.insert(
            key,
            SimilarityLabel::from_components(question_sim, skeleton_sim, link_sim),
        );
    }

    Ok(PoolScores {
        labels,
        skipped,
        d_max,
    })
}

fn prepare(
    pair: &QuestionSqlPair,
    catalog: &SchemaCatalog,
    embeddings: &EmbeddingSet,
    expected_dim: &mut Option<usize>,
) -> Result<Prepared, ScoreError> {
    let ast = parse_sql(&pair.sql).map_err(|source| ScoreError::Parse {
        id: pair.id,
        source,
    })?;
    let links = extract_links(&ast, catalog).map_err(|source| ScoreError::Link {
        id: pair.id,
        source,
    })?;
    let skeleton = build_skeleton(&ast);
    let vector = embeddings
        .vector_for(pair.id, &pair.question)
        .map_err(|source| ScoreError::Embedding {
            id: pair.id,
            source,
        })?;
    if vector.values.iter().all(|v| *v == 0.0) {
        return Err(ScoreError::ZeroEmbedding { id: pair.id });
    }
    match expected_dim {
        Some(d) if *d != vector.values.len() => {
            return Err(ScoreError::InconsistentDimension {
                id: pair.id,
                expected: *d,
                got: vector.values.len(),
            })
        }
        Some(_) => {}
        None => *expected_dim = Some(vector.values.len()),
    }
    Ok(Prepared {
        id: pair.id,
        postorder: PostorderTree::from(&skeleton),
        links,
        vector,
    })
}

/// Pairwise skeleton distances, split across `jobs` workers; chunk order
/// makes the result independent of the worker count.
fn distance_matrix(
    prepared: &[Prepared],
    pairs: &[(usize, usize)],
    jobs: usize,
) -> Vec<EditDistance> {
    let compute = |&(i, j): &(usize, usize)| {
        tree_edit_distance(&prepared[i].postorder, &prepared[j].postorder)
            .expect("skeleton trees are non-empty")
    };
    let jobs = jobs.max(1);
    if jobs == 1 || pairs.len() < 2 {
        return pairs.iter().map(compute).collect();
    }
    let chunk = pairs.len().div_ceil(jobs);
    let mut out = vec![EditDistance(0); pairs.len()];
    thread::scope(|scope| {
        for (pair_chunk, out_chunk) in pairs.chunks(chunk).zip(out.chunks_mut(chunk)) {
            scope.spawn(move || {
                for (p, slot) in pair_chunk.iter().zip(out_chunk.iter_mut()) {
                    *slot = compute(p);
                }
            });
        }
    });
    out
}
