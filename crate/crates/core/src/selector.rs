//! In-domain example selection and few-shot prompt assembly.
//!
//! Five scoring strategies rank a same-database pool against a target
//! question: the oracle mean of all three components, skeleton-only,
//! link-only, question-embedding cosine, and an external scores file (for a
//! trained predictor). The oracle, skeleton, and link strategies need the
//! target's gold SQL; skeleton distances normalize over the target-candidate
//! pair set. Question embeddings during selection always come from the
//! deterministic hashed provider, since an ad-hoc target question has no
//! entry in a precomputed embedding file.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::corpus::serialize_schema_ddl;
use crate::embedding::{ExampleId, HashedBagEmbedder, DEFAULT_HASH_DIM};
use crate::schema::{extract_links, jaccard_similarity, LinkError, SchemaCatalog, SchemaLinkSet};
use crate::similarity::{
    cosine_similarity, rescale_question_sim, QuestionSqlPair, SimilarityLabel,
};
use crate::skeleton::build_skeleton;
use crate::sql::{parse_sql, ParseError};
use crate::ted::{normalized_similarity, tree_edit_distance, EditDistance, PostorderTree};

#[derive(Debug, Clone)]
pub struct ScoredCandidate {
    pub candidate: QuestionSqlPair,
    pub score: f64,
    pub components: Option<SimilarityLabel>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScorerKind {
    OracleMean,
    Skeleton,
    Link,
    Embedding,
    External,
}

impl ScorerKind {
    pub fn name(self) -> &'static str {
        match self {
            ScorerKind::OracleMean => "oracle",
            ScorerKind::Skeleton => "skeleton",
            ScorerKind::Link => "link",
            ScorerKind::Embedding => "embed",
            ScorerKind::External => "file",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Scorer {
    pub kind: ScorerKind,
    hash_dim: usize,
    external: Option<BTreeMap<ExampleId, f64>>,
}

#[derive(Debug, Error)]
pub enum SelectError {
    #[error("candidate pool is empty")]
    EmptyPool,
    #[error("pool spans databases `{expected}` and `{found}`; selection is in-domain only")]
    CrossDomainPool { expected: String, found: String },
    #[error("scorer `{scorer}` is unavailable: {missing}")]
    ScorerUnavailable { scorer: String, missing: String },
    #[error("{} SQL: {source}", context(.id))]
    Parse {
        id: Option<ExampleId>,
        #[source]
        source: ParseError,
    },
    #[error("{} SQL: {source}", context(.id))]
    Link {
        id: Option<ExampleId>,
        #[source]
        source: LinkError,
    },
    #[error("scores file has no entry for candidate {id}")]
    MissingScore { id: ExampleId },
    #[error("score {value} for candidate {id} is outside [0, 1]")]
    InvalidScore { id: ExampleId, value: f64 },
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path} line {line}: {source}")]
    Format {
        path: String,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

fn context(id: &Option<ExampleId>) -> String {
    match id {
        Some(id) => format!("candidate {id}"),
        None => "target".to_string(),
    }
}

#[derive(Deserialize)]
struct RawScoreLine {
    candidate_id: ExampleId,
    score: f64,
}

impl Scorer {
    pub fn oracle_mean() -> Self {
        Scorer::of(ScorerKind::OracleMean)
    }

    pub fn skeleton() -> Self {
        Scorer::of(ScorerKind::Skeleton)
    }

    pub fn link() -> Self {
        Scorer::of(ScorerKind::Link)
    }

    pub fn embedding() -> Self {
        Scorer::of(ScorerKind::Embedding)
    }

    pub fn external(scores: BTreeMap<ExampleId, f64>) -> Self {
        Scorer {
            kind: ScorerKind::External,
            hash_dim: DEFAULT_HASH_DIM,
            external: Some(scores),
        }
    }

    /// Load an external scores file: JSONL objects with `candidate_id` and
    /// `score` (an `anchor_id` field, if present, is ignored).
    pub fn external_from_jsonl(path: &Path) -> Result<Self, SelectError> {
        let text = fs::read_to_string(path).map_err(|source| SelectError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut scores = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let raw: RawScoreLine =
                serde_json::from_str(line).map_err(|source| SelectError::Format {
                    path: path.display().to_string(),
                    line: i + 1,
                    source,
                })?;
            scores.insert(raw.candidate_id, raw.score);
        }
        Ok(Scorer::external(scores))
    }

    pub fn with_hash_dim(mut self, dim: usize) -> Self {
        self.hash_dim = dim.max(1);
        self
    }

    fn of(kind: ScorerKind) -> Self {
        Scorer {
            kind,
            hash_dim: DEFAULT_HASH_DIM,
            external: None,
        }
    }
}

struct TargetArtifacts {
    postorder: Option<PostorderTree>,
    links: Option<SchemaLinkSet>,
}

/// Rank the pool against the target and keep the best `k` (the whole pool,
/// ranked, when `k` exceeds it). Ties break by ascending candidate id.
pub fn select_top_k(
    target_question: &str,
    target_sql: Option<&str>,
    pool: &[QuestionSqlPair],
    catalog: &SchemaCatalog,
    scorer: &Scorer,
    k: usize,
) -> Result<Vec<ScoredCandidate>, SelectError> {
    if pool.is_empty() {
        return Err(SelectError::EmptyPool);
    }
    for p in pool {
        if p.db_id != catalog.db_id {
            return Err(SelectError::CrossDomainPool {
                expected: catalog.db_id.clone(),
                found: p.db_id.clone(),
            });
        }
    }

    let needs_sql = matches!(
        scorer.kind,
        ScorerKind::OracleMean | ScorerKind::Skeleton | ScorerKind::Link
    );
    let target = if needs_sql {
        let Some(sql) = target_sql else {
            return Err(SelectError::ScorerUnavailable {
                scorer: scorer.kind.name().to_string(),
                missing: "the target's gold SQL (--sql)".to_string(),
            });
        };
        let ast = parse_sql(sql).map_err(|source| SelectError::Parse { id: None, source })?;
        TargetArtifacts {
            postorder: Some(PostorderTree::from(&build_skeleton(&ast))),
            links: Some(
                extract_links(&ast, catalog)
                    .map_err(|source| SelectError::Link { id: None, source })?,
            ),
        }
    } else {
        TargetArtifacts {
            postorder: None,
            links: None,
        }
    };

    let mut scored = match scorer.kind {
        ScorerKind::External => {
            let Some(scores) = &scorer.external else {
                return Err(SelectError::ScorerUnavailable {
                    scorer: "file".to_string(),
                    missing: "a scores file (--scores)".to_string(),
                });
            };
            let mut out = Vec::with_capacity(pool.len());
            for p in pool {
                let Some(&score) = scores.get(&p.id) else {
                    return Err(SelectError::MissingScore { id: p.id });
                };
                if !(0.0..=1.0).contains(&score) {
                    return Err(SelectError::InvalidScore {
                        id: p.id,
                        value: score,
                    });
                }
                out.push(ScoredCandidate {
                    candidate: p.clone(),
                    score,
                    components: None,
                });
            }
            out
        }
        ScorerKind::Embedding => {
            let embedder = HashedBagEmbedder::new(scorer.hash_dim);
            let target_vec = embedder.embed(target_question);
            pool.iter()
                .map(|p| {
                    let cos = cosine_similarity(&target_vec, &embedder.embed(&p.question))
                        .expect("hashed vectors share a dimension and are non-zero");
                    ScoredCandidate {
                        candidate: p.clone(),
                        score: rescale_question_sim(cos),
                        components: None,
                    }
                })
                .collect()
        }
        ScorerKind::Skeleton | ScorerKind::Link | ScorerKind::OracleMean => {
            score_against_target(target_question, &target, pool, catalog, scorer)?
        }
    };

    scored.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .expect("scores are finite")
            .then(a.candidate.id.cmp(&b.candidate.id))
    });
    scored.truncate(k);
    Ok(scored)
}

fn score_against_target(
    target_question: &str,
    target: &TargetArtifacts,
    pool: &[QuestionSqlPair],
    catalog: &SchemaCatalog,
    scorer: &Scorer,
) -> Result<Vec<ScoredCandidate>, SelectError> {
    let target_tree = target.postorder.as_ref().expect("gold SQL was required");
    let target_links = target.links.as_ref().expect("gold SQL was required");

    struct Prep<'a> {
        pair: &'a QuestionSqlPair,
        distance: EditDistance,
        links: SchemaLinkSet,
    }
    let mut preps = Vec::with_capacity(pool.len());
    for p in pool {
        let ast = parse_sql(&p.sql).map_err(|source| SelectError::Parse {
            id: Some(p.id),
            source,
        })?;
        let links = extract_links(&ast, catalog).map_err(|source| SelectError::Link {
            id: Some(p.id),
            source,
        })?;
        let tree = PostorderTree::from(&build_skeleton(&ast));
        let distance =
            tree_edit_distance(target_tree, &tree).expect("skeleton trees are non-empty");
        preps.push(Prep {
            pair: p,
            distance,
            links,
        });
    }
    // normalization pool: the target-candidate pairs generated here
    let d_max = preps
        .iter()
        .map(|p| p.distance)
        .max()
        .unwrap_or(EditDistance(0));

    let embedder = HashedBagEmbedder::new(scorer.hash_dim);
    let target_vec = embedder.embed(target_question);

    Ok(preps
        .into_iter()
        .map(|prep| {
            let skeleton_sim = normalized_similarity(prep.distance, d_max);
            let link_sim = jaccard_similarity(target_links, &prep.links);
            match scorer.kind {
                ScorerKind::Skeleton => ScoredCandidate {
                    candidate: prep.pair.clone(),
                    score: skeleton_sim,
                    components: None,
                },
                ScorerKind::Link => ScoredCandidate {
                    candidate: prep.pair.clone(),
                    score: link_sim,
                    components: None,
                },
                _ => {
                    let cos =
                        cosine_similarity(&target_vec, &embedder.embed(&prep.pair.question))
                            .expect("hashed vectors share a dimension and are non-zero");
                    let label = SimilarityLabel::from_components(
                        rescale_question_sim(cos),
                        skeleton_sim,
                        link_sim,
                    );
                    ScoredCandidate {
                        candidate: prep.pair.clone(),
                        score: label.mean,
                        components: Some(label),
                    }
                }
            }
        })
        .collect())
}

/// Assemble the few-shot prompt block: schema DDL, the examples in rank
/// order as question/SQL lines, then the target question. Byte-stable.
pub fn build_prompt(
    examples: &[ScoredCandidate],
    target_question: &str,
    catalog: &SchemaCatalog,
) -> String {
    let mut out = serialize_schema_ddl(catalog);
    out.push('\n');
    for ex in examples {
        out.push_str(&format!(
            "Question: {}\nSQL: {}\n\n",
            ex.candidate.question, ex.candidate.sql
        ));
    }
    out.push_str(&format!("Question: {target_question}\nSQL:\n"));
    out
}
