//! Question embedding vectors.
//!
//! Vectors are inputs, not something this crate computes: they load from a
//! JSONL file (`{"id": int, "vector": [float,...], "provider": str}`, one
//! object per line) or come from the deterministic fallback provider so the
//! whole pipeline runs with zero network access.
//!
//! The fallback provider hashes lowercase alphanumeric tokens with FNV-1a
//! (64-bit, offset basis 0xcbf29ce484222325, prime 0x100000001b3) into
//! `dim` count buckets. Empty questions map to a fixed unit vector.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type ExampleId = u32;

pub const HASHED_PROVIDER: &str = "hashed-bag-v1";
pub const DEFAULT_HASH_DIM: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
    pub provider: String,
}

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("embedding dimensions differ: {expected} vs {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("zero vector has no direction")]
    ZeroVector,
    #[error("no embedding for example {id} and no fallback provider")]
    MissingEmbedding { id: ExampleId },
    #[error("embedding for example {id} contains a non-finite value")]
    NonFinite { id: ExampleId },
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

/// Deterministic hashed bag-of-tokens embedder.
#[derive(Debug, Clone)]
pub struct HashedBagEmbedder {
    pub dim: usize,
}

impl Default for HashedBagEmbedder {
    fn default() -> Self {
        HashedBagEmbedder {
            dim: DEFAULT_HASH_DIM,
        }
    }
}

impl HashedBagEmbedder {
    pub fn new(dim: usize) -> Self {
        HashedBagEmbedder { dim: dim.max(1) }
    }

    pub fn embed(&self, text: &str) -> EmbeddingVector {
        let mut values = vec![0.0; self.dim];
        let mut any = false;
        for token in tokens(text) {
            let bucket = (fnv1a64(token.as_bytes()) % self.dim as u64) as usize;
            values[bucket] += 1.0;
            any = true;
        }
        if !any {
            values[0] = 1.0;
        }
        EmbeddingVector {
            values,
            provider: HASHED_PROVIDER.to_string(),
        }
    }
}

fn tokens(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

#[derive(Deserialize)]
struct RawEmbeddingLine {
    id: ExampleId,
    vector: Vec<f64>,
    #[serde(default)]
    provider: Option<String>,
}

/// Precomputed vectors keyed by example id, with an optional fallback
/// provider for ids (or ad-hoc texts) that have no stored vector.
#[derive(Debug, Clone, Default)]
pub struct EmbeddingSet {
    vectors: BTreeMap<ExampleId, EmbeddingVector>,
    fallback: Option<HashedBagEmbedder>,
}

impl EmbeddingSet {
    /// Load a JSONL embedding file; entries must be finite and one
    /// provider's vectors must all share a dimension.
    pub fn from_jsonl(path: &Path) -> Result<Self, EmbeddingError> {
        let text = fs::read_to_string(path).map_err(|source| EmbeddingError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut vectors = BTreeMap::new();
        let mut provider_dims: BTreeMap<String, usize> = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let raw: RawEmbeddingLine =
                serde_json::from_str(line).map_err(|source| EmbeddingError::Format {
                    path: path.display().to_string(),
                    line: i + 1,
                    source,
                })?;
            if raw.vector.iter().any(|v| !v.is_finite()) {
                return Err(EmbeddingError::NonFinite { id: raw.id });
            }
            let provider = raw.provider.unwrap_or_else(|| "unspecified".to_string());
            let dim = *provider_dims
                .entry(provider.clone())
                .or_insert(raw.vector.len());
            if dim != raw.vector.len() {
                return Err(EmbeddingError::DimensionMismatch {
                    expected: dim,
                    got: raw.vector.len(),
                });
            }
            vectors.insert(
                raw.id,
                EmbeddingVector {
                    values: raw.vector,
                    provider,
                },
            );
        }
        Ok(EmbeddingSet {
            vectors,
            fallback: None,
        })
    }

    /// A set with no stored vectors that answers everything via hashing.
    pub fn hashed(dim: usize) -> Self {
        EmbeddingSet {
            vectors: BTreeMap::new(),
            fallback: Some(HashedBagEmbedder::new(dim)),
        }
    }

    pub fn with_fallback(mut self, dim: usize) -> Self {
        self.fallback = Some(HashedBagEmbedder::new(dim));
        self
    }

    pub fn insert(&mut self, id: ExampleId, vector: EmbeddingVector) {
        self.vectors.insert(id, vector);
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn has_fallback(&self) -> bool {
        self.fallback.is_some()
    }

    /// Vector for an example: stored vector first, fallback hash of the
    /// question text otherwise.
    pub fn vector_for(
        &self,
        id: ExampleId,
        question: &str,
    ) -> Result<EmbeddingVector, EmbeddingError> {
        if let Some(v) = self.vectors.get(&id) {
            return Ok(v.clone());
        }
        match &self.fallback {
            Some(f) => Ok(f.embed(question)),
            None => Err(EmbeddingError::MissingEmbedding { id }),
        }
    }
}
