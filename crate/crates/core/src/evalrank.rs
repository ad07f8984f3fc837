//! Rank-correlation evaluation of similarity predictors against the
//! mean-of-three oracle ordering.
//!
//! Kendall tau uses the tau-b tie correction
//! `(C - D) / sqrt((n0 - t_x)(n0 - t_y))`; oracle labels contain ties (many
//! identical-skeleton pairs), so the uncorrected tau-a would be biased.
//! Top-k sets break score ties by ascending candidate id, which makes the
//! identity prediction score exactly 1.0 at every k.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::PairRecord;
use crate::embedding::ExampleId;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("score vectors have different lengths: {expected} vs {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("ranking is degenerate (constant scores or fewer than two entries)")]
    Degenerate,
    #[error("k = {k} exceeds the candidate count {len} (or is zero)")]
    KTooLarge { k: usize, len: usize },
    #[error("scores must be finite")]
    NonFinite,
    #[error("{} prediction(s) missing, first: ({}, {})", pairs.len(), pairs[0].0, pairs[0].1)]
    MissingPrediction { pairs: Vec<(ExampleId, ExampleId)> },
    #[error("{} reference label(s) missing, first: ({}, {})", pairs.len(), pairs[0].0, pairs[0].1)]
    MissingReference { pairs: Vec<(ExampleId, ExampleId)> },
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

/// Tie-corrected (tau-b) rank correlation between two aligned score vectors.
///
/// Both vectors constant-free in at least one direction is required: a
/// constant vector carries no ordering and yields [`EvalError::Degenerate`]
/// instead of a number.
pub fn kendall_tau(reference: &[f64], predicted: &[f64]) -> Result<f64, EvalError> {
    if reference.len() != predicted.len() {
        return Err(EvalError::LengthMismatch {
            expected: reference.len(),
            got: predicted.len(),
        });
    }
    let n = reference.len();
    if n < 2 {
        return Err(EvalError::Degenerate);
    }
    if reference.iter().chain(predicted).any(|v| !v.is_finite()) {
        return Err(EvalError::NonFinite);
    }

    let mut concordant = 0u64;
    let mut discordant = 0u64;
    let mut tied_x = 0u64;
    let mut tied_y = 0u64;
    for i in 0..n {
        for j in i + 1..n {
            let dx = reference[i].partial_cmp(&reference[j]).expect("finite");
            let dy = predicted[i].partial_cmp(&predicted[j]).expect("finite");
            match (dx, dy) {
                (std::cmp::Ordering::Equal, std::cmp::Ordering::Equal) => {
                    tied_x += 1;
                    tied_y += 1;
                }
                (std::cmp::Ordering::Equal, _) => tied_x += 1,
                (_, std::cmp::Ordering::Equal) => tied_y += 1,
                (a, b) if a == b => concordant += 1,
                _ => discordant += 1,
            }
        }
    }

    let n0 = (n as u64 * (n as u64 - 1)) / 2;
    if tied_x == n0 || tied_y == n0 {
        return Err(EvalError::Degenerate);
    }
    let num = concordant as f64 - discordant as f64;
    let den = ((n0 - tied_x) as f64 * (n0 - tied_y) as f64).sqrt();
    Ok((num / den).clamp(-1.0, 1.0))
}

/// Indices of the top-k scores, ties broken by ascending index.
fn top_k_indices(scores: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .expect("finite scores")
            .then(a.cmp(&b))
    });
    idx.truncate(k);
    idx
}

/// Fraction of the reference top-k recovered in the predicted top-k.
pub fn precision_at_k(reference: &[f64], predicted: &[f64], k: usize) -> Result<f64, EvalError> {
    if reference.len() != predicted.len() {
        return Err(EvalError::LengthMismatch {
            expected: reference.len(),
            got: predicted.len(),
        });
    }
    if k == 0 || k > reference.len() {
        return Err(EvalError::KTooLarge {
            k,
            len: reference.len(),
        });
    }
    if reference.iter().chain(predicted).any(|v| !v.is_finite()) {
        return Err(EvalError::NonFinite);
    }
    let top_ref: std::collections::BTreeSet<usize> =
        top_k_indices(reference, k).into_iter().collect();
    let hits = top_k_indices(predicted, k)
        .into_iter()
        .filter(|i| top_ref.contains(i))
        .count();
    Ok(hits as f64 / k as f64)
}

/// Logit-to-score transform used when predictions arrive as raw logits.
pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Predicted scores keyed by ordered `(anchor_id, candidate_id)`.
#[derive(Debug, Clone, Default)]
pub struct PredictionSet {
    pub scores: BTreeMap<(ExampleId, ExampleId), f64>,
}

#[derive(Deserialize)]
struct RawPrediction {
    anchor_id: ExampleId,
    candidate_id: ExampleId,
    score: f64,
}

impl PredictionSet {
    pub fn from_scores(scores: BTreeMap<(ExampleId, ExampleId), f64>) -> Self {
        PredictionSet { scores }
    }

    /// Load JSONL `{"anchor_id": int, "candidate_id": int, "score": float}`.
    pub fn from_jsonl(path: &Path) -> Result<Self, EvalError> {
        let text = fs::read_to_string(path).map_err(|source| EvalError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut scores = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let raw: RawPrediction =
                serde_json::from_str(line).map_err(|source| EvalError::Format {
                    path: path.display().to_string(),
                    line: i + 1,
                    source,
                })?;
            if !raw.score.is_finite() {
                return Err(EvalError::NonFinite);
            }
            scores.insert((raw.anchor_id, raw.candidate_id), raw.score);
        }
        Ok(PredictionSet { scores })
    }

    /// Treat every stored score as a logit and squash it through the sigmoid.
    pub fn apply_sigmoid(mut self) -> Self {
        for v in self.scores.values_mut() {
            *v = sigmoid(*v);
        }
        self
    }
}

/// Mean absolute error of predictions against reference labels.
pub fn mean_absolute_error(
    predictions: &PredictionSet,
    reference: &BTreeMap<(ExampleId, ExampleId), f64>,
) -> Result<f64, EvalError> {
    if predictions.scores.is_empty() {
        return Ok(0.0);
    }
    let missing: Vec<(ExampleId, ExampleId)> = predictions
        .scores
        .keys()
        .filter(|k| !reference.contains_key(*k))
        .copied()
        .collect();
    if !missing.is_empty() {
        return Err(EvalError::MissingReference { pairs: missing });
    }
    let total: f64 = predictions
        .scores
        .iter()
        .map(|(k, pred)| (reference[k] - pred).abs())
        .sum();
    Ok(total / predictions.scores.len() as f64)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnchorReport {
    pub anchor_id: ExampleId,
    pub n_candidates: usize,
    /// Tau-b against the oracle, absent when the anchor's scores are
    /// degenerate (constant reference or fewer than two candidates).
    pub tau: Option<f64>,
    pub precision: BTreeMap<usize, f64>,
    /// Requested ks that exceed this anchor's candidate count.
    pub infeasible_ks: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankingReport {
    pub n_anchors: usize,
    /// Anchors excluded from the tau mean because their ranking was
    /// degenerate.
    pub n_tau_degenerate: usize,
    pub mean_tau: Option<f64>,
    /// Mean precision per k over the anchors where that k was feasible.
    pub mean_precision: BTreeMap<usize, f64>,
    pub mae: f64,
    pub tie_policy: String,
    pub per_anchor: Vec<AnchorReport>,
}

pub const DEFAULT_KS: &[usize] = &[1, 5, 10, 15, 20];

/// Score a prediction set against an oracle corpus, per anchor and
/// aggregated.
pub fn evaluate(
    predictions: &PredictionSet,
    corpus: &[PairRecord],
    ks: &[usize],
) -> Result<RankingReport, EvalError> {
    let mut by_anchor: BTreeMap<ExampleId, Vec<&PairRecord>> = BTreeMap::new();
    for r in corpus {
        by_anchor.entry(r.anchor_id).or_default().push(r);
    }

    let missing: Vec<(ExampleId, ExampleId)> = corpus
        .iter()
        .filter(|r| !predictions.scores.contains_key(&(r.anchor_id, r.candidate_id)))
        .map(|r| (r.anchor_id, r.candidate_id))
        .collect();
    if !missing.is_empty() {
        return Err(EvalError::MissingPrediction { pairs: missing });
    }

    let mut per_anchor = Vec::with_capacity(by_anchor.len());
    let mut tau_sum = 0.0;
    let mut tau_count = 0usize;
    let mut degenerate = 0usize;
    let mut precision_sums: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    let mut reference_labels = BTreeMap::new();

    for (anchor_id, mut records) in by_anchor {
        records.sort_by_key(|r| r.candidate_id);
        records.dedup_by_key(|r| r.candidate_id);
        let reference: Vec<f64> = records.iter().map(|r| r.label).collect();
        let predicted: Vec<f64> = records
            .iter()
            .map(|r| predictions.scores[&(r.anchor_id, r.candidate_id)])
            .collect();
        for r in &records {
            reference_labels.insert((r.anchor_id, r.candidate_id), r.label);
        }

        let tau = match kendall_tau(&reference, &predicted) {
            Ok(t) => {
                tau_sum += t;
                tau_count += 1;
                Some(t)
            }
            Err(EvalError::Degenerate) => {
                degenerate += 1;
                None
            }
            Err(e) => return Err(e),
        };

        let mut precision = BTreeMap::new();
        let mut infeasible = Vec::new();
        for &k in ks {
            if k == 0 || k > reference.len() {
                infeasible.push(k);
                continue;
            }
            let p = precision_at_k(&reference, &predicted, k)?;
            precision.insert(k, p);
            let entry = precision_sums.entry(k).or_insert((0.0, 0));
            entry.0 += p;
            entry.1 += 1;
        }

        per_anchor.push(AnchorReport {
            anchor_id,
            n_candidates: reference.len(),
            tau,
            precision,
            infeasible_ks: infeasible,
        });
    }

    // restrict MAE to the corpus pairs so extra predictions do not error
    let corpus_predictions = PredictionSet::from_scores(
        reference_labels
            .keys()
            .map(|k| (*k, predictions.scores[k]))
            .collect(),
    );
    let mae = mean_absolute_error(&corpus_predictions, &reference_labels)?;

    Ok(RankingReport {
        n_anchors: per_anchor.len(),
        n_tau_degenerate: degenerate,
        mean_tau: (tau_count > 0).then(|| tau_sum / tau_count as f64),
        mean_precision: precision_sums
            .into_iter()
            .map(|(k, (sum, count))| (k, sum / count as f64))
            .collect(),
        mae,
        tie_policy: "tau-b; top-k ties broken by ascending candidate id".to_string(),
        per_anchor,
    })
}
