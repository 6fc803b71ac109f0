//! Candidate-path generation and the "score the path, pick the argmin" driver.

mod lars;
mod omp;

pub use lars::{lars_homotopy, lars_path, LarsEvent, LarsHomotopy};
pub use omp::omp_path;

use itertools::Itertools;

use crate::criteria::{score, CriterionScore, CriterionSpec, ScoreContext};
use crate::error::{Error, Result};
use crate::model::{ols_fit, Dataset, FitResult, Support};

/// Which algorithm produced a path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathSource {
    Omp,
    Lars,
    Exhaustive,
}

/// Why a path ended before `k_max` entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathTruncation {
    /// The residual hit the zero floor; remaining steps are undefined.
    ZeroResidual { step: usize },
    /// The selected column set lost full rank; path kept up to the last
    /// valid step.
    RankDeficient { step: usize },
}

/// Sequence of candidate supports emitted by a selector.
#[derive(Debug, Clone)]
pub struct CandidatePath {
    pub supports: Vec<Support>,
    pub source: PathSource,
    pub truncation: Option<PathTruncation>,
}

impl CandidatePath {
    pub fn len(&self) -> usize {
        self.supports.len()
    }

    pub fn is_empty(&self) -> bool {
        self.supports.is_empty()
    }

    /// First entry of the given cardinality, if any.
    pub fn entry_of_cardinality(&self, k: usize) -> Option<&Support> {
        self.supports.iter().find(|s| s.len() == k)
    }
}

/// Every support of cardinality `1..=k_max`, enumerated in lexicographic
/// order within each cardinality. Intended for oracle tests at tiny `p`;
/// guarded against combinatorial explosion.
pub fn exhaustive_path(dataset: &Dataset, k_max: usize) -> Result<CandidatePath> {
    let p = dataset.p();
    let limit = 1_000_000u64;
    if k_max == 0 || k_max >= dataset.n() {
        return Err(Error::InvalidArgument(format!(
            "k_max must satisfy 1 <= k_max < n, got {k_max} (n = {})",
            dataset.n()
        )));
    }
    let ln_count = crate::criteria::ln_binomial(p, k_max.min(p));
    if ln_count > (limit as f64).ln() {
        return Err(Error::TooLarge { p, k_max, limit });
    }
    let mut supports = Vec::new();
    for k in 1..=k_max.min(p) {
        for combo in (0..p).combinations(k) {
            supports.push(Support::new(combo)?);
        }
    }
    Ok(CandidatePath {
        supports,
        source: PathSource::Exhaustive,
        truncation: None,
    })
}

/// A candidate that could not be scored, with the reason.
#[derive(Debug, Clone)]
pub struct SkippedCandidate {
    pub support: Support,
    pub reason: String,
}

/// Outcome of scoring a path under one criterion.
#[derive(Debug, Clone)]
pub struct SelectionResult {
    pub chosen: Support,
    pub chosen_score: f64,
    /// One entry per successfully scored candidate, in scoring order
    /// (path entries first, then the empty-support baseline).
    pub scores: Vec<CriterionScore>,
    pub skipped: Vec<SkippedCandidate>,
    pub path: CandidatePath,
}

/// Fits every path entry once, appending the empty support as a baseline
/// unless the path already contains it. Shared across criteria so a single
/// path serves them all.
pub fn fit_candidates(
    dataset: &Dataset,
    path: &CandidatePath,
) -> Vec<(Support, Result<FitResult>)> {
    let mut out: Vec<(Support, Result<FitResult>)> = path
        .supports
        .iter()
        .map(|s| (s.clone(), ols_fit(dataset, s)))
        .collect();
    if !path.supports.iter().any(|s| s.is_empty()) {
        let empty = Support::empty();
        let fit = ols_fit(dataset, &empty);
        out.push((empty, fit));
    }
    out
}

/// Argmin over pre-fitted candidates under one criterion. Ties are broken by
/// smallest cardinality, then lexicographically on sorted indices.
pub fn choose_among(
    spec: &CriterionSpec,
    candidates: &[(Support, Result<FitResult>)],
    ctx: &ScoreContext,
) -> Result<(Support, f64, Vec<CriterionScore>, Vec<SkippedCandidate>)> {
    let mut scores = Vec::with_capacity(candidates.len());
    let mut skipped = Vec::new();
    for (support, fit) in candidates {
        match fit {
            Ok(fit) => match score(spec, fit, ctx) {
                Ok(value) => scores.push(CriterionScore {
                    spec: *spec,
                    support: support.clone(),
                    score: value,
                }),
                Err(e) => skipped.push(SkippedCandidate {
                    support: support.clone(),
                    reason: e.to_string(),
                }),
            },
            Err(e) => skipped.push(SkippedCandidate {
                support: support.clone(),
                reason: e.to_string(),
            }),
        }
    }
    let best = scores
        .iter()
        .min_by(|a, b| {
            a.score
                .total_cmp(&b.score)
                .then_with(|| a.support.len().cmp(&b.support.len()))
                .then_with(|| a.support.sorted_indices().cmp(&b.support.sorted_indices()))
        })
        .ok_or_else(|| {
            Error::AllCandidatesFailed(
                skipped
                    .first()
                    .map(|s| s.reason.clone())
                    .unwrap_or_else(|| "no candidates".into()),
            )
        })?;
    Ok((best.support.clone(), best.score, scores.clone(), skipped))
}

/// Scores every support in `path` (plus the empty baseline) under `spec` and
/// returns the argmin. Rank-deficient candidates are skipped and recorded;
/// the call fails only if every candidate fails.
pub fn select(
    dataset: &Dataset,
    path: &CandidatePath,
    spec: &CriterionSpec,
) -> Result<SelectionResult> {
    if path.is_empty() {
        return Err(Error::EmptyPath);
    }
    let candidates = fit_candidates(dataset, path);
    let ctx = ScoreContext::for_dataset(dataset);
    let (chosen, chosen_score, scores, skipped) = choose_among(spec, &candidates, &ctx)?;
    Ok(SelectionResult {
        chosen,
        chosen_score,
        scores,
        skipped,
        path: path.clone(),
    })
}
