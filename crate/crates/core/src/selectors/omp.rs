//! Orthogonal matching pursuit.

use nalgebra::DVector;

use super::{CandidatePath, PathSource, PathTruncation};
use crate::error::{Error, Result};
use crate::model::{ols_fit, Dataset, Support};

/// Relative residual floor: the path stops once `||r|| <= 1e-12 ||y||`.
const ZERO_RESIDUAL_REL: f64 = 1e-12;

/// Greedy residual-correlation selector.
///
/// At step `i` the column maximizing `|a_j^T r| / ||a_j||` over unselected
/// `j` is added (correlation ties broken by smallest index), then the
/// residual is recomputed by a full orthogonal re-projection of `y` onto the
/// selected columns. Normalization affects index choice only; every fit runs
/// against the original columns.
///
/// Returns the nested sequence of prefixes. The path is truncated (and
/// flagged) if the residual vanishes or the selected set loses full rank.
pub fn omp_path(dataset: &Dataset, k_max: usize) -> Result<CandidatePath> {
    let n = dataset.n();
    let p = dataset.p();
    if k_max == 0 || k_max >= n {
        return Err(Error::InvalidArgument(format!(
            "k_max must satisfy 1 <= k_max < n, got {k_max} (n = {n})"
        )));
    }

    let col_norms: Vec<f64> = (0..p).map(|j| dataset.design().column(j).norm()).collect();
    let y_norm = dataset.response().norm();

    let mut supports = Vec::with_capacity(k_max.min(p));
    let mut selected: Vec<usize> = Vec::new();
    let mut residual: DVector<f64> = dataset.response().clone();
    let mut truncation = None;

    for step in 0..k_max.min(p) {
        if residual.norm() <= ZERO_RESIDUAL_REL * y_norm {
            truncation = Some(PathTruncation::ZeroResidual { step });
            break;
        }

        let correlations = dataset.design().transpose() * &residual;
        let mut best: Option<(usize, f64)> = None;
        for j in 0..p {
            if selected.contains(&j) || col_norms[j] == 0.0 {
                continue;
            }
            let c = correlations[j].abs() / col_norms[j];
            // Strict comparison keeps the smallest index on ties.
            if best.map(|(_, b)| c > b).unwrap_or(true) {
                best = Some((j, c));
            }
        }
        let Some((next, _)) = best else {
            break;
        };

        selected.push(next);
        let support = Support::new(selected.clone())?;
        match ols_fit(dataset, &support) {
            Ok(fit) => {
                let a_i = dataset.design().select_columns(support.indices().iter());
                residual = dataset.response() - a_i * &fit.coefficients;
                supports.push(support);
            }
            Err(Error::RankDeficient { .. }) => {
                truncation = Some(PathTruncation::RankDeficient { step });
                break;
            }
            Err(e) => return Err(e),
        }
    }

    Ok(CandidatePath {
        supports,
        source: PathSource::Omp,
        truncation,
    })
}
