//! LASSO regularization path by homotopy (modified LARS, i.e. with
//! sign-violation drops), recorded at the breakpoints where the active
//! support changes.
//!
//! The solver works on unit-normalized columns. For the penalized objective
//! `(1/2N) ||y - Ax||^2 + lambda ||x||_1` the active-set solution is affine
//! in lambda:
//!
//! ```text
//! x_A(lambda) = G^-1 (A_A^T y) - N lambda G^-1 s_A,   G = A_A^T A_A
//! ```
//!
//! so the next breakpoint is the largest lambda below the current one at
//! which either an inactive correlation `|a_j^T r(lambda)| / N` reaches
//! lambda (join) or an active coefficient crosses zero (drop).

use nalgebra::DVector;

use super::{CandidatePath, PathSource, PathTruncation};
use crate::error::{Error, Result};
use crate::model::{Dataset, Support};

/// Coincident breakpoints within this tolerance are tied; the smaller column
/// index wins.
const BREAKPOINT_TIE_TOL: f64 = 1e-12;

/// One support-change event on the path.
#[derive(Debug, Clone)]
pub struct LarsEvent {
    /// Regularization level at which the change happens.
    pub lambda: f64,
    /// Active set immediately after the event, in activation order.
    pub support: Support,
    /// Full-length LASSO solution at `lambda`, on unit-normalized columns.
    pub coefficients: DVector<f64>,
}

/// Full homotopy output: every support-change event plus the candidate path
/// distilled from it.
#[derive(Debug, Clone)]
pub struct LarsHomotopy {
    pub events: Vec<LarsEvent>,
    pub path: CandidatePath,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum EventKind {
    Join { sign: f64 },
    Drop { position: usize },
}

#[derive(Debug, Clone, Copy)]
struct NextEvent {
    lambda: f64,
    column: usize,
    kind: EventKind,
}

/// Runs the homotopy until the active set first reaches `k_max` (or the path
/// completes). Candidate supports are recorded at support-change events;
/// transient post-drop states of lower cardinality than what is already
/// recorded are not emitted, so recorded cardinalities are non-decreasing
/// (a drop-and-add pair shows up as a repeated cardinality).
pub fn lars_homotopy(dataset: &Dataset, k_max: usize) -> Result<LarsHomotopy> {
    let n = dataset.n();
    let p = dataset.p();
    if k_max == 0 || k_max >= n {
        return Err(Error::InvalidArgument(format!(
            "k_max must satisfy 1 <= k_max < n, got {k_max} (n = {n})"
        )));
    }

    // Unit-normalized working copy of the design.
    let mut ah = dataset.design().clone();
    let mut usable = vec![false; p];
    for j in 0..p {
        let norm = ah.column(j).norm();
        if norm > 0.0 {
            let mut col = ah.column_mut(j);
            col /= norm;
            usable[j] = true;
        }
    }
    let y = dataset.response();
    let nf = n as f64;

    // First join at lambda_max = max_j |a_j^T y| / N.
    let c0 = ah.transpose() * y / nf;
    let mut first: Option<(usize, f64)> = None;
    for j in 0..p {
        if !usable[j] {
            continue;
        }
        let mag = c0[j].abs();
        if first.map(|(_, b)| mag > b).unwrap_or(true) {
            first = Some((j, mag));
        }
    }
    let Some((j0, lambda_max)) = first else {
        return Err(Error::InvalidArgument("design matrix has no nonzero columns".into()));
    };
    if lambda_max == 0.0 {
        // y orthogonal to every column (e.g. y = 0): no path.
        return Ok(LarsHomotopy {
            events: Vec::new(),
            path: CandidatePath {
                supports: Vec::new(),
                source: PathSource::Lars,
                truncation: Some(PathTruncation::ZeroResidual { step: 0 }),
            },
        });
    }

    let lambda_floor = 1e-14 * lambda_max;

    let mut active: Vec<usize> = vec![j0];
    let mut signs: Vec<f64> = vec![c0[j0].signum()];
    let mut events = vec![LarsEvent {
        lambda: lambda_max,
        support: Support::new(active.clone())?,
        coefficients: DVector::zeros(p),
    }];
    let mut path_supports = vec![Support::new(active.clone())?];
    let mut last_recorded_card = 1usize;
    let mut lambda_current = lambda_max;
    let mut just_dropped: Option<usize> = None;

    let max_events = 50 + 20 * k_max;
    while active.len() < k_max && events.len() < max_events {
        let k = active.len();
        let ah_a = ah.select_columns(active.iter());
        let gram = ah_a.transpose() * &ah_a;
        let chol = gram.cholesky().ok_or_else(|| Error::RankDeficient {
            support: Support::new(active.clone()).unwrap_or_else(|_| Support::empty()),
            cardinality: k,
            rank: 0,
        })?;
        let x0 = chol.solve(&(ah_a.transpose() * y));
        let w = chol.solve(&DVector::from_column_slice(&signs));
        let equi = &ah_a * &w; // direction of the fitted values in lambda
        let res0 = y - &ah_a * &x0;

        let mut next: Option<NextEvent> = None;
        let mut consider = |cand: NextEvent| {
            let replace = match next {
                None => true,
                Some(best) => {
                    cand.lambda > best.lambda + BREAKPOINT_TIE_TOL
                        || ((cand.lambda - best.lambda).abs() <= BREAKPOINT_TIE_TOL
                            && cand.column < best.column)
                }
            };
            if replace {
                next = Some(cand);
            }
        };

        // Join events: inactive correlation line u + lambda v meets +-lambda.
        for j in 0..p {
            if !usable[j] || active.contains(&j) || just_dropped == Some(j) {
                continue;
            }
            let u = ah.column(j).dot(&res0) / nf;
            let v = ah.column(j).dot(&equi);
            for (u_signed, denom) in [(u, 1.0 - v), (-u, 1.0 + v)] {
                if denom.abs() < 1e-14 {
                    continue;
                }
                let lambda = u_signed / denom;
                if lambda > lambda_floor && lambda <= lambda_current + BREAKPOINT_TIE_TOL {
                    let sign = (u + lambda.min(lambda_current) * v).signum();
                    consider(NextEvent {
                        lambda: lambda.min(lambda_current),
                        column: j,
                        kind: EventKind::Join {
                            sign: if sign == 0.0 { 1.0 } else { sign },
                        },
                    });
                }
            }
        }

        // Drop events: active coefficient x0[m] - N lambda w[m] crosses zero.
        for (m, &col) in active.iter().enumerate() {
            let denom = nf * w[m];
            if denom.abs() < 1e-14 {
                continue;
            }
            let lambda = x0[m] / denom;
            if lambda > lambda_floor && lambda < lambda_current - BREAKPOINT_TIE_TOL {
                consider(NextEvent {
                    lambda,
                    column: col,
                    kind: EventKind::Drop { position: m },
                });
            }
        }

        let Some(event) = next else {
            break; // path complete: the active set carries to lambda -> 0
        };

        // Solution at the breakpoint, governed by the segment just ended.
        let mut coefficients = DVector::zeros(p);
        for (m, &col) in active.iter().enumerate() {
            coefficients[col] = x0[m] - nf * event.lambda * w[m];
        }

        just_dropped = None;
        match event.kind {
            EventKind::Join { sign } => {
                active.push(event.column);
                signs.push(sign);
            }
            EventKind::Drop { position } => {
                active.remove(position);
                signs.remove(position);
                coefficients[event.column] = 0.0;
                just_dropped = Some(event.column);
            }
        }

        events.push(LarsEvent {
            lambda: event.lambda,
            support: Support::new(active.clone())?,
            coefficients,
        });
        if active.len() >= last_recorded_card {
            path_supports.push(Support::new(active.clone())?);
            last_recorded_card = active.len();
        }
        lambda_current = event.lambda;
    }

    Ok(LarsHomotopy {
        events,
        path: CandidatePath {
            supports: path_supports,
            source: PathSource::Lars,
            truncation: None,
        },
    })
}

/// The candidate path alone; see [`lars_homotopy`] for the full event log.
pub fn lars_path(dataset: &Dataset, k_max: usize) -> Result<CandidatePath> {
    Ok(lars_homotopy(dataset, k_max)?.path)
}
