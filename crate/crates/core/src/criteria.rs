//! Closed-form scoring of a candidate support.
//!
//! Four criteria share the same goodness-of-fit term `N ln(sigma2_hat)` and
//! differ in their penalties:
//!
//! ```text
//! BIC    = N ln s2_I + k ln N
//! EBIC   = N ln s2_I + k ln N + 2 gamma ln C(p, k)
//! EFIC   = N ln rss_I + k ln N + ln|A_I^T A_I| - (k+2) ln rss_I + 2 c k ln p
//! EBICR  = N ln s2_I + k ln(N/2pi) + (k+2) ln(s2_0 / s2_I) + 2 k zeta ln p
//! ```
//!
//! EFIC carries a data-dependent penalty through the raw residual energy and
//! is therefore sensitive to a rescaling of `y`; EBICR neutralizes that with
//! the `s2_0 / s2_I` ratio. The pairwise score-difference forms are also
//! implemented directly so that tests can cross-check the two routes.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::model::{ols_fit, Dataset, FitResult, Support};

/// Variance floor applied inside logarithms only. Noiseless test instances
/// produce `rss = 0` and must not crash; any genuine comparison at that scale
/// is already decided long before the clamp matters.
pub const EPS_VAR: f64 = 1e-300;

/// Which criterion to score with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CriterionKind {
    Bic,
    Ebic,
    Efic,
    EbicR,
}

impl CriterionKind {
    pub fn id(&self) -> &'static str {
        match self {
            CriterionKind::Bic => "bic",
            CriterionKind::Ebic => "ebic",
            CriterionKind::Efic => "efic",
            CriterionKind::EbicR => "ebicr",
        }
    }
}

impl std::str::FromStr for CriterionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bic" => Ok(CriterionKind::Bic),
            "ebic" => Ok(CriterionKind::Ebic),
            "efic" => Ok(CriterionKind::Efic),
            "ebicr" | "ebic_r" | "ebic-r" => Ok(CriterionKind::EbicR),
            other => Err(Error::InvalidArgument(format!(
                "unknown criterion '{other}' (expected bic|ebic|efic|ebicr)"
            ))),
        }
    }
}

/// A criterion plus its tuning value (gamma for EBIC, c for EFIC, zeta for
/// EBICR; ignored for BIC).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriterionSpec {
    pub kind: CriterionKind,
    pub tuning: f64,
}

impl CriterionSpec {
    pub fn new(kind: CriterionKind, tuning: f64) -> Result<Self> {
        if !tuning.is_finite() || tuning < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "tuning must be finite and >= 0, got {tuning}"
            )));
        }
        Ok(Self { kind, tuning })
    }

    pub fn bic() -> Self {
        Self {
            kind: CriterionKind::Bic,
            tuning: 0.0,
        }
    }

    pub fn ebic(gamma: f64) -> Result<Self> {
        Self::new(CriterionKind::Ebic, gamma)
    }

    pub fn efic(c: f64) -> Result<Self> {
        Self::new(CriterionKind::Efic, c)
    }

    pub fn ebic_r(zeta: f64) -> Result<Self> {
        Self::new(CriterionKind::EbicR, zeta)
    }

    pub fn label(&self) -> String {
        match self.kind {
            CriterionKind::Bic => "bic".into(),
            _ => format!("{} ({})", self.kind.id(), self.tuning),
        }
    }
}

/// One scored candidate.
#[derive(Debug, Clone)]
pub struct CriterionScore {
    pub spec: CriterionSpec,
    pub support: Support,
    pub score: f64,
}

/// Per-dataset quantities every criterion needs besides the fit itself.
#[derive(Debug, Clone, Copy)]
pub struct ScoreContext {
    pub n: usize,
    pub p: usize,
    /// Null variance `||y||^2 / n`.
    pub sigma2_0: f64,
}

impl ScoreContext {
    pub fn for_dataset(dataset: &Dataset) -> Self {
        Self {
            n: dataset.n(),
            p: dataset.p(),
            sigma2_0: crate::model::null_variance(dataset).value(),
        }
    }
}

/// `ln C(p, k)` through log-gamma; factorials are never formed.
pub fn ln_binomial(p: usize, k: usize) -> f64 {
    if k > p {
        return f64::NEG_INFINITY;
    }
    ln_gamma(p as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((p - k) as f64 + 1.0)
}

fn clamped_ln(v: f64) -> f64 {
    v.max(EPS_VAR).ln()
}

pub fn score_bic(fit: &FitResult, n: usize) -> f64 {
    let k = fit.support.len() as f64;
    n as f64 * clamped_ln(fit.sigma2_hat) + k * (n as f64).ln()
}

pub fn score_ebic(fit: &FitResult, n: usize, p: usize, gamma: f64) -> f64 {
    let k = fit.support.len();
    score_bic(fit, n) + 2.0 * gamma * ln_binomial(p, k)
}

/// Scores EFIC. Fails with [`Error::DegenerateResidual`] when the residual
/// energy falls to the clamp floor, because the data-dependent penalty
/// `-(k+2) ln rss` is meaningless there.
pub fn score_efic(fit: &FitResult, n: usize, p: usize, c: f64) -> Result<f64> {
    if fit.rss <= EPS_VAR {
        return Err(Error::DegenerateResidual);
    }
    let k = fit.support.len() as f64;
    let ln_rss = fit.rss.ln();
    Ok(n as f64 * ln_rss + k * (n as f64).ln() + fit.gram_logdet - (k + 2.0) * ln_rss
        + 2.0 * c * k * (p as f64).ln())
}

pub fn score_ebic_r(fit: &FitResult, sigma2_0: f64, n: usize, p: usize, zeta: f64) -> f64 {
    let k = fit.support.len() as f64;
    let ln_var = clamped_ln(fit.sigma2_hat);
    let ln_var0 = clamped_ln(sigma2_0);
    n as f64 * ln_var + k * (n as f64 / TAU).ln() + (k + 2.0) * (ln_var0 - ln_var)
        + 2.0 * k * zeta * (p as f64).ln()
}

/// Scores `fit` under `spec`.
pub fn score(spec: &CriterionSpec, fit: &FitResult, ctx: &ScoreContext) -> Result<f64> {
    match spec.kind {
        CriterionKind::Bic => Ok(score_bic(fit, ctx.n)),
        CriterionKind::Ebic => Ok(score_ebic(fit, ctx.n, ctx.p, spec.tuning)),
        CriterionKind::Efic => score_efic(fit, ctx.n, ctx.p, spec.tuning),
        CriterionKind::EbicR => Ok(score_ebic_r(fit, ctx.sigma2_0, ctx.n, ctx.p, spec.tuning)),
    }
}

/// `score(I) - score(S)` evaluated through the direct closed-form difference
/// expressions rather than by subtracting two score calls. Serves as an
/// independent algebraic route for the invariance tests.
pub fn score_difference(
    spec: &CriterionSpec,
    dataset: &Dataset,
    i: &Support,
    s: &Support,
) -> Result<f64> {
    let fit_i = ols_fit(dataset, i)?;
    let fit_s = ols_fit(dataset, s)?;
    let ctx = ScoreContext::for_dataset(dataset);
    let n = ctx.n as f64;
    let k = i.len() as f64;
    let k0 = s.len() as f64;
    let delta = k - k0;
    let ln_p = (ctx.p as f64).ln();

    match spec.kind {
        CriterionKind::Bic => {
            let d = n * (clamped_ln(fit_i.sigma2_hat) - clamped_ln(fit_s.sigma2_hat))
                + delta * n.ln();
            Ok(d)
        }
        CriterionKind::Ebic => {
            let d = n * (clamped_ln(fit_i.sigma2_hat) - clamped_ln(fit_s.sigma2_hat))
                + delta * n.ln()
                + 2.0 * spec.tuning
                    * (ln_binomial(ctx.p, i.len()) - ln_binomial(ctx.p, s.len()));
            Ok(d)
        }
        CriterionKind::Efic => {
            if fit_i.rss <= EPS_VAR || fit_s.rss <= EPS_VAR {
                return Err(Error::DegenerateResidual);
            }
            let ln_ri = fit_i.rss.ln();
            let ln_rs = fit_s.rss.ln();
            Ok((n - 2.0) * (ln_ri - ln_rs) + (fit_i.gram_logdet - fit_s.gram_logdet)
                - k * ln_ri
                + k0 * ln_rs
                + delta * (n.ln() + 2.0 * spec.tuning * ln_p))
        }
        CriterionKind::EbicR => {
            let ln_vi = clamped_ln(fit_i.sigma2_hat);
            let ln_vs = clamped_ln(fit_s.sigma2_hat);
            let ln_v0 = clamped_ln(ctx.sigma2_0);
            Ok((n - 2.0) * (ln_vi - ln_vs) - k * ln_vi + k0 * ln_vs + delta * ln_v0
                + delta * ((n / TAU).ln() + 2.0 * spec.tuning * ln_p))
        }
    }
}
