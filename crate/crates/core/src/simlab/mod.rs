//! Monte Carlo benchmark lab: synthetic data generation, SNR calibration,
//! probability-of-correct-model-selection sweeps, and the statistical
//! property audits backing the criteria's distributional assumptions.

mod audits;
mod rng;
mod sweep;

pub use audits::{
    default_audit_generator, identifiability_audit, null_variance_audit, run_default_audits,
    tail_bound_audit, tail_bound_trend, AuditCheck, AuditSuite, IdentifiabilityReport,
    NullVarianceReport, TailBoundReport, TailBoundTrend, TrendCheck, DEFAULT_AUDIT_SEED, TAU_ID,
};
pub use rng::{trial_rng, StreamRole};
pub use sweep::{
    run_sweep, AxisPoint, SelectorKind, SweepAxis, SweepPlan, SweepResult, TrialRecord,
};

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dataset, Support};
use crate::selectors::CandidatePath;

/// How the parameter dimension relates to the sample size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PRule {
    /// Fixed dimension, independent of `n`.
    Fixed(usize),
    /// Growth rule `p = round(n^d)`.
    Power(f64),
}

/// Declarative description of one synthetic data source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub n: usize,
    pub p_rule: PRule,
    /// True nonzero coefficients; the true support is `{0, .., x_s.len())`.
    pub x_s: Vec<f64>,
    pub snr_db: f64,
    /// Exact zero-noise mode. Encoded as a flag rather than an infinite
    /// SNR so the variance arithmetic never sees non-finite values.
    pub noiseless: bool,
    pub seed: u64,
}

impl GeneratorConfig {
    pub fn k0(&self) -> usize {
        self.x_s.len()
    }

    /// Effective parameter dimension for the configured sample size.
    pub fn p(&self) -> Result<usize> {
        let p = match self.p_rule {
            PRule::Fixed(p) => p,
            PRule::Power(d) => {
                if !(d.is_finite() && d > 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "power rule exponent must be positive and finite, got {d}"
                    )));
                }
                (self.n as f64).powf(d).round() as usize
            }
        };
        if p < self.k0() {
            return Err(Error::InvalidArgument(format!(
                "p = {p} is smaller than the true cardinality k0 = {}",
                self.k0()
            )));
        }
        if p == 0 {
            return Err(Error::InvalidArgument("p must be positive".into()));
        }
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidArgument("n must be positive".into()));
        }
        if self.k0() == 0 {
            return Err(Error::InvalidArgument("x_s must be non-empty".into()));
        }
        if self.k0() >= self.n {
            return Err(Error::InvalidArgument(format!(
                "k0 = {} must be smaller than n = {}",
                self.k0(),
                self.n
            )));
        }
        if self.x_s.iter().any(|v| !v.is_finite() || *v == 0.0) {
            return Err(Error::InvalidArgument(
                "true coefficients must be finite and nonzero".into(),
            ));
        }
        if !self.snr_db.is_finite() {
            return Err(Error::InvalidArgument("snr_db must be finite".into()));
        }
        self.p()?;
        Ok(())
    }

    pub fn with_n(&self, n: usize) -> Self {
        Self { n, ..self.clone() }
    }

    pub fn with_snr_db(&self, snr_db: f64) -> Self {
        Self {
            snr_db,
            ..self.clone()
        }
    }

    /// True support `{0, .., k0)`.
    pub fn true_support(&self) -> Support {
        Support::new((0..self.k0()).collect()).expect("indices are distinct")
    }
}

/// Design matrix for one trial: i.i.d. standard normal entries, drawn
/// row-major from the trial's design stream.
pub fn draw_design(seed: u64, trial: u64, n: usize, p: usize) -> DMatrix<f64> {
    let mut rng = trial_rng(seed, trial, StreamRole::Design);
    let data: Vec<f64> = (0..n * p).map(|_| StandardNormal.sample(&mut rng)).collect();
    DMatrix::from_row_slice(n, p, &data)
}

/// Noise vector for one trial at the given variance.
pub fn draw_noise(seed: u64, trial: u64, n: usize, sigma2: f64) -> DVector<f64> {
    let mut rng = trial_rng(seed, trial, StreamRole::Noise);
    let sigma = sigma2.sqrt();
    DVector::from_fn(n, |_, _| {
        let z: f64 = StandardNormal.sample(&mut rng);
        sigma * z
    })
}

/// Signal and noise variance of one trial, before noise is applied.
/// Shared with the audits so they see exactly the sweep's quantities.
pub(crate) struct TrialSignal {
    pub design: DMatrix<f64>,
    pub mean: DVector<f64>,
    pub sigma2: f64,
}

pub(crate) fn trial_signal(config: &GeneratorConfig, trial: u64) -> Result<TrialSignal> {
    config.validate()?;
    let n = config.n;
    let p = config.p()?;
    let design = draw_design(config.seed, trial, n, p);
    let x_s = DVector::from_column_slice(&config.x_s);
    let mean = design.columns(0, config.k0()) * &x_s;
    let sigma2 = if config.noiseless {
        0.0
    } else {
        let sigma2_s = mean.norm_squared() / n as f64;
        sigma2_s / 10f64.powf(config.snr_db / 10.0)
    };
    Ok(TrialSignal {
        design,
        mean,
        sigma2,
    })
}

/// Draws one trial: a fresh design matrix, noise calibrated from the SNR
/// against this trial's signal power `||A_S x_S||^2 / n`, and the response
/// `y = A_S x_S + e`. Fully determined by `(config.seed, trial)`.
pub fn generate_trial(config: &GeneratorConfig, trial: u64) -> Result<(Dataset, Support)> {
    let signal = trial_signal(config, trial)?;
    let y = if config.noiseless {
        signal.mean
    } else {
        let e = draw_noise(config.seed, trial, config.n, signal.sigma2);
        signal.mean + e
    };
    let dataset = Dataset::new(signal.design, y)?;
    Ok((dataset, config.true_support()))
}

/// Path entry of cardinality `k0`; with a nested OMP path this is the prefix
/// of length `k0`, so correctness means the selector alone recovered the
/// support.
pub fn oracle_select(path: &CandidatePath, k0: usize) -> Result<Support> {
    path.entry_of_cardinality(k0)
        .cloned()
        .ok_or(Error::NoSuchCardinality(k0))
}
