//! Probability-of-correct-model-selection sweeps.
//!
//! One sweep runs `trials` independent trials at every axis value. Each trial
//! generates fresh data, builds a single candidate path, and scores that
//! shared path under every configured criterion plus the cardinality oracle.
//! Results are deterministic in `(seed, plan)`; the worker count only
//! distributes work.

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::{generate_trial, oracle_select, GeneratorConfig};
use crate::criteria::{CriterionSpec, ScoreContext};
use crate::error::{Error, Result};
use crate::model::Support;
use crate::selectors::{fit_candidates, lars_path, omp_path, choose_among};

/// Which quantity the sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    SnrDb,
    SampleSize,
}

impl SweepAxis {
    pub fn id(&self) -> &'static str {
        match self {
            SweepAxis::SnrDb => "snr_db",
            SweepAxis::SampleSize => "n",
        }
    }
}

/// Path-generating algorithm used for the sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectorKind {
    Omp,
    Lars,
}

impl SelectorKind {
    pub fn id(&self) -> &'static str {
        match self {
            SelectorKind::Omp => "omp",
            SelectorKind::Lars => "lars",
        }
    }
}

impl std::str::FromStr for SelectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "omp" => Ok(SelectorKind::Omp),
            "lars" | "lasso" => Ok(SelectorKind::Lars),
            other => Err(Error::InvalidArgument(format!(
                "unknown selector '{other}' (expected omp|lars)"
            ))),
        }
    }
}

/// Declarative sweep description.
#[derive(Debug, Clone)]
pub struct SweepPlan {
    pub generator: GeneratorConfig,
    pub axis: SweepAxis,
    pub axis_values: Vec<f64>,
    pub criteria: Vec<CriterionSpec>,
    pub selector: SelectorKind,
    /// Path length cap; defaults to `min(n / 2, 30)`.
    pub k_max: Option<usize>,
    pub trials: usize,
    /// Worker threads; 0 means one per logical CPU.
    pub workers: usize,
    /// Debug knob: multiply each trial's response by this constant before
    /// selection. 1.0 leaves trials untouched.
    pub y_scale: f64,
}

impl SweepPlan {
    pub fn new(
        generator: GeneratorConfig,
        axis: SweepAxis,
        axis_values: Vec<f64>,
        criteria: Vec<CriterionSpec>,
        selector: SelectorKind,
        trials: usize,
    ) -> Self {
        Self {
            generator,
            axis,
            axis_values,
            criteria,
            selector,
            k_max: None,
            trials,
            workers: 0,
            y_scale: 1.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidArgument("trials must be >= 1".into()));
        }
        if self.axis_values.is_empty() {
            return Err(Error::InvalidArgument("axis values must be non-empty".into()));
        }
        if self.axis_values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(
                "axis values must be strictly increasing".into(),
            ));
        }
        if self.criteria.is_empty() {
            return Err(Error::InvalidArgument("criteria list must be non-empty".into()));
        }
        if !(self.y_scale.is_finite() && self.y_scale > 0.0) {
            return Err(Error::InvalidArgument("y_scale must be positive".into()));
        }
        self.generator.validate()?;
        for &value in &self.axis_values {
            self.config_at(value)?.validate()?;
        }
        Ok(())
    }

    fn config_at(&self, axis_value: f64) -> Result<GeneratorConfig> {
        match self.axis {
            SweepAxis::SnrDb => Ok(self.generator.with_snr_db(axis_value)),
            SweepAxis::SampleSize => {
                if axis_value < 1.0 || axis_value.fract() != 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "sample-size axis values must be positive integers, got {axis_value}"
                    )));
                }
                Ok(self.generator.with_n(axis_value as usize))
            }
        }
    }

    fn k_max_for(&self, n: usize, k0: usize) -> usize {
        self.k_max.unwrap_or_else(|| (n / 2).min(30)).clamp(k0.max(1), n - 1)
    }

    /// Digest of everything that determines the numbers (worker count and
    /// other run-shape knobs excluded).
    pub fn digest(&self) -> String {
        let mut canon = String::new();
        let g = &self.generator;
        canon.push_str(&format!(
            "n={};p_rule={:?};x_s={:?};snr_db={};noiseless={};seed={};",
            g.n, g.p_rule, g.x_s, g.snr_db, g.noiseless, g.seed
        ));
        canon.push_str(&format!(
            "axis={};values={:?};selector={};k_max={:?};trials={};y_scale={};",
            self.axis.id(),
            self.axis_values,
            self.selector.id(),
            self.k_max,
            self.trials,
            self.y_scale
        ));
        for spec in &self.criteria {
            canon.push_str(&format!("{}:{};", spec.kind.id(), spec.tuning));
        }
        let hash = Sha256::digest(canon.as_bytes());
        hash.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

/// Outcome of one trial under one criterion.
#[derive(Debug, Clone)]
pub struct TrialRecord {
    pub trial_index: u64,
    pub criterion: CriterionSpec,
    /// `None` when the selector itself failed; counted as incorrect.
    pub chosen: Option<Support>,
    pub correct: bool,
    pub seed_used: u64,
}

/// Aggregated results at one axis value.
#[derive(Debug, Clone)]
pub struct AxisPoint {
    pub axis_value: f64,
    /// Correct-selection counts, aligned with the plan's criteria order.
    pub correct_counts: Vec<u64>,
    pub oracle_correct: u64,
    /// Trials whose selector failed outright (tallied separately; they also
    /// count as incorrect everywhere).
    pub selector_failures: u64,
    pub records: Vec<TrialRecord>,
}

/// Full sweep output.
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub criteria: Vec<CriterionSpec>,
    pub trials: usize,
    pub config_digest: String,
    pub points: Vec<AxisPoint>,
}

impl SweepResult {
    pub fn pcms(&self, criterion_index: usize, point_index: usize) -> f64 {
        self.points[point_index].correct_counts[criterion_index] as f64 / self.trials as f64
    }

    pub fn oracle_pcms(&self, point_index: usize) -> f64 {
        self.points[point_index].oracle_correct as f64 / self.trials as f64
    }

    /// Stable CSV rendering: one row per (axis value, criterion) plus an
    /// oracle row per axis value. LF line endings, `.` decimal points.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("axis_value,criterion,tuning,trials,correct_count,pcms\n");
        for point in &self.points {
            for (ci, spec) in self.criteria.iter().enumerate() {
                out.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    point.axis_value,
                    spec.kind.id(),
                    spec.tuning,
                    self.trials,
                    point.correct_counts[ci],
                    point.correct_counts[ci] as f64 / self.trials as f64
                ));
            }
            out.push_str(&format!(
                "{},oracle,,{},{},{}\n",
                point.axis_value,
                self.trials,
                point.oracle_correct,
                point.oracle_correct as f64 / self.trials as f64
            ));
        }
        out
    }
}

struct TrialOutcome {
    chosen: Vec<Option<Support>>,
    oracle_correct: bool,
    selector_failed: bool,
    truth: Support,
}

fn run_trial(plan: &SweepPlan, config: &GeneratorConfig, trial: u64) -> Result<TrialOutcome> {
    let (dataset, truth) = generate_trial(config, trial)?;
    let dataset = if plan.y_scale != 1.0 {
        dataset.with_scaled_response(plan.y_scale)?
    } else {
        dataset
    };
    let k_max = plan.k_max_for(config.n, config.k0());
    let path = match plan.selector {
        SelectorKind::Omp => omp_path(&dataset, k_max),
        SelectorKind::Lars => lars_path(&dataset, k_max),
    };
    let path = match path {
        Ok(path) if !path.is_empty() => path,
        Ok(_) | Err(_) => {
            return Ok(TrialOutcome {
                chosen: vec![None; plan.criteria.len()],
                oracle_correct: false,
                selector_failed: true,
                truth,
            });
        }
    };

    let candidates = fit_candidates(&dataset, &path);
    let ctx = ScoreContext::for_dataset(&dataset);
    let chosen = plan
        .criteria
        .iter()
        .map(|spec| {
            choose_among(spec, &candidates, &ctx)
                .ok()
                .map(|(support, _, _, _)| support)
        })
        .collect();
    let oracle_correct = oracle_select(&path, config.k0())
        .map(|s| s.set_eq(&truth))
        .unwrap_or(false);
    Ok(TrialOutcome {
        chosen,
        oracle_correct,
        selector_failed: false,
        truth,
    })
}

/// Runs the sweep. Results depend only on the plan (and its seed), never on
/// the worker count.
pub fn run_sweep(plan: &SweepPlan) -> Result<SweepResult> {
    plan.validate()?;

    let run_point = |config: &GeneratorConfig, axis_value: f64| -> Result<AxisPoint> {
        let outcomes: Vec<Result<TrialOutcome>> = (0..plan.trials as u64)
            .into_par_iter()
            .map(|trial| run_trial(plan, config, trial))
            .collect();

        let mut correct_counts = vec![0u64; plan.criteria.len()];
        let mut oracle_correct = 0u64;
        let mut selector_failures = 0u64;
        let mut records = Vec::with_capacity(plan.trials * plan.criteria.len());
        for (trial, outcome) in outcomes.into_iter().enumerate() {
            let outcome = outcome?;
            if outcome.selector_failed {
                selector_failures += 1;
            }
            if outcome.oracle_correct {
                oracle_correct += 1;
            }
            for (ci, spec) in plan.criteria.iter().enumerate() {
                let chosen = outcome.chosen[ci].clone();
                let correct = chosen
                    .as_ref()
                    .map(|s| s.set_eq(&outcome.truth))
                    .unwrap_or(false);
                if correct {
                    correct_counts[ci] += 1;
                }
                records.push(TrialRecord {
                    trial_index: trial as u64,
                    criterion: *spec,
                    chosen,
                    correct,
                    seed_used: config.seed,
                });
            }
        }
        Ok(AxisPoint {
            axis_value,
            correct_counts,
            oracle_correct,
            selector_failures,
            records,
        })
    };

    let compute = || -> Result<Vec<AxisPoint>> {
        plan.axis_values
            .iter()
            .map(|&axis_value| {
                let config = plan.config_at(axis_value)?;
                run_point(&config, axis_value)
            })
            .collect()
    };

    let points = if plan.workers > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(plan.workers)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("worker pool: {e}")))?;
        pool.install(compute)?
    } else {
        compute()?
    };

    Ok(SweepResult {
        axis: plan.axis,
        criteria: plan.criteria.clone(),
        trials: plan.trials,
        config_digest: plan.digest(),
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simlab::PRule;

    fn small_plan() -> SweepPlan {
        let generator = GeneratorConfig {
            n: 40,
            p_rule: PRule::Fixed(60),
            x_s: vec![10.0, 8.0, 6.0, 5.0],
            snr_db: 10.0,
            noiseless: false,
            seed: 99,
        };
        SweepPlan::new(
            generator,
            SweepAxis::SnrDb,
            vec![0.0, 10.0, 20.0],
            vec![
                CriterionSpec::ebic_r(1.0).unwrap(),
                CriterionSpec::ebic(1.0).unwrap(),
                CriterionSpec::bic(),
            ],
            SelectorKind::Omp,
            40,
        )
    }

    #[test]
    fn single_noiseless_trial_is_perfect_for_ebic_r() {
        let generator = GeneratorConfig {
            n: 40,
            p_rule: PRule::Fixed(80),
            x_s: vec![10.0, 8.0, 6.0, 5.0, 4.0],
            snr_db: 0.0,
            noiseless: true,
            seed: 4,
        };
        let plan = SweepPlan::new(
            generator,
            SweepAxis::SnrDb,
            vec![0.0],
            vec![CriterionSpec::ebic_r(1.0).unwrap()],
            SelectorKind::Omp,
            1,
        );
        let result = run_sweep(&plan).unwrap();
        assert_eq!(result.pcms(0, 0), 1.0);
    }

    #[test]
    fn oracle_dominates_every_criterion() {
        let result = run_sweep(&small_plan()).unwrap();
        for (pi, _) in result.points.iter().enumerate() {
            for ci in 0..result.criteria.len() {
                assert!(
                    result.oracle_pcms(pi) >= result.pcms(ci, pi),
                    "criterion {ci} beat the oracle at point {pi}"
                );
            }
        }
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let mut plan = small_plan();
        plan.trials = 20;
        plan.workers = 1;
        let a = run_sweep(&plan).unwrap();
        plan.workers = 4;
        let b = run_sweep(&plan).unwrap();
        assert_eq!(a.to_csv_string(), b.to_csv_string());
        for (pa, pb) in a.points.iter().zip(b.points.iter()) {
            for (ra, rb) in pa.records.iter().zip(pb.records.iter()) {
                assert_eq!(ra.correct, rb.correct);
                assert_eq!(
                    ra.chosen.as_ref().map(|s| s.sorted_indices()),
                    rb.chosen.as_ref().map(|s| s.sorted_indices())
                );
            }
        }
    }

    #[test]
    fn csv_schema_is_stable() {
        let mut plan = small_plan();
        plan.trials = 5;
        plan.axis_values = vec![5.0];
        let result = run_sweep(&plan).unwrap();
        let csv = result.to_csv_string();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "axis_value,criterion,tuning,trials,correct_count,pcms"
        );
        assert!(lines.next().unwrap().starts_with("5,ebicr,1,5,"));
        // One row per criterion plus the oracle.
        assert_eq!(csv.lines().count(), 1 + 4);
        assert!(csv.lines().last().unwrap().starts_with("5,oracle,,5,"));
    }

    #[test]
    fn plan_validation_rejects_bad_inputs() {
        let mut plan = small_plan();
        plan.criteria.clear();
        assert!(run_sweep(&plan).is_err());

        let mut plan = small_plan();
        plan.axis_values = vec![3.0, 1.0];
        assert!(run_sweep(&plan).is_err());

        let mut plan = small_plan();
        plan.trials = 0;
        assert!(run_sweep(&plan).is_err());
    }

    #[test]
    fn digest_ignores_workers_but_tracks_seed() {
        let mut plan = small_plan();
        let d0 = plan.digest();
        plan.workers = 8;
        assert_eq!(plan.digest(), d0);
        plan.generator.seed += 1;
        assert_ne!(plan.digest(), d0);
    }
}
