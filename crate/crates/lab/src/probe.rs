//! Exponential moments of the frozen count, and per-block sums of
//! `e^{θ S_i(m)}` over the boundary masses `m` with `L_i(m) = ℓ`.
//!
//! All averages are taken in the log domain so that large `θ` cannot
//! overflow.

use arw_core::carpet::{CarpetHole, CarpetParams, RunOptions};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::{cell_seed, run_ensemble, trial_seed, Check, EnsembleSpec, Experiment, Geometry};
use crate::error::{LabError, Result};

/// Default `θ` values. The large one is dominated by a single frozen
/// particle at desk sizes.
pub const DEFAULT_THETAS: [f64; 4] = [0.5, 1.0, 2.0, 16.0];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeSpec {
    pub lambda: f64,
    pub a: i64,
    #[serde(rename = "K")]
    pub k: i64,
    /// Blocks in the runs used for `E[e^{θ Frozen}]`.
    pub n: usize,
    /// Block whose sums are probed; runs use blocks `1..=block`.
    pub block: usize,
    /// Largest boundary mass.
    pub m_max: u64,
    /// Levels `ℓ = 0..=max_level` reported.
    pub max_level: u64,
    pub thetas: Vec<f64>,
    pub trials: u64,
    pub master_seed: u64,
    #[serde(default)]
    pub check: Check,
    #[serde(default, skip_serializing)]
    pub parallelism: Option<usize>,
}

/// `log Σ e^{x_i}`; `-∞` for an empty or all-`-∞` input.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Mean of `e^{x_i}` and its standard error, both as logarithms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogMean {
    pub log_mean: f64,
    pub log_se: f64,
}

impl LogMean {
    pub fn of(log_values: &[f64]) -> LogMean {
        let t = log_values.len() as f64;
        let log_mean = log_sum_exp(log_values) - t.ln();
        if log_values.len() < 2 || log_mean == f64::NEG_INFINITY {
            return LogMean { log_mean, log_se: f64::NEG_INFINITY };
        }
        let doubled: Vec<f64> = log_values.iter().map(|x| 2.0 * x).collect();
        let log_second = log_sum_exp(&doubled) - t.ln();
        let gap = 2.0 * log_mean - log_second;
        let log_se = if gap >= 0.0 {
            f64::NEG_INFINITY
        } else {
            0.5 * (log_second + (-gap.exp()).ln_1p() - (t - 1.0).ln())
        };
        LogMean { log_mean, log_se }
    }

    pub fn mean(&self) -> f64 {
        self.log_mean.exp()
    }

    pub fn se(&self) -> f64 {
        self.log_se.exp()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub theta: f64,
    #[serde(flatten)]
    pub value: LogMean,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelSum {
    pub level: u64,
    pub theta: f64,
    #[serde(flatten)]
    pub value: LogMean,
    /// Trials whose mass range covered every `m` with `L(m) = ℓ`.
    pub complete_trials: u64,
    pub truncated: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub spec: ProbeSpec,
    pub frozen_moments: Vec<MomentEstimate>,
    pub level_sums: Vec<LevelSum>,
    /// The `e³` benchmark for the level sums.
    pub reference: f64,
}

/// `(S_i(m), L_i(m))` for `m = 0..=m_max` from one run started with
/// `m_max` extra particles on block `block`.
///
/// The state just before extra particle `m` is chosen hot is the end state
/// of the run with `m` extras, so one run gives every `m`.
pub fn block_profile(params: CarpetParams, seed: u64, options: RunOptions) -> Result<Vec<(bool, u64)>> {
    let block = params.n;
    let mut engine = CarpetHole::new(params, seed, options)?;
    let mut out = Vec::with_capacity(params.m_boundary as usize + 1);
    while let Some(choice) = engine.choose_hot() {
        if choice.extra == Some(out.len() as u64) {
            out.push((engine.frozen_in(block), engine.left_emissions(block)));
        }
        engine.attempt_emission(choice)?;
    }
    out.push((engine.frozen_in(block), engine.left_emissions(block)));
    Ok(out)
}

pub fn exponential_moment_probe(spec: &ProbeSpec) -> Result<ProbeReport> {
    if spec.thetas.iter().any(|t| !t.is_finite()) {
        return Err(LabError::usage("theta values must be finite"));
    }
    if spec.block == 0 {
        return Err(LabError::usage("block must be >= 1"));
    }
    let ensemble = EnsembleSpec {
        experiment: Experiment::CarpetHole {
            lambda: vec![spec.lambda],
            geometry: vec![Geometry { a: spec.a, k: spec.k }],
            n: vec![spec.n],
            m: 0,
            check: spec.check,
            trace: false,
        },
        trials: spec.trials,
        master_seed: spec.master_seed,
        parallelism: spec.parallelism,
    };
    let out = run_ensemble(&ensemble)?;
    out.ensure_complete()?;
    let frozen: Vec<f64> = out.carpet_records(0).map(|r| r.frozen as f64).collect();
    let frozen_moments = spec
        .thetas
        .iter()
        .map(|&theta| {
            let xs: Vec<f64> = frozen.iter().map(|f| theta * f).collect();
            MomentEstimate { theta, value: LogMean::of(&xs) }
        })
        .collect();

    let params = CarpetParams::new(spec.lambda, spec.block, spec.k, spec.a).with_mass(spec.m_max);
    let options = RunOptions { check: spec.check.into(), trace: false, ..RunOptions::default() };
    let base = cell_seed(spec.master_seed, 1);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(spec.parallelism.unwrap_or(0)).build()?;
    let profiles: Vec<Vec<(bool, u64)>> = pool.install(|| {
        (0..spec.trials)
            .into_par_iter()
            .map(|t| block_profile(params, trial_seed(base, t), options))
            .collect::<Result<_>>()
    })?;

    let mut level_sums = Vec::new();
    for level in 0..=spec.max_level {
        let complete = profiles.iter().filter(|p| p.last().unwrap().1 > level).count() as u64;
        for &theta in &spec.thetas {
            let xs: Vec<f64> = profiles
                .iter()
                .map(|p| {
                    let terms: Vec<f64> = p
                        .iter()
                        .filter(|(_, l)| *l == level)
                        .map(|&(s, _)| if s { theta } else { 0.0 })
                        .collect();
                    log_sum_exp(&terms)
                })
                .collect();
            level_sums.push(LevelSum {
                level,
                theta,
                value: LogMean::of(&xs),
                complete_trials: complete,
                truncated: complete < spec.trials,
            });
        }
    }
    Ok(ProbeReport { spec: spec.clone(), frozen_moments, level_sums, reference: 3f64.exp() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_mean_of_zeros_is_one() {
        let m = LogMean::of(&[0.0; 17]);
        assert_eq!(m.mean(), 1.0);
        assert_eq!(m.se(), 0.0);
    }

    #[test]
    fn log_mean_matches_direct_computation() {
        let xs = [0.0f64, 1.0, 2.5, -1.0];
        let vals: Vec<f64> = xs.iter().map(|x| x.exp()).collect();
        let mean = vals.iter().sum::<f64>() / 4.0;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 3.0;
        let m = LogMean::of(&xs);
        assert!((m.mean() - mean).abs() < 1e-12);
        assert!((m.se() - (var / 4.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn huge_exponents_stay_finite_in_log_form() {
        let m = LogMean::of(&[800.0, 1600.0]);
        assert!(m.log_mean.is_finite());
        assert!((m.log_mean - (1600.0 - 2f64.ln())).abs() < 1e-9);
    }
}
