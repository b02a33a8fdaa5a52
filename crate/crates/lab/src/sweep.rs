//! Grids of activity estimates `P(m(0) ≥ k)` over `(λ, ζ)`.

use serde::{Deserialize, Serialize};

use crate::ensemble::{
    metadata_lines, run_ensemble, EnsembleOutput, EnsembleSpec, Experiment, SamplerChoice, Stat,
};
use crate::error::{LabError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub lambdas: Vec<f64>,
    pub zetas: Vec<f64>,
    #[serde(rename = "L")]
    pub half_width: i64,
    pub k: u64,
    pub trials: u64,
    pub master_seed: u64,
    #[serde(default, skip_serializing)]
    pub parallelism: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub lambda: f64,
    pub zeta: f64,
    pub trials: u64,
    #[serde(flatten)]
    pub active: Stat,
}

#[derive(Clone, Debug)]
pub struct PhaseGrid {
    pub spec: SweepSpec,
    pub points: Vec<PhasePoint>,
    pub ensemble: EnsembleOutput,
}

impl SweepSpec {
    pub fn ensemble(&self) -> EnsembleSpec {
        EnsembleSpec {
            experiment: Experiment::StabilizeOrigin {
                lambda: self.lambdas.clone(),
                zeta: self.zetas.clone(),
                half_width: vec![self.half_width],
                k: self.k,
                sampler: SamplerChoice::Bernoulli,
            },
            trials: self.trials,
            master_seed: self.master_seed,
            parallelism: self.parallelism,
        }
    }
}

pub fn sweep_phase(spec: &SweepSpec) -> Result<PhaseGrid> {
    let ensemble = run_ensemble(&spec.ensemble())?;
    ensemble.ensure_complete()?;
    let mut points = Vec::with_capacity(ensemble.cells.len());
    for c in &ensemble.cells {
        let active = c.active.expect("complete cells carry an estimate");
        points.push(PhasePoint { lambda: c.lambda, zeta: c.zeta.unwrap_or(0.0), trials: c.trials, active });
    }
    Ok(PhaseGrid { spec: spec.clone(), points, ensemble })
}

impl PhaseGrid {
    /// Estimates at fixed `λ`, in the order of the ζ grid.
    pub fn row(&self, lambda: f64) -> Vec<PhasePoint> {
        self.points.iter().filter(|p| p.lambda == lambda).copied().collect()
    }

    /// Long-format plot data: one line per `(λ, ζ)`.
    pub fn plot_csv(&self) -> Result<String> {
        let mut buf = metadata_lines("phase-grid", &self.spec.ensemble())?.into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record(["lambda", "zeta", "L", "k", "trials", "p_active", "se_active"])?;
            for p in &self.points {
                w.write_record([
                    p.lambda.to_string(),
                    p.zeta.to_string(),
                    self.spec.half_width.to_string(),
                    self.spec.k.to_string(),
                    p.trials.to_string(),
                    p.active.mean.to_string(),
                    p.active.se.to_string(),
                ])?;
            }
            w.flush().map_err(|e| LabError::io("<plot>", e))?;
        }
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }
}
