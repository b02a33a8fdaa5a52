//! Seeded ensembles of carpet-hole runs and origin-odometer runs.
//!
//! Trials run on a rayon pool; results are collected in (cell, trial)
//! order and folded sequentially, so every output is a function of the inputs
//! and master seed alone, whatever the pool size.

use std::io::Write;
use std::time::{Duration, Instant};

use arw_core::carpet::{run_carpet_hole_with, CarpetParams, CheckMode, RunOptions, RunRecord};
use arw_core::rng::derive_seed;
use arw_core::sitewise::{odometer_at_origin, DensitySampler};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{core_exit_code, LabError, Result};

/// Version of the CSV columns and the JSON-lines layout.
pub const SCHEMA_VERSION: u32 = 1;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Check {
    #[default]
    Auto,
    On,
    Off,
}

impl From<Check> for CheckMode {
    fn from(c: Check) -> Self {
        match c {
            Check::Auto => CheckMode::Auto,
            Check::On => CheckMode::On,
            Check::Off => CheckMode::Off,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Geometry {
    pub a: i64,
    #[serde(rename = "K")]
    pub k: i64,
}

/// Initial configurations for origin-odometer runs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SamplerChoice {
    /// Bernoulli(ζ) per site, `1 + Bernoulli(ζ−1)` above density 1.
    #[default]
    Bernoulli,
    /// One particle per site except on `2Kℤ`; the ζ grid is ignored.
    Neat { period: u32 },
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Experiment {
    CarpetHole {
        lambda: Vec<f64>,
        geometry: Vec<Geometry>,
        n: Vec<usize>,
        /// Extra particles stacked at the right edge of the last block.
        #[serde(default)]
        m: u64,
        #[serde(default)]
        check: Check,
        /// Keep per-attempt traces in the raw records.
        #[serde(default = "yes")]
        trace: bool,
    },
    StabilizeOrigin {
        lambda: Vec<f64>,
        #[serde(default)]
        zeta: Vec<f64>,
        /// Half-widths `L` of the interval `[-L, L]`.
        half_width: Vec<i64>,
        /// Activity threshold: the estimate is `P(m(0) ≥ k)`.
        k: u64,
        #[serde(default)]
        sampler: SamplerChoice,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub experiment: Experiment,
    pub trials: u64,
    pub master_seed: u64,
    /// Worker threads; does not affect any output.
    #[serde(default, skip_serializing)]
    pub parallelism: Option<usize>,
}

impl EnsembleSpec {
    pub fn from_toml(text: &str) -> std::result::Result<Self, toml::de::Error> {
        toml::from_str(text)
    }
}

/// One point of the parameter grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Cell {
    Carpet { params: CarpetParams, check: CheckMode, trace: bool },
    Origin { lambda: f64, zeta: f64, sampler: DensitySampler, half_width: i64, k: u64 },
}

impl Experiment {
    /// Grid points in a fixed nested order.
    pub fn cells(&self) -> Result<Vec<Cell>> {
        let mut out = Vec::new();
        match self {
            Experiment::CarpetHole { lambda, geometry, n, m, check, trace } => {
                for &l in lambda {
                    for g in geometry {
                        for &nn in n {
                            let params = CarpetParams::new(l, nn, g.k, g.a).with_mass(*m);
                            arw_core::sitewise::SleepRate::new(l)?;
                            params.layout()?;
                            if *m == 0 && nn % 2 != 0 {
                                return Err(LabError::usage(format!("n = {nn} must be even when m = 0")));
                            }
                            out.push(Cell::Carpet { params, check: (*check).into(), trace: *trace });
                        }
                    }
                }
            }
            Experiment::StabilizeOrigin { lambda, zeta, half_width, k, sampler } => {
                let samplers: Vec<(f64, DensitySampler)> = match sampler {
                    SamplerChoice::Bernoulli => {
                        zeta.iter().map(|&z| DensitySampler::bernoulli(z).map(|s| (z, s))).collect::<std::result::Result<_, _>>()?
                    }
                    SamplerChoice::Neat { period } => {
                        let s = DensitySampler::Neat { k: *period };
                        s.validate()?;
                        vec![(s.density(), s)]
                    }
                };
                for &l in lambda {
                    arw_core::sitewise::SleepRate::new(l)?;
                    for &(z, s) in &samplers {
                        for &hw in half_width {
                            if hw < 1 {
                                return Err(LabError::usage(format!("half-width L = {hw} must be >= 1")));
                            }
                            out.push(Cell::Origin { lambda: l, zeta: z, sampler: s, half_width: hw, k: *k });
                        }
                    }
                }
            }
        }
        if out.is_empty() {
            return Err(LabError::usage("parameter grid is empty"));
        }
        Ok(out)
    }
}

/// Seed of cell `cell` under `master`.
pub fn cell_seed(master: u64, cell: usize) -> u64 {
    derive_seed(master, cell as u64)
}

/// Seed of trial `trial` within a cell.
pub fn trial_seed(cell_seed: u64, trial: u64) -> u64 {
    derive_seed(cell_seed, trial)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "kebab-case")]
pub enum TrialOutcome {
    Carpet(Box<RunRecord>),
    Origin { odometer: u64 },
    /// The run raised an error; the cell is aborted.
    Error { message: String, exit_code: i32 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub cell: usize,
    pub trial: u64,
    pub seed: u64,
    #[serde(flatten)]
    pub outcome: TrialOutcome,
    #[serde(skip)]
    pub elapsed: Duration,
}

/// Sample mean and its standard error (sample SD over √trials).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub se: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Stat {
        let n = values.len() as f64;
        if values.is_empty() {
            return Stat { mean: 0.0, se: 0.0 };
        }
        let mean = values.iter().sum::<f64>() / n;
        if values.len() < 2 {
            return Stat { mean, se: 0.0 };
        }
        let var = values.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
        Stat { mean, se: (var / n).sqrt() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "kebab-case")]
pub enum CellStatus {
    Ok,
    Aborted { trial: u64, message: String, exit_code: i32 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub cell: usize,
    pub experiment: String,
    pub lambda: f64,
    pub a: Option<i64>,
    #[serde(rename = "K")]
    pub k: Option<i64>,
    pub n: Option<usize>,
    pub m: Option<u64>,
    pub zeta: Option<f64>,
    #[serde(rename = "L")]
    pub half_width: Option<i64>,
    pub threshold: Option<u64>,
    pub trials: u64,
    /// `P(Frozen ≥ n/4)`.
    pub frozen_quarter: Option<Stat>,
    pub frozen_per_n: Option<Stat>,
    pub exit_per_n: Option<Stat>,
    /// `P(m(0) ≥ k)`.
    pub active: Option<Stat>,
    pub conservation_violations: u64,
    pub status: CellStatus,
    /// Summed trial wall time. Not written to any file.
    #[serde(skip)]
    pub runtime: Duration,
}

#[derive(Clone, Debug)]
pub struct EnsembleOutput {
    pub spec: EnsembleSpec,
    pub cells: Vec<CellSummary>,
    pub trials: Vec<TrialRecord>,
}

impl EnsembleOutput {
    /// First abort reason by exit code severity, if any cell was aborted.
    pub fn worst_exit_code(&self) -> Option<i32> {
        self.cells
            .iter()
            .filter_map(|c| match &c.status {
                CellStatus::Aborted { exit_code, .. } => Some(*exit_code),
                CellStatus::Ok => None,
            })
            .max()
    }

    /// Fails with the first aborted cell's diagnostic and exit code.
    pub fn ensure_complete(&self) -> Result<()> {
        for c in &self.cells {
            if let CellStatus::Aborted { trial, message, exit_code } = &c.status {
                return Err(LabError::Aborted {
                    message: format!("cell {} trial {trial}: {message}", c.cell),
                    code: *exit_code,
                });
            }
        }
        Ok(())
    }

    pub fn conservation_violations(&self) -> u64 {
        self.cells.iter().map(|c| c.conservation_violations).sum()
    }

    pub fn carpet_records(&self, cell: usize) -> impl Iterator<Item = &RunRecord> {
        self.trials.iter().filter(move |t| t.cell == cell).filter_map(|t| match &t.outcome {
            TrialOutcome::Carpet(r) => Some(r.as_ref()),
            _ => None,
        })
    }
}

fn run_trial(cell: &Cell, seed: u64) -> TrialOutcome {
    let result = match *cell {
        Cell::Carpet { params, check, trace } => {
            let options = RunOptions { check, trace, ..RunOptions::default() };
            run_carpet_hole_with(params, seed, options).map(|r| TrialOutcome::Carpet(Box::new(r)))
        }
        Cell::Origin { lambda, sampler, half_width, .. } => {
            odometer_at_origin(lambda, &sampler, half_width, seed).map(|odometer| TrialOutcome::Origin { odometer })
        }
    };
    result.unwrap_or_else(|e| TrialOutcome::Error { message: e.to_string(), exit_code: core_exit_code(&e) })
}

/// Runs every trial of `spec` and aggregates per cell.
pub fn run_ensemble(spec: &EnsembleSpec) -> Result<EnsembleOutput> {
    if spec.trials == 0 {
        return Err(LabError::usage("trials must be >= 1"));
    }
    let cells = spec.experiment.cells()?;
    let jobs: Vec<(usize, u64)> =
        (0..cells.len()).flat_map(|c| (0..spec.trials).map(move |t| (c, t))).collect();
    let threads = spec.parallelism.unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
    let trials: Vec<TrialRecord> = pool.install(|| {
        jobs.par_iter()
            .map(|&(c, t)| {
                let seed = trial_seed(cell_seed(spec.master_seed, c), t);
                let start = Instant::now();
                let outcome = run_trial(&cells[c], seed);
                TrialRecord { cell: c, trial: t, seed, outcome, elapsed: start.elapsed() }
            })
            .collect()
    });
    let summaries = cells
        .iter()
        .enumerate()
        .map(|(i, cell)| summarize(i, cell, &trials[i * spec.trials as usize..(i + 1) * spec.trials as usize]))
        .collect();
    Ok(EnsembleOutput { spec: spec.clone(), cells: summaries, trials })
}

fn summarize(index: usize, cell: &Cell, trials: &[TrialRecord]) -> CellSummary {
    let mut s = CellSummary {
        cell: index,
        experiment: String::new(),
        lambda: 0.0,
        a: None,
        k: None,
        n: None,
        m: None,
        zeta: None,
        half_width: None,
        threshold: None,
        trials: trials.len() as u64,
        frozen_quarter: None,
        frozen_per_n: None,
        exit_per_n: None,
        active: None,
        conservation_violations: 0,
        status: CellStatus::Ok,
        runtime: trials.iter().map(|t| t.elapsed).sum(),
    };
    if let Some(t) = trials.iter().find(|t| matches!(t.outcome, TrialOutcome::Error { .. })) {
        if let TrialOutcome::Error { message, exit_code } = &t.outcome {
            s.status = CellStatus::Aborted { trial: t.trial, message: message.clone(), exit_code: *exit_code };
        }
    }
    match *cell {
        Cell::Carpet { params, .. } => {
            s.experiment = "carpet-hole".into();
            s.lambda = params.lambda;
            s.a = Some(params.a);
            s.k = Some(params.k);
            s.n = Some(params.n);
            s.m = Some(params.m_boundary);
            if s.status != CellStatus::Ok {
                return s;
            }
            let n = params.n as f64;
            let (mut quarter, mut frozen, mut exit) = (Vec::new(), Vec::new(), Vec::new());
            for t in trials {
                if let TrialOutcome::Carpet(r) = &t.outcome {
                    let failures = r.conservation_failures();
                    s.conservation_violations += failures.len() as u64 + r.property_violations.len() as u64;
                    quarter.push(if 4 * r.frozen >= params.n as u64 { 1.0 } else { 0.0 });
                    frozen.push(r.frozen as f64 / n);
                    exit.push(r.exit as f64 / n);
                }
            }
            s.frozen_quarter = Some(Stat::of(&quarter));
            s.frozen_per_n = Some(Stat::of(&frozen));
            s.exit_per_n = Some(Stat::of(&exit));
        }
        Cell::Origin { lambda, zeta, half_width, k, .. } => {
            s.experiment = "stabilize-origin".into();
            s.lambda = lambda;
            s.zeta = Some(zeta);
            s.half_width = Some(half_width);
            s.threshold = Some(k);
            if s.status != CellStatus::Ok {
                return s;
            }
            let hits: Vec<f64> = trials
                .iter()
                .filter_map(|t| match t.outcome {
                    TrialOutcome::Origin { odometer } => Some(if odometer >= k { 1.0 } else { 0.0 }),
                    _ => None,
                })
                .collect();
            s.active = Some(Stat::of(&hits));
        }
    }
    s
}

/// Column order of the summary CSV.
pub const SUMMARY_COLUMNS: [&str; 21] = [
    "cell",
    "experiment",
    "lambda",
    "a",
    "K",
    "n",
    "m",
    "zeta",
    "L",
    "k",
    "trials",
    "p_frozen_ge_quarter",
    "se_p_frozen_ge_quarter",
    "mean_frozen_per_n",
    "se_frozen_per_n",
    "mean_exit_per_n",
    "se_exit_per_n",
    "p_active",
    "se_active",
    "conservation_violations",
    "status",
];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// `# key = value` lines identifying the tool, schema and inputs.
pub fn metadata_lines(kind: &str, spec: &EnsembleSpec) -> Result<String> {
    Ok(format!(
        "# arw {kind}\n# tool_version = {TOOL_VERSION}\n# schema_version = {SCHEMA_VERSION}\n# master_seed = {}\n# spec = {}\n",
        spec.master_seed,
        serde_json::to_string(spec)?
    ))
}

pub fn summary_csv(output: &EnsembleOutput) -> Result<String> {
    let mut buf = metadata_lines("summary", &output.spec)?.into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(SUMMARY_COLUMNS)?;
        for c in &output.cells {
            let status = match &c.status {
                CellStatus::Ok => "ok".to_string(),
                CellStatus::Aborted { exit_code, .. } => format!("aborted-{exit_code}"),
            };
            w.write_record([
                c.cell.to_string(),
                c.experiment.clone(),
                c.lambda.to_string(),
                opt(c.a),
                opt(c.k),
                opt(c.n),
                opt(c.m),
                opt(c.zeta),
                opt(c.half_width),
                opt(c.threshold),
                c.trials.to_string(),
                opt(c.frozen_quarter.map(|s| s.mean)),
                opt(c.frozen_quarter.map(|s| s.se)),
                opt(c.frozen_per_n.map(|s| s.mean)),
                opt(c.frozen_per_n.map(|s| s.se)),
                opt(c.exit_per_n.map(|s| s.mean)),
                opt(c.exit_per_n.map(|s| s.se)),
                opt(c.active.map(|s| s.mean)),
                opt(c.active.map(|s| s.se)),
                c.conservation_violations.to_string(),
                status,
            ])?;
        }
        w.flush().map_err(|e| LabError::io("<summary>", e))?;
    }
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

#[derive(Serialize)]
struct MetaLine<'a> {
    kind: &'static str,
    schema_version: u32,
    tool_version: &'static str,
    spec: &'a EnsembleSpec,
    cells: &'a [CellSummary],
}

/// Raw records: a metadata line, then one line per trial in (cell, trial)
/// order.
pub fn write_records_jsonl<W: Write>(output: &EnsembleOutput, mut w: W) -> Result<()> {
    let meta = MetaLine {
        kind: "meta",
        schema_version: SCHEMA_VERSION,
        tool_version: TOOL_VERSION,
        spec: &output.spec,
        cells: &output.cells,
    };
    let io = |e| LabError::io("<records>", e);
    serde_json::to_writer(&mut w, &meta)?;
    w.write_all(b"\n").map_err(io)?;
    for t in &output.trials {
        serde_json::to_writer(&mut w, t)?;
        w.write_all(b"\n").map_err(io)?;
    }
    Ok(())
}
