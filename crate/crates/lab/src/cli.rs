//! The `arw` command line.
//!
//! Every subcommand reads its flags, overlays them on the matching table of
//! an optional TOML file (`--config`), and resolves the master seed as flag,
//! then file, then `ARW_SEED`, then 0.

use std::ffi::OsString;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use arw_core::block_stats::{
    dominance_check, drift, far_tail_reference, hole_lemma_stats, hoeffding_tail, log_hoeffding_tail,
    log_scale_drift_bound, reference_log_a, standard_hoeffding_tail, DisplacementHistogram, DominanceReport,
    HoleLemmaReport, JumpLawSpec, LogScaleDrift,
};
use arw_core::carpet::{mass_balance_replay_with, CarpetHole, CarpetParams, ReplayReport, RunOptions, RunRecord};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::ensemble::{
    cell_seed, run_ensemble, summary_csv, trial_seed, write_records_jsonl, Check, EnsembleOutput, EnsembleSpec,
    Experiment, Geometry, SamplerChoice,
};
use crate::error::{exit, LabError, Result};
use crate::probe::{exponential_moment_probe, ProbeSpec, DEFAULT_THETAS};
use crate::report::{ensemble_table, hole_table, num, phase_table, probe_table, Table};
use crate::sweep::{sweep_phase, SweepSpec};
use crate::verify::{self, Scale};

#[derive(Parser, Debug)]
#[command(name = "arw", version, about = "Activated random walk simulator and carpet-hole experiments")]
pub struct Cli {
    /// TOML file with one table per subcommand; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Terminal output style.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Odometer at the origin after stabilizing [-L, L].
    #[command(allow_negative_numbers = true)]
    Simulate(SimulateArgs),
    /// Ensembles of the carpet-hole procedure.
    #[command(allow_negative_numbers = true)]
    Carpet(CarpetArgs),
    /// Rerun each block alone and compare with the full run.
    #[command(allow_negative_numbers = true)]
    ReplayCheck(ReplayArgs),
    /// Jump laws, drifts, tail bounds and hole-process statistics.
    #[command(allow_negative_numbers = true)]
    BlockStats(BlockStatsArgs),
    /// Activity over a (lambda, zeta) grid.
    #[command(allow_negative_numbers = true)]
    Sweep(SweepArgs),
    /// Run the acceptance checks.
    Verify(VerifyArgs),
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
struct SimulateArgs {
    /// Sleep rates (comma-separated).
    #[arg(long, value_delimiter = ',')]
    lambda: Vec<f64>,
    /// Initial densities (comma-separated).
    #[arg(long, value_delimiter = ',')]
    zeta: Vec<f64>,
    /// Half-widths of the interval [-L, L] (comma-separated).
    #[arg(long = "L", value_delimiter = ',')]
    #[serde(rename = "L")]
    half_width: Vec<i64>,
    /// Activity threshold for P(m(0) >= k) [default: 10].
    #[arg(long)]
    k: Option<u64>,
    /// Use the neat configuration with this period instead of Bernoulli(zeta).
    #[arg(long)]
    neat_period: Option<u32>,
    /// Trials per cell [default: 100].
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    parallelism: Option<usize>,
    /// Output directory [default: .].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
struct CarpetArgs {
    #[arg(long, value_delimiter = ',')]
    lambda: Vec<f64>,
    /// Block half-widths (comma-separated).
    #[arg(long, value_delimiter = ',')]
    a: Vec<i64>,
    /// Block spacings; defaults to a^2 for each a.
    #[arg(long = "K", value_delimiter = ',')]
    #[serde(rename = "K")]
    spacing: Vec<i64>,
    /// Numbers of blocks (comma-separated).
    #[arg(long, value_delimiter = ',')]
    n: Vec<usize>,
    /// Extra particles at the right edge of the last block [default: 0].
    #[arg(long)]
    m: Option<u64>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long, value_enum)]
    check: Option<Check>,
    /// Leave per-attempt traces out of the records.
    #[arg(long)]
    no_trace: bool,
    /// Print hole-process statistics for every cell.
    #[arg(long)]
    hole_stats: bool,
    /// Also estimate exponential moments for the first cell.
    #[arg(long)]
    probe: bool,
    /// Theta values for the probe (comma-separated).
    #[arg(long, value_delimiter = ',')]
    thetas: Vec<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    parallelism: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
struct ReplayArgs {
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    a: Option<i64>,
    #[arg(long = "K")]
    #[serde(rename = "K")]
    spacing: Option<i64>,
    #[arg(long)]
    n: Option<usize>,
    /// Runs use seeds seed, seed+1, ... [default: 1 run].
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long, value_enum)]
    check: Option<Check>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
struct BlockStatsArgs {
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    a: Option<u64>,
    #[arg(long = "K")]
    #[serde(rename = "K")]
    spacing: Option<u64>,
    /// Truncation level of the jump laws [default: a/3].
    #[arg(long)]
    v: Option<u64>,
    /// Report the log-domain drift chain and tail exponents for huge a.
    #[arg(long)]
    paper_scale: bool,
    /// Natural log of a for --paper-scale [default: log 12 + 100(lambda+1)].
    #[arg(long)]
    log_a: Option<f64>,
    /// Carpet-hole runs for hole statistics [default: 0].
    #[arg(long)]
    runs: Option<u64>,
    /// Blocks per run [default: 16].
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, value_enum)]
    check: Option<Check>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    parallelism: Option<usize>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
struct SweepArgs {
    #[arg(long, value_delimiter = ',')]
    lambda: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    zeta: Vec<f64>,
    /// Half-width [default: 200].
    #[arg(long = "L")]
    #[serde(rename = "L")]
    half_width: Option<i64>,
    /// Activity threshold [default: 10].
    #[arg(long)]
    k: Option<u64>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    parallelism: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
struct VerifyArgs {
    /// Smaller samples; a smoke run, not the full checks.
    #[arg(long)]
    quick: bool,
    /// Run only these checks (comma-separated ids 1-11).
    #[arg(long, value_delimiter = ',')]
    only: Vec<u32>,
    #[arg(long)]
    parallelism: Option<usize>,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("arw: {e}");
            e.exit_code()
        }
    }
}

struct Context {
    format: Format,
    config: Option<(PathBuf, toml::Table)>,
}

impl Context {
    /// Flags over the file's `[name]` table. Unset flags (absent options,
    /// empty lists, false switches) leave the file value in place.
    fn merge<T: Serialize + DeserializeOwned>(&self, name: &str, flags: T) -> Result<T> {
        let Some((path, table)) = &self.config else { return Ok(flags) };
        let config_err = |message: String| LabError::Config { path: path.clone(), message };
        let mut base = match table.get(name) {
            Some(v) => serde_json::to_value(v)?,
            None => Value::Object(Default::default()),
        };
        let merged = base.as_object_mut().ok_or_else(|| config_err(format!("[{name}] must be a table")))?;
        if let Value::Object(over) = serde_json::to_value(&flags)? {
            for (k, v) in over {
                let unset = matches!(v, Value::Null | Value::Bool(false)) || v.as_array().is_some_and(|a| a.is_empty());
                if !unset {
                    merged.insert(k, v);
                }
            }
        }
        serde_json::from_value(base).map_err(|e| config_err(format!("[{name}]: {e}")))
    }

    fn print<T: Serialize>(&self, text: impl FnOnce() -> String, json: &T) -> Result<()> {
        match self.format {
            Format::Text => print!("{}", text()),
            Format::Json => println!("{}", serde_json::to_string_pretty(json)?),
        }
        Ok(())
    }
}

fn dispatch(cli: Cli) -> Result<i32> {
    let config = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
            let table: toml::Table =
                text.parse().map_err(|e: toml::de::Error| LabError::Config { path: path.clone(), message: e.to_string() })?;
            Some((path.clone(), table))
        }
        None => None,
    };
    let ctx = Context { format: cli.format, config };
    match cli.command {
        Command::Simulate(a) => simulate(&ctx, ctx.merge("simulate", a)?),
        Command::Carpet(a) => carpet(&ctx, ctx.merge("carpet", a)?),
        Command::ReplayCheck(a) => replay_check(&ctx, ctx.merge("replay-check", a)?),
        Command::BlockStats(a) => block_stats(&ctx, ctx.merge("block-stats", a)?),
        Command::Sweep(a) => sweep(&ctx, ctx.merge("sweep", a)?),
        Command::Verify(a) => verify_cmd(&ctx, ctx.merge("verify", a)?),
    }
}

/// Flag or file value, then `ARW_SEED`, then 0.
fn resolve_seed(seed: Option<u64>) -> Result<u64> {
    if let Some(s) = seed {
        return Ok(s);
    }
    match std::env::var("ARW_SEED") {
        Ok(v) => v.trim().parse().map_err(|_| LabError::usage(format!("ARW_SEED = {v:?} is not an unsigned integer"))),
        Err(_) => Ok(0),
    }
}

fn required<T>(v: Option<T>, flag: &str) -> Result<T> {
    v.ok_or_else(|| LabError::usage(format!("--{flag} is required")))
}

fn nonempty<T>(v: Vec<T>, flag: &str) -> Result<Vec<T>> {
    if v.is_empty() {
        Err(LabError::usage(format!("--{flag} is required")))
    } else {
        Ok(v)
    }
}

fn write_file(dir: &Path, name: &str, contents: &[u8]) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| LabError::io(dir, e))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| LabError::io(&path, e))?;
    Ok(path)
}

/// Writes `<stem>_summary.csv` and `<stem>_records.jsonl`.
fn write_ensemble(dir: &Path, stem: &str, out: &EnsembleOutput) -> Result<()> {
    write_file(dir, &format!("{stem}_summary.csv"), summary_csv(out)?.as_bytes())?;
    let path = dir.join(format!("{stem}_records.jsonl"));
    let file = fs::File::create(&path).map_err(|e| LabError::io(&path, e))?;
    let mut w = BufWriter::new(file);
    write_records_jsonl(out, &mut w)?;
    w.flush().map_err(|e| LabError::io(&path, e))?;
    Ok(())
}

/// Reports aborted cells on stderr and returns the exit code.
fn ensemble_status(out: &EnsembleOutput) -> i32 {
    for c in &out.cells {
        if let crate::ensemble::CellStatus::Aborted { trial, message, .. } = &c.status {
            eprintln!("arw: cell {} aborted at trial {trial}: {message}", c.cell);
        }
    }
    out.worst_exit_code().unwrap_or(exit::OK)
}

fn simulate(ctx: &Context, a: SimulateArgs) -> Result<i32> {
    let sampler = match a.neat_period {
        Some(period) => SamplerChoice::Neat { period },
        None => SamplerChoice::Bernoulli,
    };
    let zeta = if a.neat_period.is_some() { a.zeta } else { nonempty(a.zeta, "zeta")? };
    let spec = EnsembleSpec {
        experiment: Experiment::StabilizeOrigin {
            lambda: nonempty(a.lambda, "lambda")?,
            zeta,
            half_width: nonempty(a.half_width, "L")?,
            k: a.k.unwrap_or(10),
            sampler,
        },
        trials: a.trials.unwrap_or(100),
        master_seed: resolve_seed(a.seed)?,
        parallelism: a.parallelism,
    };
    let out = run_ensemble(&spec)?;
    write_ensemble(&a.out.unwrap_or_else(|| PathBuf::from(".")), "simulate", &out)?;
    ctx.print(|| ensemble_table(&out), &out.cells)?;
    Ok(ensemble_status(&out))
}

fn geometries(a: &[i64], k: &[i64]) -> Result<Vec<Geometry>> {
    let a = a.to_vec();
    Ok(match (a.len(), k.len()) {
        (0, _) => return Err(LabError::usage("--a is required")),
        (_, 0) => a.iter().map(|&a| Geometry { a, k: a * a }).collect(),
        (x, y) if x == y => a.iter().zip(k).map(|(&a, &k)| Geometry { a, k }).collect(),
        (1, _) => k.iter().map(|&k| Geometry { a: a[0], k }).collect(),
        (_, 1) => a.iter().map(|&a| Geometry { a, k: k[0] }).collect(),
        _ => return Err(LabError::usage("--a and --K must have equal lengths, or one of them a single value")),
    })
}

#[derive(Serialize)]
struct CarpetReport<'a> {
    cells: &'a [crate::ensemble::CellSummary],
    hole_stats: Vec<HoleLemmaReport>,
    probe: Option<crate::probe::ProbeReport>,
}

fn carpet(ctx: &Context, a: CarpetArgs) -> Result<i32> {
    let trace = !a.no_trace;
    if a.hole_stats && !trace {
        return Err(LabError::usage("--hole-stats needs traces; drop --no-trace"));
    }
    let lambda = nonempty(a.lambda, "lambda")?;
    let geometry = geometries(&a.a, &a.spacing)?;
    let n = nonempty(a.n, "n")?;
    let check = a.check.unwrap_or_default();
    let trials = a.trials.unwrap_or(100);
    let seed = resolve_seed(a.seed)?;
    let spec = EnsembleSpec {
        experiment: Experiment::CarpetHole {
            lambda: lambda.clone(),
            geometry: geometry.clone(),
            n: n.clone(),
            m: a.m.unwrap_or(0),
            check,
            trace,
        },
        trials,
        master_seed: seed,
        parallelism: a.parallelism,
    };
    let out = run_ensemble(&spec)?;
    write_ensemble(&a.out.unwrap_or_else(|| PathBuf::from(".")), "carpet", &out)?;
    let code = ensemble_status(&out);

    let mut hole_stats = Vec::new();
    if a.hole_stats {
        for c in out.cells.iter().filter(|c| c.status == crate::ensemble::CellStatus::Ok) {
            let records: Vec<RunRecord> = out.carpet_records(c.cell).cloned().collect();
            hole_stats.push(hole_lemma_stats(&records)?);
        }
    }
    let probe = if a.probe {
        let spec = ProbeSpec {
            lambda: lambda[0],
            a: geometry[0].a,
            k: geometry[0].k,
            n: n[0],
            block: 2,
            m_max: 12,
            max_level: 3,
            thetas: if a.thetas.is_empty() { DEFAULT_THETAS.to_vec() } else { a.thetas },
            trials,
            master_seed: seed,
            check,
            parallelism: a.parallelism,
        };
        Some(exponential_moment_probe(&spec)?)
    } else {
        None
    };
    let report = CarpetReport { cells: &out.cells, hole_stats, probe };
    ctx.print(
        || {
            let mut s = ensemble_table(&out);
            for h in &report.hole_stats {
                s.push('\n');
                s.push_str(&hole_table(h));
            }
            if let Some(p) = &report.probe {
                s.push('\n');
                s.push_str(&probe_table(p));
            }
            s
        },
        &report,
    )?;
    Ok(code)
}

fn replay_check(ctx: &Context, a: ReplayArgs) -> Result<i32> {
    let lambda = required(a.lambda, "lambda")?;
    let half = required(a.a, "a")?;
    let params = CarpetParams::new(lambda, required(a.n, "n")?, a.spacing.unwrap_or(half * half), half);
    let seed = resolve_seed(a.seed)?;
    let check = a.check.unwrap_or_default().into();
    let mut reports: Vec<ReplayReport> = Vec::new();
    for t in 0..a.trials.unwrap_or(1) {
        let mut r = mass_balance_replay_with(params, seed.wrapping_add(t), check)?;
        let n = params.n;
        if r.full.m[n] != 0 {
            r.mismatches.push(format!("M_n = {} is not 0", r.full.m[n]));
        }
        reports.push(r);
    }
    let passed = reports.iter().all(ReplayReport::passed);
    ctx.print(
        || {
            let mut s = String::new();
            for (t, r) in reports.iter().enumerate() {
                let n = params.n;
                s.push_str(&format!(
                    "seed {}: Frozen = {}, Exit = {}, M_0 = {} (<= {}), M_n = {}\n",
                    seed.wrapping_add(t as u64),
                    r.full.frozen,
                    r.full.exit,
                    r.full.m[0],
                    n / 2,
                    r.full.m[n]
                ));
                let mut tab = Table::new(["block", "M_i", "S full", "S replay", "L full", "L replay", "M_(i-1)"]);
                for b in &r.blocks {
                    tab.row([
                        b.block.to_string(),
                        b.mass.to_string(),
                        b.frozen_full.to_string(),
                        b.frozen_replay.to_string(),
                        b.left_full.to_string(),
                        b.left_replay.to_string(),
                        b.fed_left.to_string(),
                    ]);
                }
                s.push_str(&tab.render());
                for m in &r.mismatches {
                    s.push_str(&format!("mismatch: {m}\n"));
                }
            }
            s.push_str(if passed { "all replay equalities hold\n" } else { "replay equalities FAILED\n" });
            s
        },
        &reports,
    )?;
    Ok(if passed { exit::OK } else { exit::INVARIANT })
}

#[derive(Serialize)]
struct LawRow {
    x: i64,
    y: String,
    y_tilde: String,
}

#[derive(Serialize)]
struct TailRow {
    b: f64,
    gamma: f64,
    nu: f64,
    bound: Option<f64>,
    textbook: Option<f64>,
    note: Option<String>,
}

#[derive(Serialize)]
struct DeskStats {
    spec: JumpLawSpec,
    law: Vec<LawRow>,
    drift_y: String,
    drift_y_tilde: String,
    drift_y_f64: f64,
    drift_y_tilde_f64: f64,
    /// `(v+1)δ`, which should equal the gap between the two drifts.
    gap: String,
    tails: Vec<TailRow>,
}

#[derive(Serialize)]
struct HugeScale {
    chain: LogScaleDrift,
    /// `(b/a, γ, c)` with `log bound = c·a` at `ν = −40`.
    tail_exponents: Vec<(f64, f64, f64)>,
    far_tail_reference: f64,
    below_minus_40: bool,
}

#[derive(Serialize, Default)]
struct BlockStatsReport {
    paper_scale: Option<HugeScale>,
    desk: Option<DeskStats>,
    hole: Option<HoleLemmaReport>,
    dominance: Option<DominanceReport>,
}

fn tail_row(b: f64, gamma: f64, nu: f64) -> TailRow {
    match (hoeffding_tail(b, gamma, nu), standard_hoeffding_tail(b, gamma, nu)) {
        (Ok(x), Ok(y)) => TailRow { b, gamma, nu, bound: Some(x), textbook: Some(y), note: None },
        (Err(e), _) | (_, Err(e)) => TailRow { b, gamma, nu, bound: None, textbook: None, note: Some(e.to_string()) },
    }
}

fn block_stats(ctx: &Context, a: BlockStatsArgs) -> Result<i32> {
    let lambda = required(a.lambda, "lambda")?;
    let mut report = BlockStatsReport::default();
    if a.paper_scale {
        let log_a = a.log_a.unwrap_or_else(|| reference_log_a(lambda));
        let chain = log_scale_drift_bound(lambda, log_a)?;
        // The exponent is linear in a; evaluate at a = 6 where γb is an integer.
        let tail_exponents = [(1.0 / 6.0, 1.0), (2.0 / 3.0, 0.75)]
            .iter()
            .map(|&(ratio, gamma)| Ok((ratio, gamma, log_hoeffding_tail(6.0 * ratio, gamma, -40.0)? / 6.0)))
            .collect::<Result<Vec<_>>>()?;
        report.paper_scale = Some(HugeScale {
            below_minus_40: chain.y_bound <= -40.0 && chain.y_tilde_bound <= -40.0,
            chain,
            tail_exponents,
            far_tail_reference: far_tail_reference(),
        });
    } else if a.a.is_none() {
        return Err(LabError::usage("--a is required unless --paper-scale is given"));
    }
    if let Some(half) = a.a {
        let k = a.spacing.unwrap_or(half * half);
        let spec = JumpLawSpec::new(lambda, half, k, a.v.unwrap_or(half / 3))?;
        let d = drift(&spec)?;
        let (y, yt) = (spec.y_law(), spec.y_tilde_law());
        let law = y
            .support
            .iter()
            .map(|&x| LawRow { x, y: y.mass(x).to_string(), y_tilde: yt.mass(x).to_string() })
            .collect();
        let gap = spec.delta() * num_rational::BigRational::from_integer((spec.v + 1).into());
        let nu = d.y_tilde_f64();
        let tails = vec![
            tail_row(half as f64 / 6.0, 1.0, nu),
            tail_row(2.0 * half as f64 / 3.0, 0.75, nu),
        ];
        report.desk = Some(DeskStats {
            drift_y: d.y.to_string(),
            drift_y_tilde: d.y_tilde.to_string(),
            drift_y_f64: d.y_f64(),
            drift_y_tilde_f64: nu,
            gap: gap.to_string(),
            law,
            tails,
            spec: spec.clone(),
        });

        let runs = a.runs.unwrap_or(0);
        if runs > 0 {
            let params = CarpetParams::new(lambda, a.n.unwrap_or(16), k as i64, half as i64);
            let options = RunOptions { check: a.check.unwrap_or_default().into(), trace: true, ..RunOptions::default() };
            let base = cell_seed(resolve_seed(a.seed)?, 0);
            let v = spec.v as i64;
            let pool = rayon::ThreadPoolBuilder::new().num_threads(a.parallelism.unwrap_or(0)).build()?;
            let results: Vec<(RunRecord, DisplacementHistogram)> = pool.install(|| {
                (0..runs)
                    .into_par_iter()
                    .map(|t| {
                        let mut hist = DisplacementHistogram::new(v);
                        let rec = CarpetHole::new(params, trial_seed(base, t), options)?.run_observed(&mut hist)?;
                        Ok((rec, hist))
                    })
                    .collect::<std::result::Result<_, arw_core::Error>>()
            })?;
            let mut hist = DisplacementHistogram::new(v);
            for (_, h) in &results {
                hist.merge(h);
            }
            let records: Vec<RunRecord> = results.into_iter().map(|(r, _)| r).collect();
            report.hole = Some(hole_lemma_stats(&records)?);
            report.dominance = Some(dominance_check(&yt, &hist, 3.0));
        }
    }
    ctx.print(|| block_stats_text(&report), &report)?;
    Ok(exit::OK)
}

fn block_stats_text(r: &BlockStatsReport) -> String {
    let mut s = String::new();
    if let Some(p) = &r.paper_scale {
        let c = &p.chain;
        s.push_str(&format!("log-scale drift chain at lambda = {}, log a = {:.4}\n", c.lambda, c.log_a));
        s.push_str(&format!("  E[Y_v]  <= {:.4}\n  E[Y~_v] <= {:.4}\n", c.y_bound, c.y_tilde_bound));
        s.push_str(&format!(
            "  both <= -40: {}\n",
            if p.below_minus_40 { "yes" } else { "no" }
        ));
        for (ratio, gamma, coef) in &p.tail_exponents {
            s.push_str(&format!("  tail bound at b = {ratio:.4}a, gamma = {gamma}, nu = -40: exp({coef:.1} a)\n"));
        }
        s.push_str(&format!("  far-tail reference e^-100 = {}\n", num(p.far_tail_reference)));
    }
    if let Some(d) = &r.desk {
        let sp = &d.spec;
        s.push_str(&format!("jump laws at lambda = {}, a = {}, K = {}, v = {}\n", sp.lambda, sp.a, sp.k, sp.v));
        let mut t = Table::new(["x", "P(Y_v = x)", "P(Y~_v = x)"]);
        for row in &d.law {
            t.row([row.x.to_string(), row.y.clone(), row.y_tilde.clone()]);
        }
        s.push_str(&t.render());
        s.push_str(&format!("E[Y_v]  = {} = {}\n", d.drift_y, num(d.drift_y_f64)));
        s.push_str(&format!("E[Y~_v] = {} = {}\n", d.drift_y_tilde, num(d.drift_y_tilde_f64)));
        s.push_str(&format!("(v+1) delta = {}\n", d.gap));
        let mut t = Table::new(["b", "gamma", "nu", "bound", "textbook", "note"]);
        for row in &d.tails {
            t.row([
                num(row.b),
                row.gamma.to_string(),
                num(row.nu),
                row.bound.map(num).unwrap_or_else(|| "-".into()),
                row.textbook.map(num).unwrap_or_else(|| "-".into()),
                row.note.clone().unwrap_or_default(),
            ]);
        }
        s.push_str(&t.render());
    }
    if let Some(h) = &r.hole {
        s.push('\n');
        s.push_str(&hole_table(h));
    }
    if let Some(d) = &r.dominance {
        s.push_str(&format!(
            "\ndominance of Y~_{} over {} displacements (hole offset >= v): {}\n",
            d.v,
            d.samples,
            if d.passed { "holds" } else { "FAILS" }
        ));
        let mut t = Table::new(["x", "law cdf", "empirical cdf", "se", ""]);
        for p in &d.points {
            t.row([
                p.x.to_string(),
                num(p.law_cdf),
                num(p.empirical_cdf),
                num(p.se),
                if p.ok { String::new() } else { "violated".into() },
            ]);
        }
        s.push_str(&t.render());
    }
    s
}

fn sweep(ctx: &Context, a: SweepArgs) -> Result<i32> {
    let spec = SweepSpec {
        lambdas: nonempty(a.lambda, "lambda")?,
        zetas: nonempty(a.zeta, "zeta")?,
        half_width: a.half_width.unwrap_or(200),
        k: a.k.unwrap_or(10),
        trials: a.trials.unwrap_or(100),
        master_seed: resolve_seed(a.seed)?,
        parallelism: a.parallelism,
    };
    let grid = sweep_phase(&spec)?;
    let dir = a.out.unwrap_or_else(|| PathBuf::from("."));
    write_file(&dir, "sweep_plot.csv", grid.plot_csv()?.as_bytes())?;
    write_ensemble(&dir, "sweep", &grid.ensemble)?;
    ctx.print(|| phase_table(&grid), &grid.points)?;
    Ok(exit::OK)
}

fn verify_cmd(ctx: &Context, a: VerifyArgs) -> Result<i32> {
    let ids = if a.only.is_empty() { verify::ALL.to_vec() } else { a.only };
    if let Some(bad) = ids.iter().find(|i| !verify::ALL.contains(i)) {
        return Err(LabError::usage(format!("unknown check {bad}; ids are 1-11")));
    }
    let scale = if a.quick { Scale::Quick } else { Scale::Full };
    let results = verify::run(&ids, scale, a.parallelism);
    let failed = results.iter().filter(|r| !r.passed).count();
    ctx.print(
        || {
            let mut s: String = results.iter().map(|r| r.line() + "\n").collect();
            s.push_str(&format!("{} of {} checks passed\n", results.len() - failed, results.len()));
            s
        },
        &results,
    )?;
    Ok(if failed == 0 { exit::OK } else { exit::FAILED })
}
