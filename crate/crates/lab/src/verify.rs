//! The acceptance checks, shared by `arw verify` and the `acceptance` test
//! target. Each check returns a [`CriterionResult`]; a check passes only if
//! its condition holds and it finishes inside its time limit.

use std::time::{Duration, Instant};

use arw_core::block_stats::{
    drift, hole_lemma_stats, hoeffding_tail, log_hoeffding_tail, log_scale_drift_bound, reference_log_a,
    JumpLawSpec, JumpSampler,
};
use arw_core::carpet::{mass_balance_replay, CarpetParams};
use arw_core::rng::{below, derive_seed, uniform, SplitMix64};
use arw_core::sitewise::{
    stabilize, BoundaryPolicy, Configuration, SleepRate, StackSystem, TopplingOrder,
};
use num_rational::BigRational;
use serde::Serialize;

use crate::ensemble::{run_ensemble, summary_csv, Check, EnsembleSpec, Experiment, Geometry, SamplerChoice, Stat};
use crate::error::Result;

/// Sizes for each check. `Full` meets the stated sample sizes; `Quick`
/// shrinks every sample for a smoke run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scale {
    Full,
    Quick,
}

impl Scale {
    fn pick<T>(self, full: T, quick: T) -> T {
        match self {
            Scale::Full => full,
            Scale::Quick => quick,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CriterionResult {
    pub id: u32,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    #[serde(rename = "elapsed_secs", serialize_with = "secs")]
    pub elapsed: Duration,
    #[serde(rename = "limit_secs", serialize_with = "opt_secs")]
    pub limit: Option<Duration>,
}

fn secs<S: serde::Serializer>(d: &Duration, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_f64(d.as_secs_f64())
}

fn opt_secs<S: serde::Serializer>(d: &Option<Duration>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match d {
        Some(d) => s.serialize_some(&d.as_secs_f64()),
        None => s.serialize_none(),
    }
}

impl CriterionResult {
    /// One line: verdict, id, name, timing and detail.
    pub fn line(&self) -> String {
        let limit = self.limit.map(|l| format!(" / limit {}s", l.as_secs())).unwrap_or_default();
        format!(
            "[{}] {:>2} {} ({:.2}s{limit}): {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.elapsed.as_secs_f64(),
            self.detail
        )
    }
}

pub const ALL: [u32; 11] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11];

struct Timer {
    start: Instant,
}

impl Timer {
    fn start() -> Self {
        Timer { start: Instant::now() }
    }

    fn finish(self, id: u32, name: &'static str, ok: bool, detail: String, limit: Option<u64>) -> CriterionResult {
        let elapsed = self.start.elapsed();
        let limit = limit.map(Duration::from_secs);
        let in_time = limit.is_none_or(|l| elapsed <= l);
        let detail = if ok && !in_time { format!("{detail}; over the time limit") } else { detail };
        CriterionResult { id, name, passed: ok && in_time, detail, elapsed, limit }
    }
}

fn failed(id: u32, name: &'static str, t: Timer, e: impl std::fmt::Display) -> CriterionResult {
    t.finish(id, name, false, format!("error: {e}"), None)
}

/// Runs the requested checks in order. Checks 2 and 3 share one ensemble.
pub fn run(ids: &[u32], scale: Scale, parallelism: Option<usize>) -> Vec<CriterionResult> {
    let mut out = Vec::new();
    let mut shared: Option<(CriterionResult, CriterionResult)> = None;
    for &id in ids {
        let r = match id {
            1 => abelian(scale),
            2 | 3 => {
                let pair = shared.get_or_insert_with(|| conservation_and_properties(scale, parallelism));
                if id == 2 { pair.0.clone() } else { pair.1.clone() }
            }
            4 => replay(scale),
            5 => excursion_law(scale),
            6 => drift_identities(scale),
            7 => hoeffding_formula(),
            8 => gamblers_ruin(scale, parallelism),
            9 => determinism(scale),
            10 => decay_shape(scale, parallelism),
            11 => phase_sweep(scale, parallelism),
            _ => continue,
        };
        out.push(r);
    }
    out
}

/// Random configurations stabilized under the leftmost order and under
/// many random orders on the same stacks.
pub fn abelian(scale: Scale) -> CriterionResult {
    const NAME: &str = "abelian property";
    let t = Timer::start();
    let configs = scale.pick(200, 40);
    let orders = 50;
    let mut rng = SplitMix64::new(0xA11CE);
    let mut mismatches = 0;
    let mut topplings = 0u64;
    for c in 0..configs {
        let len = 1 + below(&mut rng, 12) as i64;
        let particles = 1 + below(&mut rng, 6);
        let lambda = 3.0 * uniform(&mut rng);
        // Absorbing ends guarantee termination; a closed interval with more
        // particles than sites never stabilizes.
        let mut config = match Configuration::empty(0, len - 1, BoundaryPolicy::Absorb) {
            Ok(c) => c,
            Err(e) => return failed(1, NAME, t, e),
        };
        for _ in 0..particles {
            let x = below(&mut rng, len as u64) as i64;
            if let Err(e) = config.add_active(x, 1) {
                return failed(1, NAME, t, e);
            }
        }
        let rate = SleepRate::new(lambda).expect("lambda in [0, 3)");
        let stack_seed = derive_seed(0xA11CE, c);
        let settle = |order| {
            let mut stacks = StackSystem::new(stack_seed, rate, 0, len - 1)?;
            stabilize(config.clone(), &mut stacks, order)
        };
        let reference = match settle(TopplingOrder::LeftmostUnstable) {
            Ok(r) => r,
            Err(e) => return failed(1, NAME, t, e),
        };
        topplings += reference.topplings;
        for o in 0..orders {
            match settle(TopplingOrder::RandomUnstable { seed: derive_seed(stack_seed, o) }) {
                Ok(r) if r.configuration == reference.configuration && r.odometer == reference.odometer => {}
                Ok(_) => mismatches += 1,
                Err(e) => return failed(1, NAME, t, e),
            }
        }
    }
    let detail = format!(
        "{configs} configurations x {orders} random orders, {mismatches} mismatches, {topplings} reference topplings"
    );
    t.finish(1, NAME, mismatches == 0 && topplings > 0, detail, Some(30))
}

fn conservation_spec(scale: Scale, parallelism: Option<usize>) -> EnsembleSpec {
    EnsembleSpec {
        experiment: Experiment::CarpetHole {
            lambda: vec![0.0, 0.2, 1.0, 5.0],
            geometry: (3..=6).map(|a| Geometry { a, k: a * a }).collect(),
            n: vec![4, 8, 16, 32],
            m: 0,
            check: Check::On,
            trace: false,
        },
        trials: scale.pick(16, 2),
        master_seed: 2,
        parallelism,
    }
}

/// Exit + Frozen = n/2 and Frozen = Σ S_i on every run, and no block
/// property violation with checking on.
pub fn conservation_and_properties(scale: Scale, parallelism: Option<usize>) -> (CriterionResult, CriterionResult) {
    const C: &str = "conservation identities";
    const P: &str = "block properties after every attempt";
    let t = Timer::start();
    let spec = conservation_spec(scale, parallelism);
    let out = match run_ensemble(&spec) {
        Ok(o) => o,
        Err(e) => {
            let r = failed(2, C, t, &e);
            return (r.clone(), CriterionResult { id: 3, name: P, ..r });
        }
    };
    let runs = out.trials.len();
    let mut conservation = 0usize;
    let mut properties = 0usize;
    let mut aborted = 0usize;
    for rec in &out.trials {
        match &rec.outcome {
            crate::ensemble::TrialOutcome::Carpet(r) => {
                let n = r.parameters.n as u64;
                let sum_s: u64 = r.s_vec.iter().sum();
                if r.exit + r.frozen != n / 2 || r.frozen != sum_s {
                    conservation += 1;
                }
                properties += r.property_violations.len();
            }
            crate::ensemble::TrialOutcome::Error { exit_code, .. } => {
                aborted += 1;
                if *exit_code == crate::error::exit::INVARIANT {
                    properties += 1;
                }
            }
            crate::ensemble::TrialOutcome::Origin { .. } => {}
        }
    }
    let elapsed = t.start.elapsed();
    let limit = Some(Duration::from_secs(120));
    let in_time = elapsed <= Duration::from_secs(120);
    let c = CriterionResult {
        id: 2,
        name: C,
        passed: conservation == 0 && aborted == 0 && in_time,
        detail: format!("{runs} runs over 64 cells, {conservation} identity failures, {aborted} aborted runs"),
        elapsed,
        limit,
    };
    let p = CriterionResult {
        id: 3,
        name: P,
        passed: properties == 0 && aborted == 0,
        detail: format!("{runs} runs with checking on, {properties} violations"),
        elapsed,
        limit: None,
    };
    (c, p)
}

/// Block-by-block replays reproduce the full run's S, L and M exactly.
pub fn replay(scale: Scale) -> CriterionResult {
    const NAME: &str = "mass-balance replay";
    let t = Timer::start();
    let runs = scale.pick(100u64, 20);
    let lambdas = [0.0, 0.2, 0.5, 1.0, 5.0];
    let mut failures = Vec::new();
    for s in 0..runs {
        let n = [4, 8, 16][(s % 3) as usize];
        let a = 3 + (s % 4) as i64;
        let lambda = lambdas[(s % 5) as usize];
        let params = CarpetParams::new(lambda, n, a * a, a);
        let seed = derive_seed(4, s);
        match mass_balance_replay(params, seed) {
            Ok(r) => {
                let mut bad = r.mismatches.clone();
                if r.full.m[n] != 0 {
                    bad.push(format!("M_n = {}", r.full.m[n]));
                }
                if !bad.is_empty() {
                    failures.push(format!("seed {seed} (n={n}, a={a}, lambda={lambda}): {}", bad.join("; ")));
                }
            }
            Err(e) => failures.push(format!("seed {seed}: {e}")),
        }
    }
    let mut detail = format!("{runs} runs, {} failing", failures.len());
    if let Some(f) = failures.first() {
        detail.push_str(&format!("; first: {f}"));
    }
    t.finish(4, NAME, failures.is_empty(), detail, Some(120))
}

/// Maximum of a simple random walk started at 1 and stopped at 0; walks
/// are cut once they pass `cap`, which lands in the `> cap` bin.
fn excursion_max(rng: &mut SplitMix64, cap: i64) -> i64 {
    let (mut x, mut max) = (1i64, 1i64);
    while x > 0 && max <= cap {
        x += if below(rng, 2) == 1 { 1 } else { -1 };
        max = max.max(x);
    }
    max
}

/// Simulated excursion maxima against `1/(z(z+1))` bin by bin.
pub fn excursion_law(scale: Scale) -> CriterionResult {
    const NAME: &str = "excursion-max law";
    let t = Timer::start();
    let samples = scale.pick(1_000_000u64, 100_000);
    let mut counts = [0u64; 12];
    let mut rng = SplitMix64::new(5);
    for _ in 0..samples {
        let z = excursion_max(&mut rng, 10).min(11);
        counts[z as usize] += 1;
    }
    let mut worst = 0.0f64;
    let mut ok = true;
    for z in 1..=10u64 {
        let p = 1.0 / (z * (z + 1)) as f64;
        let se = (p * (1.0 - p) / samples as f64).sqrt();
        let dev = (counts[z as usize] as f64 / samples as f64 - p).abs() / se;
        worst = worst.max(dev);
        ok &= dev <= 4.0;
    }
    let detail = format!("{samples} excursions, worst bin deviation {worst:.2} SE (limit 4)");
    t.finish(5, NAME, ok, detail, Some(60))
}

fn drift_grid() -> Vec<JumpLawSpec> {
    let mut out = Vec::new();
    for &lambda in &[0.0, 0.2, 0.5, 1.0, 2.0, 5.0] {
        for &(a, k) in &[(3u64, 9u64), (3, 12), (6, 36), (12, 144), (48, 2304)] {
            for v in [0, 1, a / 3, a / 2, a] {
                if let Ok(s) = JumpLawSpec::new(lambda, a, k, v) {
                    out.push(s);
                }
            }
        }
    }
    out
}

fn mc_mean(spec: &JumpLawSpec, tilde: bool, samples: u64, seed: u64) -> Stat {
    let sampler = JumpSampler::new(spec).expect("validated spec");
    let mut rng = SplitMix64::new(seed);
    let (mut sum, mut sq) = (0.0f64, 0.0f64);
    for _ in 0..samples {
        let y = if tilde { sampler.sample_y_tilde(&mut rng) } else { sampler.sample_y(&mut rng) } as f64;
        sum += y;
        sq += y * y;
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = (sq - n * mean * mean) / (n - 1.0);
    Stat { mean, se: (var / n).sqrt() }
}

/// Exact drift gap, Monte Carlo sampler means, and the log-scale chain.
pub fn drift_identities(scale: Scale) -> CriterionResult {
    const NAME: &str = "drift identities";
    let t = Timer::start();
    let grid = drift_grid();
    let mut exact_failures = Vec::new();
    for s in &grid {
        let d = match drift(s) {
            Ok(d) => d,
            Err(e) => return failed(6, NAME, t, e),
        };
        let gap = BigRational::from_integer((s.v + 1).into()) * s.delta();
        let laws_ok = s.y_law().mean() == d.y && s.y_tilde_law().mean() == d.y_tilde;
        if &d.y_tilde - &d.y != gap || !laws_ok {
            exact_failures.push(format!("(lambda={}, a={}, K={}, v={})", s.lambda, s.a, s.k, s.v));
        }
    }
    let samples = scale.pick(1_000_000u64, 100_000);
    let mc_specs = [
        JumpLawSpec::new(0.5, 6, 36, 2),
        JumpLawSpec::new(1.0, 12, 144, 4),
        JumpLawSpec::new(0.2, 48, 2304, 16),
    ];
    let mut worst = 0.0f64;
    let mut mc_ok = true;
    for (i, s) in mc_specs.iter().enumerate() {
        let s = match s {
            Ok(s) => s,
            Err(e) => return failed(6, NAME, t, e),
        };
        let d = drift(s).expect("validated spec");
        for (tilde, exact) in [(false, d.y_f64()), (true, d.y_tilde_f64())] {
            let m = mc_mean(s, tilde, samples, derive_seed(6, 2 * i as u64 + tilde as u64));
            let dev = (m.mean - exact).abs() / m.se;
            worst = worst.max(dev);
            mc_ok &= dev <= 4.0;
        }
    }
    let mut chain = Vec::new();
    let mut chain_ok = true;
    for lambda in [1.0, 2.0, 5.0] {
        match log_scale_drift_bound(lambda, reference_log_a(lambda)) {
            Ok(b) => {
                chain_ok &= b.y_bound <= -48.0 && b.y_tilde_bound <= -48.0;
                chain.push(format!("{:.2}", b.y_tilde_bound));
            }
            Err(e) => return failed(6, NAME, t, e),
        }
    }
    let detail = format!(
        "{} exact cases ({} failing), MC worst {worst:.2} SE over {samples} samples, chain bounds at lambda 1/2/5: {}",
        grid.len(),
        exact_failures.len(),
        chain.join(" / ")
    );
    t.finish(6, NAME, exact_failures.is_empty() && mc_ok && chain_ok, detail, Some(60))
}

/// Formula reproduction and the `≤ e^{−a}` check for `a = 12, 18, …, 9996`.
pub fn hoeffding_formula() -> CriterionResult {
    const NAME: &str = "tail-bound formula";
    let t = Timer::start();
    let mut ok = true;
    let mut worst_margin = f64::INFINITY;
    let mut cases = 0;
    let mut formula = 0;
    for (b, gamma, nu) in [(6.0, 1.0, -40.0), (2.0, 0.5, -3.0), (8.0, 0.75, -1.5), (12.0, 1.0, -1.239)] {
        if let Ok(v) = hoeffding_tail(b, gamma, nu) {
            let direct = (-2.0 * gamma * (1.0f64 + gamma * nu).powi(2) * b).exp();
            ok &= (v - direct).abs() <= 1e-12 * direct.max(f64::MIN_POSITIVE);
            formula += 1;
        } else {
            ok = false;
        }
    }
    for a in (12..=10_000u64).step_by(6) {
        let a_f = a as f64;
        for (b, gamma) in [(a_f / 6.0, 1.0), (2.0 * a_f / 3.0, 0.75)] {
            match log_hoeffding_tail(b, gamma, -40.0) {
                Ok(l) => {
                    worst_margin = worst_margin.min(-a_f - l);
                    ok &= l <= -a_f;
                    cases += 1;
                }
                Err(_) => ok = false,
            }
        }
    }
    let detail = format!(
        "{formula} formula cases, {cases} (a, b, gamma) cases, smallest margin log(e^-a) - log(bound) = {worst_margin:.0}"
    );
    t.finish(7, NAME, ok, detail, None)
}

/// Left emission within two consecutive attempts, pooled.
pub fn gamblers_ruin(scale: Scale, parallelism: Option<usize>) -> CriterionResult {
    const NAME: &str = "left emission within two attempts";
    let t = Timer::start();
    let min_attempts = scale.pick(10_000u64, 2_000);
    let spec = EnsembleSpec {
        experiment: Experiment::CarpetHole {
            lambda: vec![0.5],
            geometry: vec![Geometry { a: 6, k: 36 }],
            n: vec![16],
            m: 0,
            check: Check::Off,
            trace: true,
        },
        trials: scale.pick(250, 50),
        master_seed: 8,
        parallelism,
    };
    let out = match run_ensemble(&spec).and_then(|o| o.ensure_complete().map(|_| o)) {
        Ok(o) => o,
        Err(e) => return failed(8, NAME, t, e),
    };
    let records: Vec<_> = out.carpet_records(0).cloned().collect();
    let report = match hole_lemma_stats(&records) {
        Ok(r) => r,
        Err(e) => return failed(8, NAME, t, e),
    };
    let e = &report.left_within_two;
    let threshold = 1.0 / 3.0 - 3.0 * e.se;
    let ok = report.attempts >= min_attempts && e.p >= threshold;
    let detail = format!(
        "{} attempts (need {min_attempts}), {} windows, frequency {:.4} vs 1/3 - 3 SE = {threshold:.4}",
        report.attempts, e.trials, e.p
    );
    t.finish(8, NAME, ok, detail, Some(120))
}

fn determinism_specs(parallelism: usize) -> [EnsembleSpec; 2] {
    [
        EnsembleSpec {
            experiment: Experiment::CarpetHole {
                lambda: vec![0.2, 1.0],
                geometry: vec![Geometry { a: 4, k: 16 }],
                n: vec![4, 8],
                m: 0,
                check: Check::Auto,
                trace: true,
            },
            trials: 24,
            master_seed: 9,
            parallelism: Some(parallelism),
        },
        EnsembleSpec {
            experiment: Experiment::StabilizeOrigin {
                lambda: vec![0.5, 2.0],
                zeta: vec![0.3, 0.8],
                half_width: vec![30],
                k: 3,
                sampler: SamplerChoice::Bernoulli,
            },
            trials: 24,
            master_seed: 9,
            parallelism: Some(parallelism),
        },
    ]
}

/// Summary CSV bytes at one worker and at eight.
pub fn determinism(_scale: Scale) -> CriterionResult {
    const NAME: &str = "determinism across parallelism";
    let t = Timer::start();
    let csv = |p: usize| -> Result<Vec<String>> {
        determinism_specs(p).iter().map(|s| run_ensemble(s).and_then(|o| summary_csv(&o))).collect()
    };
    let (one, eight) = match (csv(1), csv(8)) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => return failed(9, NAME, t, e),
    };
    let same = one == eight;
    let bytes: usize = one.iter().map(String::len).sum();
    let detail = format!("2 ensembles, {bytes} CSV bytes, {}", if same { "identical" } else { "different" });
    t.finish(9, NAME, same, detail, None)
}

/// `3·SE` of a difference of two independent estimates.
fn tolerance(x: Stat, y: Stat) -> f64 {
    3.0 * (x.se * x.se + y.se * y.se).sqrt()
}

/// `P(Frozen ≥ n/4)` does not increase with n beyond noise.
pub fn decay_shape(scale: Scale, parallelism: Option<usize>) -> CriterionResult {
    const NAME: &str = "frozen fraction decay in n";
    let t = Timer::start();
    let spec = EnsembleSpec {
        experiment: Experiment::CarpetHole {
            lambda: vec![0.1],
            geometry: vec![Geometry { a: 6, k: 36 }],
            n: vec![8, 16, 32],
            m: 0,
            check: Check::Off,
            trace: false,
        },
        trials: scale.pick(400, 60),
        master_seed: 10,
        parallelism,
    };
    let out = match run_ensemble(&spec).and_then(|o| o.ensure_complete().map(|_| o)) {
        Ok(o) => o,
        Err(e) => return failed(10, NAME, t, e),
    };
    let p: Vec<Stat> = out.cells.iter().map(|c| c.frozen_quarter.expect("complete carpet cell")).collect();
    let ok = p.windows(2).all(|w| w[1].mean <= w[0].mean + tolerance(w[0], w[1]));
    let shown: Vec<String> = p.iter().map(|s| format!("{:.4}±{:.4}", s.mean, s.se)).collect();
    let detail = format!("{} trials per n; P(F >= n/4) at n = 8/16/32: {}", spec.trials, shown.join(", "));
    t.finish(10, NAME, ok, detail, Some(180))
}

/// Activity at the origin does not decrease in ζ beyond noise.
pub fn phase_sweep(scale: Scale, parallelism: Option<usize>) -> CriterionResult {
    const NAME: &str = "phase sweep monotone in density";
    let t = Timer::start();
    let lambdas = [0.2, 2.0];
    let zetas: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
    let spec = EnsembleSpec {
        experiment: Experiment::StabilizeOrigin {
            lambda: lambdas.to_vec(),
            zeta: zetas.clone(),
            half_width: vec![200],
            k: 10,
            sampler: SamplerChoice::Bernoulli,
        },
        trials: scale.pick(200, 30),
        master_seed: 11,
        parallelism,
    };
    let out = match run_ensemble(&spec).and_then(|o| o.ensure_complete().map(|_| o)) {
        Ok(o) => o,
        Err(e) => return failed(11, NAME, t, e),
    };
    let mut ok = true;
    let mut rows = Vec::new();
    for (li, lambda) in lambdas.iter().enumerate() {
        let row: Vec<Stat> = out.cells[li * zetas.len()..(li + 1) * zetas.len()]
            .iter()
            .map(|c| c.active.expect("complete origin cell"))
            .collect();
        ok &= row.windows(2).all(|w| w[1].mean >= w[0].mean - tolerance(w[0], w[1]));
        let shown: Vec<String> = row.iter().map(|s| format!("{:.2}", s.mean)).collect();
        rows.push(format!("lambda {lambda}: {}", shown.join(" ")));
    }
    let detail = format!("{} trials per cell; {}", spec.trials, rows.join("; "));
    t.finish(11, NAME, ok, detail, Some(300))
}
