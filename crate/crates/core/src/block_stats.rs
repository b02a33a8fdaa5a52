//! Laws of the hole's jumps inside a block, their drifts, the tail bound
//! used to control sums of them, the auxiliary chain `W`, and empirical
//! statistics of the hole process extracted from carpet-hole runs.
//!
//! Analytic quantities are exact rationals. Floating point only appears in
//! samplers and Monte Carlo aggregates.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand_core::RngCore;
use serde::{Deserialize, Serialize};

use crate::carpet::{Outcome, RunRecord, StepEvent, StepKind, StepObserver};
use crate::error::{Error, Result};
use crate::rng::uniform;

/// Samples the maximum `Z` of a simple-random-walk excursion from 0, with
/// `P(Z = z) = 1/(z(z+1))`, by inverting `P(Z ≤ z) = z/(z+1)`.
pub fn sample_excursion_max<R: RngCore + ?Sized>(rng: &mut R) -> u64 {
    let u = uniform(rng);
    let z = libm::ceil(u / (1.0 - u));
    if z < 1.0 {
        1
    } else {
        z as u64
    }
}

/// Exact `P(Z = z)`.
pub fn excursion_max_mass(z: u64) -> BigRational {
    assert!(z >= 1, "Z takes values 1, 2, ...");
    ratio(1, z as i64 * (z as i64 + 1))
}

/// `E[min(Z, v)]`, which is the harmonic number `H_v`.
pub fn truncated_excursion_mean(v: u64) -> BigRational {
    (1..=v as i64).fold(BigRational::zero(), |acc, k| acc + ratio(1, k))
}

fn ratio(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn to_f64(q: &BigRational) -> f64 {
    q.to_f64().unwrap_or(f64::NAN)
}

/// Parameters of the jump laws `Y_v` and `Ỹ_v`.
///
/// `λ` is taken as an `f64` and converted to the exact rational it
/// represents, so `0.2` means the binary value nearest to 0.2.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JumpLawSpec {
    pub lambda: f64,
    pub a: u64,
    #[serde(rename = "K")]
    pub k: u64,
    pub v: u64,
}

impl JumpLawSpec {
    /// Validates `λ ≥ 0`, `K > 2a`, `v ≤ a` and that the residual mass of
    /// `Ỹ_v` at `−v` is non-negative, i.e. `v ≤ K − 2a`.
    pub fn new(lambda: f64, a: u64, k: u64, v: u64) -> Result<Self> {
        let spec = JumpLawSpec { lambda, a, k, v };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::parameter(alloc::format!("lambda must be finite and >= 0, got {}", self.lambda)));
        }
        if self.a == 0 {
            return Err(Error::parameter("a must be >= 1"));
        }
        if self.k <= 2 * self.a {
            return Err(Error::parameter(alloc::format!("need K > 2a, got K = {} and a = {}", self.k, self.a)));
        }
        if self.v > self.a {
            return Err(Error::parameter(alloc::format!("need v <= a, got v = {} and a = {}", self.v, self.a)));
        }
        if self.v > self.k - 2 * self.a {
            return Err(Error::parameter(alloc::format!(
                "residual mass of the dominating law at -v is negative (v = {} > K - 2a = {})",
                self.v,
                self.k - 2 * self.a
            )));
        }
        Ok(())
    }

    fn lambda_q(&self) -> BigRational {
        BigRational::from_float(self.lambda).expect("validated finite")
    }

    /// `λ/(λ+1)`, the probability of sleeping at the hole.
    pub fn sleep_mass(&self) -> BigRational {
        let l = self.lambda_q();
        l.clone() / (l + BigRational::one())
    }

    /// `1/(2(λ+1))`, the probability of each step direction.
    pub fn step_mass(&self) -> BigRational {
        (BigRational::from_integer(2.into()) * (self.lambda_q() + BigRational::one())).recip()
    }

    /// `δ = 1/(2(λ+1)(K−2a))`.
    pub fn delta(&self) -> BigRational {
        self.step_mass() / BigRational::from_integer(BigInt::from(self.k - 2 * self.a))
    }

    /// The law `Y_v`: `+1` for a sleep, `0` for a right excursion, `−min(Z, v)`
    /// for a left excursion.
    pub fn y_law(&self) -> JumpLaw {
        self.law(BigRational::zero())
    }

    /// The law `Ỹ_v`: `Y_v` with mass `δ` moved from `−v` to `+1`.
    pub fn y_tilde_law(&self) -> JumpLaw {
        self.law(self.delta())
    }

    fn law(&self, shift: BigRational) -> JumpLaw {
        let h = self.step_mass();
        let v = self.v as i64;
        let mut support = Vec::with_capacity(self.v as usize + 2);
        let mut masses = Vec::with_capacity(self.v as usize + 2);
        if v == 0 {
            // min(Z, 0) = 0, so both step directions leave the hole in place.
            support.push(0);
            masses.push(h.clone() + h - shift.clone());
        } else {
            // −v collects P(Z ≥ v) = 1/v.
            support.push(-v);
            masses.push(h.clone() * ratio(1, v) - shift.clone());
            for k in (1..v).rev() {
                support.push(-k);
                masses.push(h.clone() * ratio(1, k * (k + 1)));
            }
            support.push(0);
            masses.push(h);
        }
        support.push(1);
        masses.push(self.sleep_mass() + shift);
        JumpLaw { support, masses }
    }
}

/// A finitely supported law on the integers with exact masses.
#[derive(Clone, Debug, PartialEq)]
pub struct JumpLaw {
    /// Ascending.
    pub support: Vec<i64>,
    pub masses: Vec<BigRational>,
}

impl JumpLaw {
    pub fn total_mass(&self) -> BigRational {
        self.masses.iter().fold(BigRational::zero(), |acc, m| acc + m)
    }

    pub fn mean(&self) -> BigRational {
        self.support
            .iter()
            .zip(&self.masses)
            .fold(BigRational::zero(), |acc, (&x, m)| acc + m * BigRational::from_integer(x.into()))
    }

    pub fn mass(&self, x: i64) -> BigRational {
        match self.support.binary_search(&x) {
            Ok(i) => self.masses[i].clone(),
            Err(_) => BigRational::zero(),
        }
    }

    /// `P(X ≤ x)`, exact.
    pub fn cdf(&self, x: i64) -> BigRational {
        self.support
            .iter()
            .zip(&self.masses)
            .take_while(|(&s, _)| s <= x)
            .fold(BigRational::zero(), |acc, (_, m)| acc + m)
    }

    pub fn masses_f64(&self) -> Vec<f64> {
        self.masses.iter().map(to_f64).collect()
    }

    pub fn is_nonnegative(&self) -> bool {
        self.masses.iter().all(|m| !m.is_negative())
    }
}

/// Exact expectations of `Y_v` and `Ỹ_v`.
#[derive(Clone, Debug, PartialEq)]
pub struct Drift {
    pub y: BigRational,
    pub y_tilde: BigRational,
}

impl Drift {
    pub fn y_f64(&self) -> f64 {
        to_f64(&self.y)
    }

    pub fn y_tilde_f64(&self) -> f64 {
        to_f64(&self.y_tilde)
    }
}

/// `E[Y_v] = λ/(λ+1) − H_v/(2(λ+1))` and `E[Ỹ_v] = E[Y_v] + (v+1)δ`, both
/// computed in closed form rather than by summing the laws.
pub fn drift(spec: &JumpLawSpec) -> Result<Drift> {
    spec.validate()?;
    let y = spec.sleep_mass() - spec.step_mass() * truncated_excursion_mean(spec.v);
    let y_tilde = y.clone() + BigRational::from_integer(BigInt::from(spec.v + 1)) * spec.delta();
    Ok(Drift { y, y_tilde })
}

/// Upper bounds on the drifts at `v = a/3` when `a` is too large to
/// represent; `log_a` is the natural logarithm of `a`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogScaleDrift {
    pub lambda: f64,
    pub log_a: f64,
    /// `1 − 1/(λ+1) − (log(a/3) − log 2)/(2(λ+1))`.
    pub y_bound: f64,
    /// `y_bound + 1/((λ+1)a)`, which dominates `(v+1)δ` when `K = a²`,
    /// `v = a/3` and `a ≥ 5`.
    pub y_tilde_bound: f64,
}

pub fn log_scale_drift_bound(lambda: f64, log_a: f64) -> Result<LogScaleDrift> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::parameter("lambda must be finite and >= 0"));
    }
    if !(log_a.is_finite() && log_a >= libm::log(5.0)) {
        return Err(Error::parameter("log a must be finite and at least log 5"));
    }
    let l1 = lambda + 1.0;
    let log_a_third = log_a - libm::log(3.0);
    let y_bound = 1.0 - 1.0 / l1 - (log_a_third - core::f64::consts::LN_2) / (2.0 * l1);
    let y_tilde_bound = y_bound + libm::exp(-log_a) / l1;
    Ok(LogScaleDrift { lambda, log_a, y_bound, y_tilde_bound })
}

/// `log a` for `a = 12⌈e^{100(λ+1)}⌉`, up to the ceiling.
pub fn reference_log_a(lambda: f64) -> f64 {
    libm::log(12.0) + 100.0 * (lambda + 1.0)
}

/// Sampler for `Y_v` and `Ỹ_v` with floating-point probabilities.
///
/// `Ỹ_v` is drawn by coupling: draw `Y_v`, and if it equals `−v` (or `0`
/// when `v = 0`) switch it to `+1` with the probability that moves mass
/// `δ`. So every `Ỹ_v` sample is at least the `Y_v` sample it came from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JumpSampler {
    v: u64,
    up: f64,
    half: f64,
    switch: f64,
}

impl JumpSampler {
    pub fn new(spec: &JumpLawSpec) -> Result<Self> {
        spec.validate()?;
        let half = to_f64(&spec.step_mass());
        let lowest = if spec.v == 0 {
            spec.step_mass() * BigRational::from_integer(2.into())
        } else {
            spec.step_mass() * ratio(1, spec.v as i64)
        };
        Ok(JumpSampler {
            v: spec.v,
            up: to_f64(&spec.sleep_mass()),
            half,
            switch: to_f64(&(spec.delta() / lowest)),
        })
    }

    pub fn v(&self) -> u64 {
        self.v
    }

    pub fn sample_y<R: RngCore + ?Sized>(&self, rng: &mut R) -> i64 {
        y_step(self.up, self.half, self.v, rng)
    }

    pub fn sample_y_tilde<R: RngCore + ?Sized>(&self, rng: &mut R) -> i64 {
        let y = self.sample_y(rng);
        if y == -(self.v as i64) && uniform(rng) < self.switch {
            1
        } else {
            y
        }
    }
}

fn y_step<R: RngCore + ?Sized>(up: f64, half: f64, v: u64, rng: &mut R) -> i64 {
    let u = uniform(rng);
    if u < up {
        1
    } else if u < up + half || v == 0 {
        0
    } else {
        -(sample_excursion_max(rng).min(v) as i64)
    }
}

pub fn sample_y<R: RngCore + ?Sized>(spec: &JumpLawSpec, rng: &mut R) -> Result<i64> {
    Ok(JumpSampler::new(spec)?.sample_y(rng))
}

pub fn sample_y_tilde<R: RngCore + ?Sized>(spec: &JumpLawSpec, rng: &mut R) -> Result<i64> {
    Ok(JumpSampler::new(spec)?.sample_y_tilde(rng))
}

fn check_hoeffding(b: f64, gamma: f64, nu: f64) -> Result<()> {
    if !(b.is_finite() && b > 0.0) {
        return Err(Error::parameter("b must be positive"));
    }
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::parameter("gamma must be positive"));
    }
    let count = gamma * b;
    if libm::fabs(count - libm::round(count)) > 1e-9 * count.max(1.0) {
        return Err(Error::parameter(alloc::format!("gamma * b must be an integer, got {count}")));
    }
    if !(nu.is_finite() && nu < -1.0 / gamma) {
        return Err(Error::parameter(alloc::format!("need nu < -1/gamma, got nu = {nu}")));
    }
    Ok(())
}

/// Logarithm of the tail bound `exp(−2γ(1+γν)²b)` for
/// `P(Σ_{i ≤ γb} Y_i > −b)`, with `Y_i` of mean `ν` in `[−b, 1]`.
pub fn log_hoeffding_tail(b: f64, gamma: f64, nu: f64) -> Result<f64> {
    check_hoeffding(b, gamma, nu)?;
    let s = 1.0 + gamma * nu;
    Ok(-2.0 * gamma * s * s * b)
}

/// `exp(−2γ(1+γν)²b)`; see [`log_hoeffding_tail`].
pub fn hoeffding_tail(b: f64, gamma: f64, nu: f64) -> Result<f64> {
    log_hoeffding_tail(b, gamma, nu).map(libm::exp)
}

/// The textbook Hoeffding bound for the same event: `n = γb` summands in
/// an interval of width `b+1`, deviation `t = −b − nν`, giving
/// `exp(−2t²/(n(b+1)²))`.
pub fn standard_hoeffding_tail(b: f64, gamma: f64, nu: f64) -> Result<f64> {
    check_hoeffding(b, gamma, nu)?;
    let n = gamma * b;
    let t = -b - n * nu;
    Ok(libm::exp(-2.0 * t * t / (n * (b + 1.0) * (b + 1.0))))
}

/// Runs the chain `W_0 = 0`, `W_{t+1} − W_t ~ Y_{W_t}` for `steps` steps and
/// returns `W_0, …, W_steps`.
pub fn simulate_w<R: RngCore + ?Sized>(lambda: f64, steps: usize, rng: &mut R) -> Result<Vec<u64>> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::parameter("lambda must be finite and >= 0"));
    }
    let up = lambda / (lambda + 1.0);
    let half = 0.5 / (lambda + 1.0);
    let mut w = 0u64;
    let mut path = Vec::with_capacity(steps + 1);
    path.push(w);
    for _ in 0..steps {
        let dy = y_step(up, half, w, rng);
        w = (w as i64 + dy) as u64;
        path.push(w);
    }
    Ok(path)
}

/// Fraction of `path` lying in `[lo, hi]`.
pub fn occupation(path: &[u64], lo: u64, hi: u64) -> f64 {
    if path.is_empty() {
        return 0.0;
    }
    path.iter().filter(|&&w| w >= lo && w <= hi).count() as f64 / path.len() as f64
}

/// Below this many trials an estimate is flagged as sparse.
pub const SPARSE_TRIALS: u64 = 30;

/// A Bernoulli frequency with its standard error.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub successes: u64,
    pub trials: u64,
    pub p: f64,
    pub se: f64,
    /// The bound or benchmark this frequency is compared against.
    pub reference: Option<f64>,
    /// Too few trials for the standard error to mean much.
    pub sparse: bool,
}

impl Estimate {
    pub fn new(successes: u64, trials: u64, reference: Option<f64>) -> Self {
        let (p, se) = if trials == 0 {
            (0.0, 0.0)
        } else {
            let p = successes as f64 / trials as f64;
            (p, libm::sqrt(p * (1.0 - p) / trials as f64))
        };
        Estimate { successes, trials, p, se, reference, sparse: trials < SPARSE_TRIALS }
    }
}

/// Attempt-by-attempt view of one block of one run.
///
/// `hole[j]`, `left[j]` and `frozen[j]` are `Hole(j)`, `L(j)` and `S(j)`
/// after `j` attempts (index 0 is the start). `steps[j-1]` and
/// `outcomes[j-1]` describe attempt `j`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HoleTrace {
    pub block: usize,
    pub hole: Vec<i64>,
    pub left: Vec<u64>,
    pub frozen: Vec<bool>,
    pub steps: Vec<u64>,
    pub outcomes: Vec<Outcome>,
}

impl HoleTrace {
    /// Splits the attempt trace of `record` by block. `S(j)` is rebuilt from
    /// outcomes alone: a failure sets it, and it clears when a later attempt
    /// leaves the hole away from the edge.
    pub fn from_record(record: &RunRecord) -> Vec<HoleTrace> {
        let a = record.parameters.a;
        let mut traces: Vec<HoleTrace> = (1..=record.parameters.n)
            .map(|block| HoleTrace {
                block,
                hole: vec![0],
                left: vec![0],
                frozen: vec![false],
                steps: Vec::new(),
                outcomes: Vec::new(),
            })
            .collect();
        for t in &record.attempts {
            let tr = &mut traces[t.block - 1];
            let was_frozen = *tr.frozen.last().unwrap();
            let frozen = t.outcome == Outcome::Failure || (was_frozen && t.hole_after == a);
            let left = tr.left.last().unwrap() + u64::from(t.outcome == Outcome::EmitLeft);
            tr.hole.push(t.hole_after);
            tr.left.push(left);
            tr.frozen.push(frozen);
            tr.steps.push(t.steps);
            tr.outcomes.push(t.outcome);
        }
        traces
    }

    pub fn attempts(&self) -> usize {
        self.outcomes.len()
    }

    /// `τ_ℓ`, the first `j` with `L(j) = ℓ`, for each level reached.
    pub fn first_hits(&self) -> Vec<usize> {
        let mut out = vec![0];
        for (j, w) in self.left.windows(2).enumerate() {
            if w[1] > w[0] {
                out.push(j + 1);
            }
        }
        out
    }

    /// `G_ℓ`: the block was not frozen at any `j` with `L(j) = ℓ`.
    pub fn good(&self, level: u64) -> bool {
        self.left.iter().zip(&self.frozen).all(|(&l, &s)| l != level || !s)
    }

    /// Indices `j` where `Hole(j) = a` and `S(j) = 1` disagree.
    pub fn edge_mismatches(&self, a: i64) -> Vec<usize> {
        (0..self.hole.len()).filter(|&j| (self.hole[j] == a) != self.frozen[j]).collect()
    }
}

/// Empirical frequencies of the hole-process events, pooled over runs that
/// share `(λ, K, a)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HoleLemmaReport {
    pub lambda: f64,
    #[serde(rename = "K")]
    pub k: i64,
    pub a: i64,
    pub runs: usize,
    pub attempts: u64,
    /// `P(Hole(j) > a/2 | Hole(j−1) ∈ [0, a/2] ∪ {a})`.
    pub jump_past_half: Estimate,
    /// `P(a/2 < Hole(j) < a)`.
    pub upper_band: Estimate,
    /// `P(L(j+2) > L(j))` over windows where both attempts happened.
    pub left_within_two: Estimate,
    /// Share of emissions that go left, against `1/2 − a/(2K)`.
    pub left_share: Estimate,
    /// `P(T_j > a³)` over attempts with the block thawed beforehand.
    pub long_attempt: Estimate,
    /// `P(emission with T_j < a/2 | Hole(j−1) ≤ a/2)`.
    pub quick_emission: Estimate,
    /// Frequency of `G_ℓ` over every level reached by every block.
    pub good_levels: Estimate,
    /// Attempts where `Hole(j) = a` and `S(j) = 1` disagree, plus blocks
    /// whose rebuilt final `S` differs from the run's `S_vec`.
    pub edge_mismatches: u64,
    pub warnings: Vec<String>,
}

/// The e^{−100} bound quoted for the two "hole stays low" events.
pub fn far_tail_reference() -> f64 {
    libm::exp(-100.0)
}

pub fn hole_lemma_stats(records: &[RunRecord]) -> Result<HoleLemmaReport> {
    let first = records.first().ok_or_else(|| Error::parameter("no run records"))?;
    let (lambda, k, a) = (first.parameters.lambda, first.parameters.k, first.parameters.a);
    let mut c = [(0u64, 0u64); 7];
    let mut attempts = 0u64;
    let mut mismatches = 0u64;
    for r in records {
        let p = &r.parameters;
        if p.k != k || p.a != a || p.lambda.to_bits() != lambda.to_bits() {
            return Err(Error::parameter("records mix different (lambda, K, a)"));
        }
        if r.attempts.is_empty() {
            return Err(Error::parameter("record carries no attempt trace"));
        }
        for tr in HoleTrace::from_record(r) {
            attempts += tr.attempts() as u64;
            mismatches += tr.edge_mismatches(a).len() as u64;
            if u64::from(*tr.frozen.last().unwrap()) != r.s_vec[tr.block] {
                mismatches += 1;
            }
            for j in 1..tr.hole.len() {
                let (before, after) = (tr.hole[j - 1], tr.hole[j]);
                let hit = |c: &mut (u64, u64), ok: bool| {
                    c.1 += 1;
                    c.0 += u64::from(ok);
                };
                if 2 * before <= a || before == a {
                    hit(&mut c[0], 2 * after > a);
                }
                hit(&mut c[1], 2 * after > a && after < a);
                if tr.outcomes[j - 1].is_emission() {
                    hit(&mut c[3], tr.outcomes[j - 1] == Outcome::EmitLeft);
                }
                if !tr.frozen[j - 1] {
                    hit(&mut c[4], tr.steps[j - 1] > (a * a * a) as u64);
                }
                if 2 * before <= a {
                    let quick = tr.outcomes[j - 1].is_emission() && 2 * tr.steps[j - 1] < a as u64;
                    hit(&mut c[5], quick);
                }
            }
            for j in 0..tr.left.len().saturating_sub(2) {
                c[2].1 += 1;
                c[2].0 += u64::from(tr.left[j + 2] > tr.left[j]);
            }
            for level in 0..=*tr.left.last().unwrap() {
                c[6].1 += 1;
                c[6].0 += u64::from(tr.good(level));
            }
        }
    }
    let (af, kf) = (a as f64, k as f64);
    let est = |i: usize, reference: Option<f64>| Estimate::new(c[i].0, c[i].1, reference);
    let report = HoleLemmaReport {
        lambda,
        k,
        a,
        runs: records.len(),
        attempts,
        jump_past_half: est(0, Some(far_tail_reference())),
        upper_band: est(1, Some(far_tail_reference())),
        left_within_two: est(2, Some(1.0 / 3.0)),
        left_share: est(3, Some(0.5 - af / (2.0 * kf))),
        long_attempt: est(4, Some(1.0 / af)),
        quick_emission: est(5, Some(1.0 / (4.0 * af))),
        good_levels: est(6, None),
        edge_mismatches: mismatches,
        warnings: Vec::new(),
    };
    Ok(with_warnings(report))
}

fn with_warnings(mut r: HoleLemmaReport) -> HoleLemmaReport {
    let named = [
        ("jump_past_half", &r.jump_past_half),
        ("upper_band", &r.upper_band),
        ("left_within_two", &r.left_within_two),
        ("left_share", &r.left_share),
        ("long_attempt", &r.long_attempt),
        ("quick_emission", &r.quick_emission),
        ("good_levels", &r.good_levels),
    ];
    let warnings = named
        .iter()
        .filter(|(_, e)| e.sparse)
        .map(|(name, e)| alloc::format!("{name}: only {} trials, interval is wide", e.trials))
        .collect();
    r.warnings = warnings;
    r
}

/// Histogram of hole displacements over steps that did not emit, restricted
/// to steps taken with the hole at offset `≥ v`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DisplacementHistogram {
    pub v: i64,
    pub counts: BTreeMap<i64, u64>,
    pub total: u64,
    pub emissions: u64,
}

impl DisplacementHistogram {
    pub fn new(v: i64) -> Self {
        DisplacementHistogram { v, ..Default::default() }
    }

    pub fn record(&mut self, e: &StepEvent) {
        if e.hole_before < self.v {
            return;
        }
        let d = match e.kind {
            StepKind::Sleep => 1,
            StepKind::Return { displacement } => displacement,
            StepKind::Emission { .. } => {
                self.emissions += 1;
                return;
            }
        };
        *self.counts.entry(d).or_insert(0) += 1;
        self.total += 1;
    }

    pub fn merge(&mut self, other: &DisplacementHistogram) {
        for (&d, &c) in &other.counts {
            *self.counts.entry(d).or_insert(0) += c;
        }
        self.total += other.total;
        self.emissions += other.emissions;
    }

    /// Empirical `P(D ≤ x)`.
    pub fn cdf(&self, x: i64) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        self.counts.range(..=x).map(|(_, &c)| c).sum::<u64>() as f64 / self.total as f64
    }
}

impl StepObserver for DisplacementHistogram {
    fn on_step(&mut self, event: StepEvent) {
        self.record(&event);
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DominancePoint {
    pub x: i64,
    pub law_cdf: f64,
    pub empirical_cdf: f64,
    pub se: f64,
    pub ok: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DominanceReport {
    pub v: u64,
    pub samples: u64,
    pub points: Vec<DominancePoint>,
    pub passed: bool,
}

/// Checks that `law` dominates the histogram: at every `x` in the support,
/// `P(law ≤ x) ≤ P̂(D ≤ x) + z·SE`.
pub fn dominance_check(law: &JumpLaw, hist: &DisplacementHistogram, z: f64) -> DominanceReport {
    let n = hist.total.max(1) as f64;
    let mut points = Vec::new();
    let lowest = hist.counts.keys().next().copied().unwrap_or(0).min(law.support[0]);
    for x in lowest..=1 {
        let f = to_f64(&law.cdf(x));
        let g = hist.cdf(x);
        let se = libm::sqrt(g * (1.0 - g) / n).max(1.0 / n);
        points.push(DominancePoint { x, law_cdf: f, empirical_cdf: g, se, ok: f <= g + z * se });
    }
    let passed = points.iter().all(|p| p.ok);
    DominanceReport { v: hist.v.max(0) as u64, samples: hist.total, points, passed }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    #[test]
    fn excursion_max_masses() {
        assert_eq!(excursion_max_mass(1), ratio(1, 2));
        assert_eq!(excursion_max_mass(1) + excursion_max_mass(2), ratio(2, 3));
        assert_eq!(truncated_excursion_mean(3), ratio(11, 6));
    }

    #[test]
    fn one_step_law() {
        let s = JumpLawSpec::new(1.0, 3, 9, 1).unwrap();
        let y = s.y_law();
        assert_eq!(y.support, vec![-1, 0, 1]);
        assert_eq!(y.masses, vec![ratio(1, 4), ratio(1, 4), ratio(1, 2)]);
        assert_eq!(drift(&s).unwrap().y, ratio(1, 4));
    }

    #[test]
    fn zero_cap_keeps_left_steps_at_zero() {
        let s = JumpLawSpec::new(1.0, 3, 9, 0).unwrap();
        let yt = s.y_tilde_law();
        assert_eq!(yt.support, vec![0, 1]);
        assert_eq!(yt.total_mass(), BigRational::one());
        assert_eq!(yt.mean(), drift(&s).unwrap().y_tilde);
    }

    #[test]
    fn invalid_specs() {
        assert!(JumpLawSpec::new(1.0, 3, 6, 1).is_err());
        assert!(JumpLawSpec::new(1.0, 3, 9, 4).is_err());
        assert!(JumpLawSpec::new(-0.5, 3, 9, 1).is_err());
        // K − 2a = 2 leaves no room for the residual at −3.
        assert!(JumpLawSpec::new(1.0, 3, 8, 3).is_err());
        assert!(JumpLawSpec::new(1.0, 3, 8, 2).is_ok());
    }

    #[test]
    fn hoeffding_preconditions() {
        assert!(hoeffding_tail(2.5, 1.0, -40.0).is_err());
        assert!(hoeffding_tail(4.0, 1.0, -0.5).is_err());
        assert!(hoeffding_tail(0.0, 1.0, -40.0).is_err());
        assert!(hoeffding_tail(5.0, 0.75, -40.0).is_err());
        assert!(hoeffding_tail(4.0, 0.75, -40.0).is_ok());
        assert!((log_hoeffding_tail(8.0, 0.75, -40.0).unwrap() + 2.0 * 0.75 * 29.0 * 29.0 * 8.0).abs() < 1e-9);
    }

    #[test]
    fn chain_starts_at_zero_and_never_climbs_without_sleep() {
        let mut rng = SplitMix64::new(1);
        let w = simulate_w(0.0, 1000, &mut rng).unwrap();
        assert_eq!(w[0], 0);
        assert!(w.iter().all(|&x| x == 0));
    }

    #[test]
    fn trace_first_hits_increase() {
        let tr = HoleTrace {
            block: 1,
            hole: vec![0, 0, 2, 3, 0],
            left: vec![0, 1, 1, 1, 2],
            frozen: vec![false, false, false, true, false],
            steps: vec![0, 3, 4, 1],
            outcomes: vec![Outcome::EmitLeft, Outcome::EmitRight, Outcome::Failure, Outcome::EmitLeft],
        };
        assert_eq!(tr.first_hits(), vec![0, 1, 4]);
        assert!(tr.good(0));
        assert!(!tr.good(1));
        assert!(tr.good(2));
        assert!(tr.edge_mismatches(3).is_empty());
    }
}
