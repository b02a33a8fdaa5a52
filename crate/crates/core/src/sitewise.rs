//! Site-wise representation of Activated Random Walk on a finite interval
//! of ℤ: configurations, instruction stacks, legal topplings, odometers and
//! stabilization.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use rand_core::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, SplitMix64};

/// Default watchdog for a single `stabilize` call.
pub const DEFAULT_TOPPLING_BUDGET: u64 = 1_000_000_000;

/// Sleep rate λ, validated to be finite and non-negative.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct SleepRate(f64);

impl SleepRate {
    pub fn new(lambda: f64) -> Result<Self> {
        if lambda.is_finite() && lambda >= 0.0 {
            Ok(SleepRate(lambda))
        } else {
            Err(Error::parameter(alloc::format!(
                "sleep rate must be finite and >= 0, got {lambda}"
            )))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Probability of each of the two step instructions, `1 / (2(1+λ))`.
    pub fn step_probability(self) -> f64 {
        0.5 / (1.0 + self.0)
    }

    /// Probability of the sleep instruction, `λ / (1+λ)`.
    pub fn sleep_probability(self) -> f64 {
        self.0 / (1.0 + self.0)
    }
}

impl TryFrom<f64> for SleepRate {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        SleepRate::new(v)
    }
}

impl From<SleepRate> for f64 {
    fn from(r: SleepRate) -> f64 {
        r.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Instruction {
    StepLeft,
    StepRight,
    Sleep,
}

impl Instruction {
    /// Maps a uniform `u ∈ [0,1)` onto the three-point instruction law.
    #[inline]
    pub fn from_uniform(u: f64, rate: SleepRate) -> Instruction {
        let p = rate.step_probability();
        if u < p {
            Instruction::StepRight
        } else if u < 2.0 * p {
            Instruction::StepLeft
        } else {
            Instruction::Sleep
        }
    }

    pub fn offset(self) -> Option<i64> {
        match self {
            Instruction::StepLeft => Some(-1),
            Instruction::StepRight => Some(1),
            Instruction::Sleep => None,
        }
    }
}

/// Draws one instruction from `rng`.
pub fn sample_instruction<R: RngCore + ?Sized>(lambda: f64, rng: &mut R) -> Result<Instruction> {
    let rate = SleepRate::new(lambda)?;
    Ok(Instruction::from_uniform(rng::uniform(rng), rate))
}

/// Which of a site's stacks an instruction is read from. Transit-region
/// sites of the carpet-hole procedure carry two independent stacks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Lane {
    Single,
    Left,
    Right,
}

impl Lane {
    #[inline]
    pub fn tag(self) -> u64 {
        match self {
            Lane::Single => 0,
            Lane::Left => 1,
            Lane::Right => 2,
        }
    }

    #[inline]
    fn slot(self) -> usize {
        self.tag() as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StackCursor {
    pub site: i64,
    pub lane: Lane,
    pub next_index: u64,
}

/// Lazily generated instruction stacks over `[lo, hi]`.
///
/// Instructions are pure functions of `(seed, site, lane, index)`; the
/// system only stores one consumption cursor per `(site, lane)`.
#[derive(Clone, Debug)]
pub struct StackSystem {
    seed: u64,
    rate: SleepRate,
    lo: i64,
    hi: i64,
    cursors: Vec<[u64; 3]>,
}

impl StackSystem {
    pub fn new(seed: u64, rate: SleepRate, lo: i64, hi: i64) -> Result<Self> {
        if hi < lo {
            return Err(Error::parameter("stack interval is empty"));
        }
        let len = (hi - lo + 1) as usize;
        Ok(StackSystem { seed, rate, lo, hi, cursors: vec![[0; 3]; len] })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn rate(&self) -> SleepRate {
        self.rate
    }

    /// The `index`-th instruction (0-based) of the stack at `(site, lane)`.
    #[inline]
    pub fn instruction_at(&self, site: i64, lane: Lane, index: u64) -> Instruction {
        instruction_at(self.seed, self.rate, site, lane, index)
    }

    #[inline]
    fn slot(&self, site: i64) -> Result<usize> {
        if site < self.lo || site > self.hi {
            return Err(Error::SiteOutOfRange { site });
        }
        Ok((site - self.lo) as usize)
    }

    /// Consumes and returns the next unused instruction at `(site, lane)`.
    #[inline]
    pub fn next(&mut self, site: i64, lane: Lane) -> Result<Instruction> {
        let slot = self.slot(site)?;
        let cursor = &mut self.cursors[slot][lane.slot()];
        let index = *cursor;
        *cursor += 1;
        Ok(instruction_at(self.seed, self.rate, site, lane, index))
    }

    pub fn consumed(&self, site: i64, lane: Lane) -> u64 {
        self.slot(site).map(|s| self.cursors[s][lane.slot()]).unwrap_or(0)
    }

    pub fn cursor(&self, site: i64, lane: Lane) -> StackCursor {
        StackCursor { site, lane, next_index: self.consumed(site, lane) }
    }

    /// Total number of instructions consumed over all stacks.
    pub fn total_consumed(&self) -> u64 {
        self.cursors.iter().flat_map(|c| c.iter()).sum()
    }

    /// Forgets all consumption; the stacks themselves are unchanged.
    pub fn rewind(&mut self) {
        self.cursors.iter_mut().for_each(|c| *c = [0; 3]);
    }
}

/// Instruction `index` of the stack at `(site, lane)` for `seed`.
#[inline]
pub fn instruction_at(seed: u64, rate: SleepRate, site: i64, lane: Lane, index: u64) -> Instruction {
    let word = rng::stream_word(rng::stack_key(seed, site, lane.tag()), index);
    Instruction::from_uniform(rng::unit_f64(word), rate)
}

/// State of one site: empty, one sleeping particle, or `n ≥ 1` active ones.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum SiteState {
    #[default]
    Empty,
    Sleeping,
    Active(u32),
}

impl SiteState {
    pub fn count(self) -> u64 {
        match self {
            SiteState::Empty => 0,
            SiteState::Sleeping => 1,
            SiteState::Active(n) => n as u64,
        }
    }

    #[inline]
    pub fn is_unstable(self) -> bool {
        matches!(self, SiteState::Active(_))
    }

    /// State after one active particle arrives (𝔰 + 1 = 2).
    #[inline]
    pub fn with_arrival(self) -> SiteState {
        match self {
            SiteState::Empty => SiteState::Active(1),
            SiteState::Sleeping => SiteState::Active(2),
            SiteState::Active(n) => SiteState::Active(n + 1),
        }
    }

    /// `n` active particles; `0` is empty.
    pub fn active(n: u32) -> SiteState {
        if n == 0 {
            SiteState::Empty
        } else {
            SiteState::Active(n)
        }
    }
}

/// What happens to a particle stepping off the interval.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundaryPolicy {
    /// The particle leaves the system and is tallied.
    Absorb,
    /// The step is blocked: the instruction is consumed, nothing moves.
    Closed,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Configuration {
    lo: i64,
    hi: i64,
    states: Vec<SiteState>,
    policy: BoundaryPolicy,
    exited_left: u64,
    exited_right: u64,
}

impl Configuration {
    pub fn empty(lo: i64, hi: i64, policy: BoundaryPolicy) -> Result<Self> {
        if hi < lo {
            return Err(Error::parameter("configuration interval is empty"));
        }
        let len = (hi - lo + 1) as usize;
        Ok(Configuration {
            lo,
            hi,
            states: vec![SiteState::Empty; len],
            policy,
            exited_left: 0,
            exited_right: 0,
        })
    }

    pub fn from_states(lo: i64, states: Vec<SiteState>, policy: BoundaryPolicy) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::parameter("configuration interval is empty"));
        }
        if states.contains(&SiteState::Active(0)) {
            return Err(Error::parameter("active site with zero particles"));
        }
        let hi = lo + states.len() as i64 - 1;
        Ok(Configuration { lo, hi, states, policy, exited_left: 0, exited_right: 0 })
    }

    pub fn lo(&self) -> i64 {
        self.lo
    }

    pub fn hi(&self) -> i64 {
        self.hi
    }

    pub fn policy(&self) -> BoundaryPolicy {
        self.policy
    }

    pub fn contains(&self, x: i64) -> bool {
        x >= self.lo && x <= self.hi
    }

    #[inline]
    fn slot(&self, x: i64) -> Result<usize> {
        if self.contains(x) {
            Ok((x - self.lo) as usize)
        } else {
            Err(Error::SiteOutOfRange { site: x })
        }
    }

    /// State at `x`; sites outside the interval read as empty.
    #[inline]
    pub fn get(&self, x: i64) -> SiteState {
        match self.slot(x) {
            Ok(s) => self.states[s],
            Err(_) => SiteState::Empty,
        }
    }

    pub fn set(&mut self, x: i64, state: SiteState) -> Result<()> {
        if state == SiteState::Active(0) {
            return Err(Error::parameter("active site with zero particles"));
        }
        let s = self.slot(x)?;
        self.states[s] = state;
        Ok(())
    }

    /// Drops `n` active particles onto `x`, waking a sleeper if present.
    pub fn add_active(&mut self, x: i64, n: u32) -> Result<()> {
        let s = self.slot(x)?;
        for _ in 0..n {
            self.states[s] = self.states[s].with_arrival();
        }
        Ok(())
    }

    pub fn states(&self) -> &[SiteState] {
        &self.states
    }

    pub fn sites(&self) -> impl Iterator<Item = (i64, SiteState)> + '_ {
        self.states.iter().enumerate().map(move |(i, s)| (self.lo + i as i64, *s))
    }

    pub fn particles_present(&self) -> u64 {
        self.states.iter().map(|s| s.count()).sum()
    }

    pub fn exited_left(&self) -> u64 {
        self.exited_left
    }

    pub fn exited_right(&self) -> u64 {
        self.exited_right
    }

    /// Present plus absorbed particles; conserved by every toppling.
    pub fn total_particles(&self) -> u64 {
        self.particles_present() + self.exited_left + self.exited_right
    }

    pub fn is_stable(&self) -> bool {
        !self.states.iter().any(|s| s.is_unstable())
    }

    pub fn unstable_sites(&self) -> impl Iterator<Item = i64> + '_ {
        self.sites().filter(|(_, s)| s.is_unstable()).map(|(x, _)| x)
    }
}

/// Number of topplings performed at each site of an interval.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Odometer {
    lo: i64,
    counts: Vec<u64>,
}

impl Odometer {
    pub fn zero(lo: i64, hi: i64) -> Self {
        Odometer { lo, counts: vec![0; (hi - lo + 1).max(0) as usize] }
    }

    pub fn get(&self, x: i64) -> u64 {
        if x < self.lo {
            return 0;
        }
        self.counts.get((x - self.lo) as usize).copied().unwrap_or(0)
    }

    #[inline]
    fn bump(&mut self, x: i64) {
        self.counts[(x - self.lo) as usize] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }
}

/// Topples `x` once using the next instruction on `lane`.
///
/// Returns the instruction that was applied. A sleep instruction at a site
/// holding two or more particles is consumed without effect.
#[inline]
pub fn topple(
    config: &mut Configuration,
    stacks: &mut StackSystem,
    x: i64,
    lane: Lane,
) -> Result<Instruction> {
    let slot = config.slot(x)?;
    let count = match config.states[slot] {
        SiteState::Active(n) => n,
        _ => return Err(Error::IllegalToppling { site: x }),
    };
    let instruction = stacks.next(x, lane)?;
    match instruction.offset() {
        None => {
            if count == 1 {
                config.states[slot] = SiteState::Sleeping;
            }
        }
        Some(dx) => {
            let y = x + dx;
            if config.contains(y) {
                config.states[slot] = SiteState::active(count - 1);
                let ys = (y - config.lo) as usize;
                config.states[ys] = config.states[ys].with_arrival();
            } else if config.policy == BoundaryPolicy::Absorb {
                config.states[slot] = SiteState::active(count - 1);
                if dx < 0 {
                    config.exited_left += 1;
                } else {
                    config.exited_right += 1;
                }
            }
        }
    }
    Ok(instruction)
}

/// Order in which unstable sites are toppled during stabilization.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TopplingOrder {
    /// Always the left-most unstable site.
    LeftmostUnstable,
    /// A uniformly random unstable site, driven by `seed`.
    RandomUnstable { seed: u64 },
    /// LIFO worklist; each popped site is toppled until stable. Fastest.
    Worklist,
}

/// Outcome of stabilizing a finite interval.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Stabilization {
    pub odometer: Odometer,
    pub configuration: Configuration,
    pub topplings: u64,
}

/// Stabilizes `config` with the default budget.
pub fn stabilize(
    config: Configuration,
    stacks: &mut StackSystem,
    order: TopplingOrder,
) -> Result<Stabilization> {
    stabilize_with_budget(config, stacks, order, DEFAULT_TOPPLING_BUDGET)
}

pub fn stabilize_with_budget(
    mut config: Configuration,
    stacks: &mut StackSystem,
    order: TopplingOrder,
    budget: u64,
) -> Result<Stabilization> {
    let mut odometer = Odometer::zero(config.lo, config.hi);
    let mut topplings = 0u64;

    macro_rules! fire {
        ($x:expr) => {{
            if topplings >= budget {
                return Err(Error::BudgetExceeded {
                    budget,
                    partial: alloc::boxed::Box::new(Stabilization {
                        odometer,
                        configuration: config,
                        topplings,
                    }),
                });
            }
            let ins = topple(&mut config, stacks, $x, Lane::Single)?;
            odometer.bump($x);
            topplings += 1;
            ins
        }};
    }

    match order {
        TopplingOrder::LeftmostUnstable => {
            let mut unstable: BTreeSet<i64> = config.unstable_sites().collect();
            while let Some(&x) = unstable.iter().next() {
                let ins = fire!(x);
                if !config.get(x).is_unstable() {
                    unstable.remove(&x);
                }
                if let Some(dx) = ins.offset() {
                    if config.get(x + dx).is_unstable() {
                        unstable.insert(x + dx);
                    }
                }
            }
        }
        TopplingOrder::RandomUnstable { seed } => {
            let mut rng = SplitMix64::new(seed);
            let len = config.states.len();
            let mut members: Vec<i64> = config.unstable_sites().collect();
            let mut position = vec![usize::MAX; len];
            for (i, &x) in members.iter().enumerate() {
                position[(x - config.lo) as usize] = i;
            }
            while !members.is_empty() {
                let pick = rng::below(&mut rng, members.len() as u64) as usize;
                let x = members[pick];
                let ins = fire!(x);
                if !config.get(x).is_unstable() {
                    members.swap_remove(pick);
                    position[(x - config.lo) as usize] = usize::MAX;
                    if let Some(&moved) = members.get(pick) {
                        position[(moved - config.lo) as usize] = pick;
                    }
                }
                if let Some(dx) = ins.offset() {
                    let y = x + dx;
                    if config.get(y).is_unstable() && position[(y - config.lo) as usize] == usize::MAX
                    {
                        position[(y - config.lo) as usize] = members.len();
                        members.push(y);
                    }
                }
            }
        }
        TopplingOrder::Worklist => {
            let len = config.states.len();
            let mut queued = vec![false; len];
            let mut work: Vec<i64> = config.unstable_sites().collect();
            for &x in &work {
                queued[(x - config.lo) as usize] = true;
            }
            while let Some(x) = work.pop() {
                queued[(x - config.lo) as usize] = false;
                while config.get(x).is_unstable() {
                    let ins = fire!(x);
                    if let Some(dx) = ins.offset() {
                        let y = x + dx;
                        if config.contains(y) {
                            let ys = (y - config.lo) as usize;
                            if !queued[ys] && config.states[ys].is_unstable() {
                                queued[ys] = true;
                                work.push(y);
                            }
                        }
                    }
                }
            }
        }
    }

    Ok(Stabilization { odometer, configuration: config, topplings })
}

/// I.i.d. initial-configuration samplers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DensitySampler {
    /// Bernoulli(ζ) particles per site for ζ ≤ 1, `1 + Bernoulli(ζ−1)` for
    /// ζ ∈ (1, 2].
    Bernoulli { zeta: f64 },
    /// One particle everywhere except the sites of `2Kℤ`.
    Neat { k: u32 },
}

impl DensitySampler {
    pub fn bernoulli(zeta: f64) -> Result<Self> {
        let s = DensitySampler::Bernoulli { zeta };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            DensitySampler::Bernoulli { zeta } if !(0.0..=2.0).contains(&zeta) => Err(
                Error::parameter(alloc::format!("density must lie in [0, 2], got {zeta}")),
            ),
            DensitySampler::Neat { k: 0 } => Err(Error::parameter("neat sampler needs K >= 1")),
            _ => Ok(()),
        }
    }

    /// Mean number of particles per site.
    pub fn density(&self) -> f64 {
        match *self {
            DensitySampler::Bernoulli { zeta } => zeta,
            DensitySampler::Neat { k } => 1.0 - 1.0 / (2.0 * k as f64),
        }
    }

    /// Samples an all-active configuration on `[lo, hi]`.
    pub fn sample<R: RngCore + ?Sized>(
        &self,
        lo: i64,
        hi: i64,
        policy: BoundaryPolicy,
        rng: &mut R,
    ) -> Result<Configuration> {
        self.validate()?;
        let mut config = Configuration::empty(lo, hi, policy)?;
        for x in lo..=hi {
            let n = match *self {
                DensitySampler::Bernoulli { zeta } if zeta <= 1.0 => (rng::uniform(rng) < zeta) as u32,
                DensitySampler::Bernoulli { zeta } => 1 + (rng::uniform(rng) < zeta - 1.0) as u32,
                DensitySampler::Neat { k } => (x.rem_euclid(2 * k as i64) != 0) as u32,
            };
            config.set(x, SiteState::active(n))?;
        }
        Ok(config)
    }
}

/// Samples a configuration on `[-L, L]`, stabilizes it with absorbing
/// boundaries and returns the number of topplings at the origin.
///
/// The configuration is drawn from `derive_seed(seed, 0)` and the stacks
/// from `derive_seed(seed, 1)`.
pub fn odometer_at_origin(
    lambda: f64,
    sampler: &DensitySampler,
    half_width: i64,
    seed: u64,
) -> Result<u64> {
    if half_width < 1 {
        return Err(Error::parameter("half-width L must be >= 1"));
    }
    let rate = SleepRate::new(lambda)?;
    let mut config_rng = SplitMix64::new(rng::derive_seed(seed, 0));
    let config = sampler.sample(-half_width, half_width, BoundaryPolicy::Absorb, &mut config_rng)?;
    let mut stacks = StackSystem::new(rng::derive_seed(seed, 1), rate, -half_width, half_width)?;
    let result = stabilize(config, &mut stacks, TopplingOrder::Worklist)?;
    Ok(result.odometer.get(0))
}
