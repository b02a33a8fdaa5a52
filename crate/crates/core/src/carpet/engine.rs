//! The carpet-hole toppling procedure.
//!
//! Only the hot particle moves. Each of its moves is an ordinary ARW
//! toppling of the site it stands on, executed through
//! [`sitewise::topple`](crate::sitewise::topple) against the full
//! configuration, so legality is enforced by the core and the configuration
//! stays an honest ARW state throughout.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use super::layout::BlockLayout;
use super::ledger::{build_neat_state, HotChoice, ParticleLedger, Slot};
use super::record::{AttemptRecord, Outcome, RunParams, RunRecord, RUN_RECORD_SCHEMA};
use crate::error::{Error, InvariantFailure, Result};
use crate::sitewise::{self, Configuration, Instruction, Lane, SiteState, SleepRate, StackSystem};

/// Default toppling budget for one run.
pub const DEFAULT_CARPET_BUDGET: u64 = 1_000_000_000;

/// Largest `n` for which property checking is on by default.
pub const AUTO_CHECK_MAX_BLOCKS: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum CheckMode {
    /// On for `n ≤ 64`, off above.
    #[default]
    Auto,
    On,
    Off,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RunOptions {
    pub check: CheckMode,
    /// Keep the per-attempt trace in the record.
    pub trace: bool,
    pub budget: u64,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { check: CheckMode::Auto, trace: true, budget: DEFAULT_CARPET_BUDGET }
    }
}

/// Parameters of a run: `λ`, `n`, `K`, `a` and the boundary mass `m`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CarpetParams {
    pub lambda: f64,
    pub n: usize,
    pub k: i64,
    pub a: i64,
    pub m_boundary: u64,
}

impl CarpetParams {
    pub fn new(lambda: f64, n: usize, k: i64, a: i64) -> Self {
        CarpetParams { lambda, n, k, a, m_boundary: 0 }
    }

    pub fn with_mass(mut self, m: u64) -> Self {
        self.m_boundary = m;
        self
    }

    pub fn layout(&self) -> Result<BlockLayout> {
        BlockLayout::new(self.n, self.k, self.a)
    }

    pub fn record_params(&self) -> RunParams {
        RunParams { lambda: self.lambda, n: self.n, k: self.k, a: self.a, m_boundary: self.m_boundary }
    }
}

/// The neat configuration (one particle per site, `2Kℤ` empty) on the
/// blocks of `layout`. Requires an even number of blocks.
pub fn build_neat(layout: BlockLayout) -> Result<(Configuration, ParticleLedger)> {
    if !layout.n().is_multiple_of(2) {
        return Err(Error::parameter("the neat configuration needs an even number of blocks"));
    }
    build_neat_state(layout, 0)
}

/// The neat configuration on blocks `1..=i` with `m` extra free particles
/// stacked at `iK+a`. Any `i ≥ 1` is accepted.
pub fn build_neat_with_mass(layout: BlockLayout, m: u64) -> Result<(Configuration, ParticleLedger)> {
    build_neat_state(layout, m)
}

/// What happened during one hole-departure step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepKind {
    /// The hot particle slept at the hole; the hole moved one site right.
    Sleep,
    /// The hot particle left the hole and came back; the hole moved by
    /// `displacement ≤ 0`.
    Return { displacement: i64 },
    /// The excursion ended in an emission.
    Emission { left: bool },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StepEvent {
    pub block: usize,
    /// Hole offset before the step.
    pub hole_before: i64,
    pub kind: StepKind,
}

/// Receives every hole-departure step of a run.
pub trait StepObserver {
    fn on_step(&mut self, event: StepEvent);
}

impl StepObserver for () {
    fn on_step(&mut self, _: StepEvent) {}
}

impl<F: FnMut(StepEvent)> StepObserver for F {
    fn on_step(&mut self, event: StepEvent) {
        self(event)
    }
}

enum WalkEnd {
    EmitLeft,
    EmitRight,
    Stopped,
}

/// A carpet-hole run in progress.
#[derive(Clone, Debug)]
pub struct CarpetHole {
    params: CarpetParams,
    layout: BlockLayout,
    seed: u64,
    config: Configuration,
    stacks: StackSystem,
    ledger: ParticleLedger,
    m: Vec<u64>,
    l_vec: Vec<u64>,
    exits: (u64, u64),
    attempts: Vec<AttemptRecord>,
    attempt_count: usize,
    topplings: u64,
    check: bool,
    trace: bool,
    budget: u64,
}

impl CarpetHole {
    /// Sets up the neat configuration with the boundary mass of `params`.
    /// The instruction stacks are keyed by `seed`.
    pub fn new(params: CarpetParams, seed: u64, options: RunOptions) -> Result<Self> {
        let rate = SleepRate::new(params.lambda)?;
        let layout = params.layout()?;
        let (config, ledger) = if params.m_boundary == 0 && layout.n() % 2 == 0 {
            build_neat(layout)?
        } else {
            build_neat_with_mass(layout, params.m_boundary)?
        };
        let stacks = StackSystem::new(seed, rate, layout.exit_left(), layout.exit_right())?;
        let n = layout.n();
        let check = match options.check {
            CheckMode::Auto => n <= AUTO_CHECK_MAX_BLOCKS,
            CheckMode::On => true,
            CheckMode::Off => false,
        };
        let engine = CarpetHole {
            params,
            layout,
            seed,
            config,
            stacks,
            ledger,
            m: vec![0; n + 1],
            l_vec: vec![0; n + 1],
            exits: (0, 0),
            attempts: Vec::new(),
            attempt_count: 0,
            topplings: 0,
            check,
            trace: options.trace,
            budget: options.budget,
        };
        engine.verify()?;
        Ok(engine)
    }

    pub fn layout(&self) -> &BlockLayout {
        &self.layout
    }

    pub fn ledger(&self) -> &ParticleLedger {
        &self.ledger
    }

    pub fn configuration(&self) -> &Configuration {
        &self.config
    }

    pub fn stacks(&self) -> &StackSystem {
        &self.stacks
    }

    pub fn attempts_made(&self) -> usize {
        self.attempt_count
    }

    pub fn topplings(&self) -> u64 {
        self.topplings
    }

    /// Left emissions out of `block` so far (the `L` counter of the block).
    pub fn left_emissions(&self, block: usize) -> u64 {
        self.l_vec[block]
    }

    pub fn frozen_in(&self, block: usize) -> bool {
        self.ledger.frozen(block).is_some()
    }

    pub fn choose_hot(&self) -> Option<HotChoice> {
        self.ledger.choose_hot()
    }

    fn verify(&self) -> Result<()> {
        if !self.check {
            return Ok(());
        }
        let violations = self.ledger.check_properties(&self.config, self.exits);
        if violations.is_empty() {
            Ok(())
        } else {
            Err(Error::Invariant(Box::new(InvariantFailure {
                attempt: self.attempt_count,
                violations,
                dump: self.ledger.dump(&self.config),
            })))
        }
    }

    fn invariant(&self, msg: alloc::string::String) -> Error {
        Error::Invariant(Box::new(InvariantFailure {
            attempt: self.attempt_count,
            violations: vec![msg],
            dump: self.ledger.dump(&self.config),
        }))
    }

    #[inline]
    fn fire(&mut self, x: i64, lane: Lane) -> Result<Instruction> {
        if self.topplings >= self.budget {
            return Err(Error::CarpetBudgetExceeded { budget: self.budget, attempts: self.attempt_count });
        }
        self.topplings += 1;
        sitewise::topple(&mut self.config, &mut self.stacks, x, lane)
    }

    /// Topples the hot particle's site until it reaches an emission target
    /// of `block` or `stop`. Returns how the walk ended, the final site and
    /// the range of sites visited.
    fn walk(
        &mut self,
        block: usize,
        mut at: i64,
        stop: Option<i64>,
    ) -> Result<(WalkEnd, i64, i64, i64)> {
        let left = self.layout.left_target(block);
        let right = self.layout.right_target(block);
        let l_site = self.layout.left_emission_site(block);
        let (mut lo, mut hi) = (at, at);
        loop {
            let lane = self.layout.lane(at, block);
            let ins = self.fire(at, lane)?;
            match ins {
                Instruction::Sleep => {
                    if self.config.get(at) == SiteState::Sleeping {
                        return Err(self.invariant(alloc::format!(
                            "hot particle fell asleep alone at {at} away from the hole"
                        )));
                    }
                }
                Instruction::StepLeft => {
                    if lane == Lane::Right && at == l_site {
                        self.l_vec[block] += 1;
                    }
                    at -= 1;
                }
                Instruction::StepRight => at += 1,
            }
            lo = lo.min(at);
            hi = hi.max(at);
            if at == left {
                return Ok((WalkEnd::EmitLeft, at, lo, hi));
            }
            if at == right {
                return Ok((WalkEnd::EmitRight, at, lo, hi));
            }
            if Some(at) == stop {
                return Ok((WalkEnd::Stopped, at, lo, hi));
            }
        }
    }

    fn emit(&mut self, block: usize, left: bool, site: i64) -> Outcome {
        self.ledger.set_hot_site(site);
        if left {
            self.m[block - 1] += 1;
            if block == 1 {
                self.exits.0 += 1;
                self.ledger.exit_hot(site);
            } else {
                self.ledger.land_hot(block - 1, Slot::Right);
            }
            Outcome::EmitLeft
        } else {
            if block == self.layout.n() {
                self.exits.1 += 1;
                self.ledger.exit_hot(site);
            } else {
                self.ledger.land_hot(block + 1, Slot::Left);
            }
            Outcome::EmitRight
        }
    }

    /// Designates `choice` as hot and runs one attempted emission.
    pub fn attempt_emission(&mut self, choice: HotChoice) -> Result<AttemptRecord> {
        self.attempt_emission_observed(choice, &mut ())
    }

    pub fn attempt_emission_observed(
        &mut self,
        choice: HotChoice,
        observer: &mut dyn StepObserver,
    ) -> Result<AttemptRecord> {
        self.ledger.designate(choice);
        self.verify()?;
        let block = choice.block;
        let center = self.layout.center(block);
        let edge = self.layout.block_hi(block);
        let mut steps = 0u64;

        let outcome = if self.ledger.frozen(block).is_some() {
            // Case 1: every block site already holds a non-hot particle.
            let (end, at, lo, hi) = self.walk(block, choice.site, None)?;
            let outcome = match end {
                WalkEnd::EmitLeft => self.emit(block, true, at),
                WalkEnd::EmitRight => self.emit(block, false, at),
                WalkEnd::Stopped => unreachable!("case 1 walks have no stop site"),
            };
            if lo <= center && hi >= edge {
                self.ledger.thaw_block(block);
            }
            outcome
        } else {
            self.case_two(block, choice.site, &mut steps, observer)?
        };

        let record = AttemptRecord {
            block,
            outcome,
            hole_after: self.ledger.hole_offset(block),
            steps,
        };
        self.attempt_count += 1;
        if self.trace {
            self.attempts.push(record);
        }
        self.verify()?;
        Ok(record)
    }

    fn case_two(
        &mut self,
        block: usize,
        start: i64,
        steps: &mut u64,
        observer: &mut dyn StepObserver,
    ) -> Result<Outcome> {
        let center = self.layout.center(block);
        let edge = self.layout.block_hi(block);
        let mut at = start;
        let hole = self.ledger.hole(block);
        if at != hole {
            let (end, reached, _, _) = self.walk(block, at, Some(hole))?;
            match end {
                WalkEnd::EmitLeft => return Ok(self.emit(block, true, reached)),
                WalkEnd::EmitRight => return Ok(self.emit(block, false, reached)),
                WalkEnd::Stopped => at = reached,
            }
            self.ledger.set_hot_site(at);
        }
        loop {
            let hole = self.ledger.hole(block);
            debug_assert_eq!(at, hole);
            let hole_before = hole - center;
            *steps += 1;
            match self.fire(hole, Lane::Single)? {
                Instruction::Sleep => {
                    if self.config.get(hole) != SiteState::Sleeping {
                        return Err(self.invariant(alloc::format!(
                            "hot particle at hole {hole} of block {block} was not alone"
                        )));
                    }
                    observer.on_step(StepEvent { block, hole_before, kind: StepKind::Sleep });
                    self.ledger.hand_over(hole + 1);
                    at = hole + 1;
                    if at == edge {
                        self.ledger.freeze_hot();
                        return Ok(Outcome::Failure);
                    }
                }
                Instruction::StepRight => {
                    let (end, reached, _, _) = self.walk(block, hole + 1, Some(hole))?;
                    match end {
                        WalkEnd::Stopped => {
                            observer.on_step(StepEvent {
                                block,
                                hole_before,
                                kind: StepKind::Return { displacement: 0 },
                            });
                        }
                        WalkEnd::EmitRight | WalkEnd::EmitLeft => {
                            let left = matches!(end, WalkEnd::EmitLeft);
                            observer.on_step(StepEvent { block, hole_before, kind: StepKind::Emission { left } });
                            return Ok(self.emit(block, left, reached));
                        }
                    }
                }
                Instruction::StepLeft => {
                    let (end, reached, lo, _) = self.walk(block, hole - 1, Some(hole))?;
                    match end {
                        WalkEnd::Stopped => {
                            let new_hole = lo.max(center);
                            observer.on_step(StepEvent {
                                block,
                                hole_before,
                                kind: StepKind::Return { displacement: new_hole - hole },
                            });
                            self.ledger.set_hot_site(hole);
                            self.ledger.hand_over(new_hole);
                            at = new_hole;
                        }
                        WalkEnd::EmitRight | WalkEnd::EmitLeft => {
                            let left = matches!(end, WalkEnd::EmitLeft);
                            observer.on_step(StepEvent { block, hole_before, kind: StepKind::Emission { left } });
                            return Ok(self.emit(block, left, reached));
                        }
                    }
                }
            }
        }
    }

    /// Chooses the next hot particle and runs its attempted emission;
    /// `None` once no thawed particle is left.
    pub fn step(&mut self) -> Result<Option<AttemptRecord>> {
        match self.ledger.choose_hot() {
            Some(choice) => self.attempt_emission(choice).map(Some),
            None => Ok(None),
        }
    }

    /// Runs to completion and returns the record.
    pub fn run(mut self) -> Result<RunRecord> {
        while self.step()?.is_some() {}
        Ok(self.finish())
    }

    /// Runs to completion, reporting every hole-departure step.
    pub fn run_observed(mut self, observer: &mut dyn StepObserver) -> Result<RunRecord> {
        while let Some(choice) = self.ledger.choose_hot() {
            self.attempt_emission_observed(choice, observer)?;
        }
        Ok(self.finish())
    }

    /// Snapshot of the counters as a record (the run need not be over).
    pub fn finish(self) -> RunRecord {
        let n = self.layout.n();
        let mut s_vec = vec![0; n + 1];
        for i in self.layout.blocks() {
            s_vec[i] = self.ledger.frozen(i).is_some() as u64;
        }
        RunRecord {
            schema_version: RUN_RECORD_SCHEMA,
            parameters: self.params.record_params(),
            master_seed: self.seed,
            frozen: self.ledger.frozen_count(),
            exit: self.exits.0 + self.exits.1,
            m: self.m,
            l_vec: self.l_vec,
            s_vec,
            attempts: self.attempts,
            property_violations: Vec::new(),
        }
    }
}

/// Runs the carpet-hole procedure with default options.
pub fn run_carpet_hole(params: CarpetParams, seed: u64) -> Result<RunRecord> {
    CarpetHole::new(params, seed, RunOptions::default())?.run()
}

pub fn run_carpet_hole_with(params: CarpetParams, seed: u64, options: RunOptions) -> Result<RunRecord> {
    CarpetHole::new(params, seed, options)?.run()
}
