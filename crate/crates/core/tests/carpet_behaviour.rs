use arw_core::carpet::{
    mass_balance_replay, run_carpet_hole, run_carpet_hole_with, CarpetHole, CarpetParams, CheckMode, Outcome,
    RunOptions, StepEvent, StepKind,
};
use arw_core::sitewise::{instruction_at, Instruction, Lane, SleepRate};
use arw_core::Error;
use proptest::prelude::*;

#[test]
fn no_sleep_means_every_particle_leaves() {
    for seed in 0..10 {
        for &(n, k, a) in &[(2, 9, 3), (8, 16, 4), (16, 36, 6)] {
            let r = run_carpet_hole(CarpetParams::new(0.0, n, k, a), seed).unwrap();
            assert_eq!(r.frozen, 0);
            assert_eq!(r.exit, (n / 2) as u64);
            assert!(r.attempts.iter().all(|t| t.outcome != Outcome::Failure));
        }
    }
}

#[test]
fn sleep_next_to_the_edge_freezes_the_block() {
    // With a = 1 the initial hole iK sits right next to the edge iK+1.
    let rate = SleepRate::new(1.0).unwrap();
    let seed = (0..).find(|&s| instruction_at(s, rate, 4, Lane::Single, 0) == Instruction::Sleep).unwrap();
    let mut engine = CarpetHole::new(CarpetParams::new(1.0, 2, 4, 1), seed, RunOptions::default()).unwrap();
    let first = engine.step().unwrap().unwrap();
    assert_eq!(first.block, 1);
    assert_eq!(first.outcome, Outcome::Failure);
    assert_eq!(first.hole_after, 1);
    assert_eq!(first.steps, 1);
    assert!(engine.frozen_in(1));
    assert_eq!(engine.ledger().hole(1), 5);
}

#[test]
fn runs_are_deterministic_in_the_seed() {
    let p = CarpetParams::new(0.4, 8, 25, 5);
    let a = run_carpet_hole(p, 11).unwrap();
    let b = run_carpet_hole(p, 11).unwrap();
    assert_eq!(a, b);
    let differ = (12..20).any(|s| run_carpet_hole(p, s).unwrap().attempts != a.attempts);
    assert!(differ);
}

#[test]
fn odd_block_count_needs_explicit_mass() {
    let r = run_carpet_hole(CarpetParams::new(0.5, 3, 9, 3), 0).unwrap();
    assert_eq!(r.free_particles(), 2);
    assert!(mass_balance_replay(CarpetParams::new(0.5, 3, 9, 3), 0).is_err());
    assert!(mass_balance_replay(CarpetParams::new(0.5, 4, 9, 3).with_mass(1), 0).is_err());
}

#[test]
fn bad_parameters_are_rejected() {
    assert!(matches!(run_carpet_hole(CarpetParams::new(-1.0, 2, 9, 3), 0), Err(Error::Parameter(_))));
    assert!(matches!(run_carpet_hole(CarpetParams::new(1.0, 2, 6, 3), 0), Err(Error::Parameter(_))));
    assert!(matches!(run_carpet_hole(CarpetParams::new(1.0, 0, 9, 3), 0), Err(Error::Parameter(_))));
}

#[test]
fn tiny_budget_is_reported() {
    let options = RunOptions { budget: 10, ..RunOptions::default() };
    let r = run_carpet_hole_with(CarpetParams::new(0.0, 4, 16, 4), 0, options);
    assert!(matches!(r, Err(Error::CarpetBudgetExceeded { budget: 10, .. })));
}

#[test]
fn replay_agrees_block_by_block() {
    for seed in 0..6 {
        for &lambda in &[0.0, 0.2, 1.0, 5.0] {
            for &(n, k, a) in &[(4, 9, 3), (8, 16, 4), (6, 36, 6)] {
                let report = mass_balance_replay(CarpetParams::new(lambda, n, k, a), seed).unwrap();
                assert!(report.passed(), "{:?}", report.mismatches);
                assert_eq!(report.blocks.len(), n);
            }
        }
    }
}

#[test]
fn observer_sees_every_hole_step() {
    let mut events: Vec<StepEvent> = Vec::new();
    let mut record = |e: StepEvent| events.push(e);
    let engine = CarpetHole::new(CarpetParams::new(0.7, 8, 25, 5), 3, RunOptions::default()).unwrap();
    let r = engine.run_observed(&mut record).unwrap();
    let steps: u64 = r.attempts.iter().map(|t| t.steps).sum();
    assert_eq!(events.len() as u64, steps);
    for e in &events {
        assert!((0..5).contains(&e.hole_before));
        if let StepKind::Return { displacement } = e.kind {
            assert!(displacement <= 0 && e.hole_before + displacement >= 0);
        }
    }
}

/// Runs with `m_max` extras and snapshots block `n` just before extra `m`
/// becomes hot, for every `m`.
fn prefix_snapshots(p: CarpetParams, seed: u64) -> Vec<(bool, u64, u64)> {
    let mut engine = CarpetHole::new(p, seed, RunOptions::default()).unwrap();
    let mut snaps = Vec::new();
    loop {
        let choice = engine.choose_hot();
        if let Some(c) = choice {
            if let Some(extra) = c.extra {
                if extra as usize == snaps.len() {
                    snaps.push((engine.frozen_in(p.n), engine.left_emissions(p.n), engine.topplings()));
                }
            }
        }
        if engine.step().unwrap().is_none() {
            break;
        }
    }
    snaps.push((engine.frozen_in(p.n), engine.left_emissions(p.n), engine.topplings()));
    snaps
}

#[test]
fn larger_mass_run_passes_through_smaller_mass_results() {
    for seed in 0..8 {
        for &lambda in &[0.1, 0.6, 2.0] {
            let m_max = 6;
            let snaps = prefix_snapshots(CarpetParams::new(lambda, 1, 16, 4).with_mass(m_max), seed);
            assert_eq!(snaps.len(), m_max as usize + 1);
            for (m, snap) in snaps.iter().enumerate() {
                let mut e = CarpetHole::new(
                    CarpetParams::new(lambda, 1, 16, 4).with_mass(m as u64),
                    seed,
                    RunOptions::default(),
                )
                .unwrap();
                while e.step().unwrap().is_some() {}
                assert_eq!(*snap, (e.frozen_in(1), e.left_emissions(1), e.topplings()), "m {m} seed {seed}");
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn conservation_holds(
        seed in any::<u64>(),
        lambda in 0.0f64..6.0,
        half in 1usize..6,
        a in 1i64..6,
        extra_k in 2i64..12,
        m in 0u64..4,
    ) {
        let n = 2 * half;
        let k = 2 * a + extra_k;
        let p = CarpetParams::new(lambda, n, k, a).with_mass(m);
        let options = RunOptions { check: CheckMode::On, ..RunOptions::default() };
        let r = run_carpet_hole_with(p, seed, options).unwrap();
        prop_assert!(r.conservation_failures().is_empty(), "{:?}", r.conservation_failures());
        prop_assert!(r.property_violations.is_empty());
        prop_assert!(r.m[0] <= r.free_particles());
        prop_assert!(r.s_vec.iter().all(|&s| s <= 1));
        for t in &r.attempts {
            prop_assert!((0..=a).contains(&t.hole_after));
            prop_assert_eq!(t.outcome == Outcome::Failure, t.hole_after == a && t.steps > 0);
        }
    }
}
