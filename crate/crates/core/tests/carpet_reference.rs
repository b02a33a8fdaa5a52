//! The engine against a straight-line reference that tracks only counts.
//!
//! The reference keeps, per block, the hole position, a frozen flag and the
//! number of thawed particles in each of the three slots. It reads the same
//! instruction stacks through `instruction_at` with its own cursors and
//! never touches a configuration.

use std::collections::HashMap;

use arw_core::carpet::{run_carpet_hole_with, CarpetParams, CheckMode, Outcome, RunOptions};
use arw_core::sitewise::{instruction_at, Instruction, Lane, SleepRate};

#[derive(Debug, PartialEq)]
struct Trace {
    attempts: Vec<(usize, Outcome, i64, u64)>,
    m: Vec<u64>,
    l: Vec<u64>,
    s: Vec<u64>,
    exit: u64,
}

struct Reference {
    seed: u64,
    rate: SleepRate,
    n: usize,
    k: i64,
    a: i64,
    cursors: HashMap<(i64, u64), u64>,
    hole: Vec<i64>,
    frozen: Vec<bool>,
    // [left edge, centre, right edge]
    thawed: Vec<[u64; 3]>,
    l: Vec<u64>,
}

enum End {
    Left,
    Right,
    Hole,
}

impl Reference {
    fn new(lambda: f64, n: usize, k: i64, a: i64, m: u64, seed: u64) -> Self {
        let mut thawed = vec![[0u64; 3]; n + 1];
        for (i, t) in thawed.iter_mut().enumerate().skip(1) {
            if i % 2 == 1 {
                t[1] = 1;
            }
        }
        thawed[n][2] += m;
        Reference {
            seed,
            rate: SleepRate::new(lambda).unwrap(),
            n,
            k,
            a,
            cursors: HashMap::new(),
            hole: (0..=n).map(|i| i as i64 * k).collect(),
            frozen: vec![false; n + 1],
            thawed,
            l: vec![0; n + 1],
        }
    }

    fn pop(&mut self, x: i64, i: usize) -> Instruction {
        let c = i as i64 * self.k;
        let lane = if x < c - self.a {
            Lane::Right
        } else if x > c + self.a {
            Lane::Left
        } else {
            Lane::Single
        };
        let idx = self.cursors.entry((x, lane.tag())).or_insert(0);
        let ins = instruction_at(self.seed, self.rate, x, lane, *idx);
        *idx += 1;
        if lane == Lane::Right && x == c - self.k + self.a + 1 && ins == Instruction::StepLeft {
            self.l[i] += 1;
        }
        ins
    }

    /// Walks from `x` until an emission target of block `i` or `stop`.
    fn walk(&mut self, i: usize, mut x: i64, stop: Option<i64>) -> (End, i64, i64) {
        let c = i as i64 * self.k;
        let (mut lo, mut hi) = (x, x);
        loop {
            match self.pop(x, i) {
                Instruction::StepLeft => x -= 1,
                Instruction::StepRight => x += 1,
                Instruction::Sleep => {}
            }
            lo = lo.min(x);
            hi = hi.max(x);
            if x == c - self.k + self.a {
                return (End::Left, lo, hi);
            }
            if x == c + self.k - self.a {
                return (End::Right, lo, hi);
            }
            if Some(x) == stop {
                return (End::Hole, lo, hi);
            }
        }
    }

    fn run(mut self) -> Trace {
        let mut attempts = Vec::new();
        let mut m = vec![0u64; self.n + 1];
        let mut exit = 0;
        while let Some(i) = (1..=self.n).find(|&i| self.thawed[i].iter().any(|&c| c > 0)) {
            let c = i as i64 * self.k;
            // Centre, then left edge, then right edge.
            let (slot, start) = [(1, c), (0, c - self.a), (2, c + self.a)]
                .into_iter()
                .find(|&(s, _)| self.thawed[i][s] > 0)
                .unwrap();
            self.thawed[i][slot] -= 1;

            let mut steps = 0;
            let end = if self.frozen[i] {
                let (end, lo, hi) = self.walk(i, start, None);
                if lo <= c && hi >= c + self.a {
                    self.frozen[i] = false;
                    self.hole[i] = c;
                    self.thawed[i][1] += 1;
                }
                Some(end)
            } else {
                let mut end = None;
                if start != self.hole[i] {
                    let (e, _, _) = self.walk(i, start, Some(self.hole[i]));
                    if !matches!(e, End::Hole) {
                        end = Some(e);
                    }
                }
                while end.is_none() {
                    let h = self.hole[i];
                    steps += 1;
                    match self.pop(h, i) {
                        Instruction::Sleep => {
                            self.hole[i] = h + 1;
                            if h + 1 == c + self.a {
                                self.frozen[i] = true;
                                break;
                            }
                        }
                        Instruction::StepRight => {
                            let (e, _, _) = self.walk(i, h + 1, Some(h));
                            if !matches!(e, End::Hole) {
                                end = Some(e);
                            }
                        }
                        Instruction::StepLeft => {
                            let (e, lo, _) = self.walk(i, h - 1, Some(h));
                            if matches!(e, End::Hole) {
                                self.hole[i] = lo.max(c);
                            } else {
                                end = Some(e);
                            }
                        }
                    }
                }
                end
            };
            let outcome = match end {
                None => Outcome::Failure,
                Some(End::Left) => {
                    m[i - 1] += 1;
                    if i == 1 {
                        exit += 1;
                    } else {
                        self.thawed[i - 1][2] += 1;
                    }
                    Outcome::EmitLeft
                }
                Some(End::Right) => {
                    if i == self.n {
                        exit += 1;
                    } else {
                        self.thawed[i + 1][0] += 1;
                    }
                    Outcome::EmitRight
                }
                Some(End::Hole) => unreachable!(),
            };
            attempts.push((i, outcome, self.hole[i] - c, steps));
        }
        let s = (0..=self.n).map(|i| u64::from(i > 0 && self.frozen[i])).collect();
        Trace { attempts, m, l: self.l, s, exit }
    }
}

fn engine_trace(lambda: f64, n: usize, k: i64, a: i64, m: u64, seed: u64) -> Trace {
    let params = CarpetParams::new(lambda, n, k, a).with_mass(m);
    let options = RunOptions { check: CheckMode::On, ..RunOptions::default() };
    let r = run_carpet_hole_with(params, seed, options).unwrap();
    assert!(r.property_violations.is_empty());
    Trace {
        attempts: r.attempts.iter().map(|t| (t.block, t.outcome, t.hole_after, t.steps)).collect(),
        m: r.m,
        l: r.l_vec,
        s: r.s_vec,
        exit: r.exit,
    }
}

fn compare(lambda: f64, n: usize, k: i64, a: i64, m: u64, seed: u64) {
    let reference = Reference::new(lambda, n, k, a, m, seed).run();
    let engine = engine_trace(lambda, n, k, a, m, seed);
    assert_eq!(engine, reference, "lambda {lambda} n {n} K {k} a {a} m {m} seed {seed}");
}

#[test]
fn small_domain_matches_reference() {
    for seed in 0..40 {
        for &lambda in &[0.0, 0.3, 1.0, 4.0] {
            compare(lambda, 2, 9, 3, 0, seed);
        }
    }
}

#[test]
fn wider_domains_match_reference() {
    for seed in 0..10 {
        for &lambda in &[0.0, 0.2, 0.7, 2.0] {
            for &(n, k, a) in &[(4, 16, 4), (6, 8, 3), (8, 25, 5), (3, 12, 2)] {
                compare(lambda, n, k, a, 0, seed);
            }
        }
    }
}

#[test]
fn boundary_mass_matches_reference() {
    for seed in 0..10 {
        for &lambda in &[0.0, 0.5, 3.0] {
            for &(n, m) in &[(1, 3), (2, 5), (5, 2)] {
                compare(lambda, n, 9, 3, m, seed);
            }
        }
    }
}

#[test]
fn reference_attempts_are_not_trivial() {
    // Guard against both sides agreeing on an empty or degenerate trace.
    let t = Reference::new(0.5, 8, 25, 5, 0, 7).run();
    assert!(t.attempts.len() > 8);
    assert!(t.attempts.iter().any(|a| a.3 > 1));
    assert!(t.attempts.iter().any(|a| a.1 == Outcome::EmitLeft));
    assert!(t.attempts.iter().any(|a| a.1 == Outcome::EmitRight));
}
