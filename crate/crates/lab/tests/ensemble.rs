use arw_core::carpet::{run_carpet_hole_with, CarpetParams, CheckMode, RunOptions};
use arw_core::rng::derive_seed;
use arw_core::sitewise::{odometer_at_origin, DensitySampler};
use arw_lab::ensemble::{
    cell_seed, run_ensemble, summary_csv, trial_seed, write_records_jsonl, Check, EnsembleSpec, Experiment,
    Geometry, SamplerChoice, Stat, TrialOutcome, SUMMARY_COLUMNS,
};

fn carpet_spec(lambda: Vec<f64>, n: Vec<usize>, trials: u64, parallelism: usize) -> EnsembleSpec {
    EnsembleSpec {
        experiment: Experiment::CarpetHole {
            lambda,
            geometry: vec![Geometry { a: 4, k: 16 }],
            n,
            m: 0,
            check: Check::On,
            trace: true,
        },
        trials,
        master_seed: 42,
        parallelism: Some(parallelism),
    }
}

#[test]
fn zero_sleep_rate_never_freezes() {
    let out = run_ensemble(&carpet_spec(vec![0.0], vec![4, 8, 16], 10, 1)).unwrap();
    for c in &out.cells {
        let q = c.frozen_quarter.unwrap();
        assert_eq!((q.mean, q.se), (0.0, 0.0));
        assert_eq!(c.exit_per_n.unwrap().mean, 0.5);
        assert_eq!(c.conservation_violations, 0);
    }
}

#[test]
fn trials_reproduce_single_runs() {
    let spec = carpet_spec(vec![0.5, 2.0], vec![4, 6], 5, 2);
    let out = run_ensemble(&spec).unwrap();
    assert_eq!(out.trials.len(), 20);
    // Grid order is lambda, then geometry, then n.
    let grid = [(0.5, 4), (0.5, 6), (2.0, 4), (2.0, 6)];
    for t in &out.trials {
        let (lambda, n) = grid[t.cell];
        assert_eq!(t.seed, derive_seed(derive_seed(42, t.cell as u64), t.trial));
        let options = RunOptions { check: CheckMode::On, trace: true, ..RunOptions::default() };
        let direct = run_carpet_hole_with(CarpetParams::new(lambda, n, 16, 4), t.seed, options).unwrap();
        match &t.outcome {
            TrialOutcome::Carpet(r) => assert_eq!(**r, direct),
            other => panic!("unexpected outcome {other:?}"),
        }
    }
}

#[test]
fn origin_trials_reproduce_single_runs() {
    let spec = EnsembleSpec {
        experiment: Experiment::StabilizeOrigin {
            lambda: vec![1.0],
            zeta: vec![0.4, 0.9],
            half_width: vec![20],
            k: 2,
            sampler: SamplerChoice::Bernoulli,
        },
        trials: 30,
        master_seed: 3,
        parallelism: Some(1),
    };
    let out = run_ensemble(&spec).unwrap();
    for (c, zeta) in [0.4, 0.9].into_iter().enumerate() {
        let mut hits = Vec::new();
        for t in 0..30 {
            let seed = trial_seed(cell_seed(3, c), t);
            let m = odometer_at_origin(1.0, &DensitySampler::Bernoulli { zeta }, 20, seed).unwrap();
            hits.push(if m >= 2 { 1.0 } else { 0.0 });
        }
        let expected = Stat::of(&hits);
        assert_eq!(out.cells[c].active, Some(expected));
    }
}

#[test]
fn outputs_do_not_depend_on_pool_size() {
    let render = |p| {
        let out = run_ensemble(&carpet_spec(vec![0.2, 1.0], vec![4, 8], 12, p)).unwrap();
        let mut jsonl = Vec::new();
        write_records_jsonl(&out, &mut jsonl).unwrap();
        (summary_csv(&out).unwrap(), jsonl)
    };
    assert_eq!(render(1), render(8));
}

#[test]
fn summary_csv_layout() {
    let out = run_ensemble(&carpet_spec(vec![1.0], vec![4], 3, 1)).unwrap();
    let text = summary_csv(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "# arw summary");
    assert!(lines[3].starts_with("# master_seed = 42"));
    let header = lines.iter().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(*header, SUMMARY_COLUMNS.join(","));
    assert_eq!(lines.iter().filter(|l| !l.starts_with('#')).count(), 2);
}

#[test]
fn parses_a_toml_spec() {
    let text = r#"
        trials = 7
        master_seed = 9

        [experiment]
        kind = "carpet-hole"
        lambda = [0.1, 0.2]
        n = [8]
        check = "off"
        geometry = [{ a = 6, K = 36 }]
    "#;
    let spec = EnsembleSpec::from_toml(text).unwrap();
    assert_eq!(spec.trials, 7);
    match spec.experiment {
        Experiment::CarpetHole { lambda, geometry, n, m, check, trace } => {
            assert_eq!(lambda, vec![0.1, 0.2]);
            assert_eq!(geometry, vec![Geometry { a: 6, k: 36 }]);
            assert_eq!((n, m, check, trace), (vec![8], 0, Check::Off, true));
        }
        other => panic!("parsed {other:?}"),
    }

    let neat = r#"
        trials = 1
        master_seed = 0
        [experiment]
        kind = "stabilize-origin"
        lambda = [1.0]
        half_width = [10]
        k = 3
        sampler = { kind = "neat", period = 4 }
    "#;
    let spec = EnsembleSpec::from_toml(neat).unwrap();
    let out = run_ensemble(&spec).unwrap();
    assert_eq!(out.cells[0].zeta, Some(1.0 - 1.0 / 8.0));
}

#[test]
fn rejects_bad_grids() {
    for spec in [
        carpet_spec(vec![-1.0], vec![4], 1, 1),
        carpet_spec(vec![1.0], vec![3], 1, 1),
        carpet_spec(vec![1.0], vec![], 1, 1),
        carpet_spec(vec![1.0], vec![4], 0, 1),
    ] {
        let err = run_ensemble(&spec).unwrap_err();
        assert_eq!(err.exit_code(), 2, "{err}");
    }
}

#[test]
fn stat_matches_textbook_formula() {
    let s = Stat::of(&[1.0, 0.0, 0.0, 1.0, 1.0]);
    assert!((s.mean - 0.6).abs() < 1e-15);
    assert!((s.se - (0.3f64 / 5.0).sqrt()).abs() < 1e-15);
}
