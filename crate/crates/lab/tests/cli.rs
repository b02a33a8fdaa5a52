use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn arw(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_arw"))
        .args(args)
        .current_dir(dir)
        .env_remove("ARW_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn data_rows(csv: &str) -> Vec<&str> {
    csv.lines().filter(|l| !l.starts_with('#')).skip(1).collect()
}

const SIMULATE: [&str; 13] =
    ["simulate", "--lambda", "1", "--zeta", "0.5", "--L", "100", "--k", "10", "--trials", "100", "--seed", "7"];

#[test]
fn simulate_writes_one_row_and_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let mut first = SIMULATE.to_vec();
    first.extend(["--out", "a"]);
    let o = arw(&first, dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let mut second = SIMULATE.to_vec();
    second.extend(["--out", "b", "--parallelism", "3"]);
    assert_eq!(arw(&second, dir.path()).status.code(), Some(0));

    let summary = fs::read_to_string(dir.path().join("a/simulate_summary.csv")).unwrap();
    assert_eq!(data_rows(&summary).len(), 1);
    assert!(summary.starts_with("# arw summary\n# tool_version = "));
    assert!(summary.contains("# master_seed = 7\n"));
    for name in ["simulate_summary.csv", "simulate_records.jsonl"] {
        let a = fs::read(dir.path().join("a").join(name)).unwrap();
        let b = fs::read(dir.path().join("b").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between reruns");
    }
    let records = fs::read_to_string(dir.path().join("a/simulate_records.jsonl")).unwrap();
    assert_eq!(records.lines().count(), 101);
    let meta: serde_json::Value = serde_json::from_str(records.lines().next().unwrap()).unwrap();
    assert_eq!(meta["kind"], "meta");
    assert_eq!(meta["schema_version"], 1);
}

#[test]
fn negative_density_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = arw(&["simulate", "--lambda", "1", "--zeta", "-1", "--L", "10"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let o = arw(&["carpet", "--lambda", "1", "--a", "4", "--K", "9", "--n", "4"], dir.path());
    assert_eq!(o.status.code(), Some(2), "K too small for a");
    let o = arw(&["simulate", "--nonsense"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn replay_check_example_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = arw(&["replay-check", "--lambda", "1", "--a", "4", "--K", "16", "--n", "8", "--seed", "3"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("all replay equalities hold"));
    let o = arw(
        &["--format", "json", "replay-check", "--lambda", "0.3", "--a", "3", "--n", "4", "--trials", "5"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    let reports: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(reports.as_array().unwrap().len(), 5);
    assert!(reports[0]["mismatches"].as_array().unwrap().is_empty());
}

#[test]
fn paper_scale_chain_is_below_minus_forty() {
    let dir = tempfile::tempdir().unwrap();
    let o = arw(&["--format", "json", "block-stats", "--paper-scale", "--lambda", "1"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let r: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let chain = &r["paper_scale"]["chain"];
    assert!(chain["y_bound"].as_f64().unwrap() <= -40.0);
    assert!(chain["y_tilde_bound"].as_f64().unwrap() <= -40.0);
    assert_eq!(r["paper_scale"]["below_minus_40"], true);
    let text = stdout(&arw(&["block-stats", "--paper-scale", "--lambda", "1"], dir.path()));
    assert!(text.contains("both <= -40: yes"), "{text}");
}

#[test]
fn block_stats_reports_exact_drifts() {
    let dir = tempfile::tempdir().unwrap();
    let o = arw(&["--format", "json", "block-stats", "--lambda", "1", "--a", "3", "--K", "9", "--v", "1"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let r: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    // h = 1/4 and P(Y_1 = -1) = h, so E[Y_1] = 1/2 - 1/4.
    assert_eq!(r["desk"]["drift_y"], "1/4");
    assert!(r["hole"].is_null());
}

#[test]
fn config_file_and_seed_precedence() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("run.toml"),
        "[carpet]\nlambda = [0.5]\na = [4]\nn = [4, 8]\ntrials = 6\nseed = 11\ncheck = \"on\"\n",
    )
    .unwrap();
    let run = |extra: &[&str], out: &str, env_seed: Option<&str>| {
        let mut args = vec!["--config", "run.toml", "carpet", "--out", out];
        args.extend_from_slice(extra);
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_arw"));
        cmd.args(&args).current_dir(dir.path()).env_remove("ARW_SEED");
        if let Some(s) = env_seed {
            cmd.env("ARW_SEED", s);
        }
        let o = cmd.output().unwrap();
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        fs::read_to_string(dir.path().join(out).join("carpet_summary.csv")).unwrap()
    };
    let from_file = run(&[], "f", Some("99"));
    assert!(from_file.contains("# master_seed = 11\n"), "file seed beats ARW_SEED");
    assert_eq!(data_rows(&from_file).len(), 2);
    let flagged = run(&["--seed", "5", "--n", "8"], "g", None);
    assert!(flagged.contains("# master_seed = 5\n"));
    assert_eq!(data_rows(&flagged).len(), 1, "flag list replaces the file list");

    fs::write(dir.path().join("noseed.toml"), "[carpet]\nlambda = [0.5]\na = [4]\nn = [4]\ntrials = 2\n").unwrap();
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_arw"));
    cmd.args(["--config", "noseed.toml", "carpet", "--out", "h"]).current_dir(dir.path()).env("ARW_SEED", "99");
    assert_eq!(cmd.output().unwrap().status.code(), Some(0));
    let env_seeded = fs::read_to_string(dir.path().join("h/carpet_summary.csv")).unwrap();
    assert!(env_seeded.contains("# master_seed = 99\n"));

    fs::write(dir.path().join("typo.toml"), "[carpet]\nlamda = [1]\n").unwrap();
    let o = arw(&["--config", "typo.toml", "carpet", "--a", "4", "--n", "4"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn carpet_hole_stats_and_probe() {
    let dir = tempfile::tempdir().unwrap();
    let o = arw(
        &[
            "--format", "json", "carpet", "--lambda", "0.5", "--a", "6", "--K", "36", "--n", "8", "--trials", "10",
            "--hole-stats", "--probe", "--thetas", "0,1", "--out", "o",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["hole_stats"][0]["runs"], 10);
    assert_eq!(r["probe"]["frozen_moments"][0]["theta"], 0.0);
    let o = arw(&["carpet", "--lambda", "1", "--a", "4", "--n", "4", "--no-trace", "--hole-stats"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sweep_writes_plot_data() {
    let dir = tempfile::tempdir().unwrap();
    let o = arw(
        &["sweep", "--lambda", "0.5,2", "--zeta", "0.1,0.9", "--L", "20", "--k", "2", "--trials", "10", "--out", "s"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    let plot = fs::read_to_string(dir.path().join("s/sweep_plot.csv")).unwrap();
    assert!(plot.starts_with("# arw phase-grid\n"));
    assert_eq!(data_rows(&plot).len(), 4);
    assert!(dir.path().join("s/sweep_summary.csv").exists());
}

#[test]
fn verify_quick_passes() {
    let dir = tempfile::tempdir().unwrap();
    let start = std::time::Instant::now();
    let o = arw(&["verify", "--quick"], dir.path());
    let text = stdout(&o);
    print!("{text}");
    assert_eq!(o.status.code(), Some(0), "{text}");
    assert_eq!(text.lines().filter(|l| l.starts_with("[PASS]")).count(), 11);
    assert!(start.elapsed().as_secs() < 120, "took {:?}", start.elapsed());
    let o = arw(&["verify", "--only", "12"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}
