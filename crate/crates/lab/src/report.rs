//! Aligned-text tables for terminal output.

use std::fmt::Write;

use arw_core::block_stats::{Estimate, HoleLemmaReport};

use crate::ensemble::{CellStatus, EnsembleOutput, Stat};
use crate::probe::ProbeReport;
use crate::sweep::PhaseGrid;

#[derive(Clone, Debug, Default)]
pub struct Table {
    headers: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(headers: impl IntoIterator<Item = S>) -> Self {
        Table { headers: headers.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn row<S: Into<String>>(&mut self, cells: impl IntoIterator<Item = S>) -> &mut Self {
        self.rows.push(cells.into_iter().map(Into::into).collect());
        self
    }

    pub fn render(&self) -> String {
        let cols = self.headers.len();
        let mut width: Vec<usize> = self.headers.iter().map(|h| h.chars().count()).collect();
        for r in &self.rows {
            for (i, c) in r.iter().enumerate().take(cols) {
                width[i] = width[i].max(c.chars().count());
            }
        }
        let mut out = String::new();
        let line = |out: &mut String, cells: &[String]| {
            let parts: Vec<String> = cells
                .iter()
                .enumerate()
                .map(|(i, c)| format!("{c:>w$}", w = width[i]))
                .collect();
            out.push_str(parts.join("  ").trim_end());
            out.push('\n');
        };
        line(&mut out, &self.headers);
        let rule: Vec<String> = width.iter().map(|&w| "-".repeat(w)).collect();
        line(&mut out, &rule);
        for r in &self.rows {
            line(&mut out, r);
        }
        out
    }
}

/// Compact float: fixed for ordinary magnitudes, scientific otherwise.
pub fn num(x: f64) -> String {
    if x == 0.0 || (1e-3..1e6).contains(&x.abs()) {
        format!("{x:.4}")
    } else {
        format!("{x:.3e}")
    }
}

fn stat(s: Option<Stat>) -> String {
    s.map(|s| format!("{} ± {}", num(s.mean), num(s.se))).unwrap_or_else(|| "-".into())
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_else(|| "-".into())
}

pub fn ensemble_table(out: &EnsembleOutput) -> String {
    let carpet = out.cells.iter().any(|c| c.n.is_some());
    let mut t = if carpet {
        Table::new(["cell", "lambda", "a", "K", "n", "m", "trials", "P(F>=n/4)", "Frozen/n", "Exit/n", "viol", "status", "time"])
    } else {
        Table::new(["cell", "lambda", "zeta", "L", "k", "trials", "P(m(0)>=k)", "status", "time"])
    };
    for c in &out.cells {
        let status = match &c.status {
            CellStatus::Ok => "ok".to_string(),
            CellStatus::Aborted { exit_code, .. } => format!("aborted ({exit_code})"),
        };
        let time = format!("{:.2}s", c.runtime.as_secs_f64());
        if carpet {
            t.row([
                c.cell.to_string(),
                c.lambda.to_string(),
                opt(c.a),
                opt(c.k),
                opt(c.n),
                opt(c.m),
                c.trials.to_string(),
                stat(c.frozen_quarter),
                stat(c.frozen_per_n),
                stat(c.exit_per_n),
                c.conservation_violations.to_string(),
                status,
                time,
            ]);
        } else {
            t.row([
                c.cell.to_string(),
                c.lambda.to_string(),
                opt(c.zeta),
                opt(c.half_width),
                opt(c.threshold),
                c.trials.to_string(),
                stat(c.active),
                status,
                time,
            ]);
        }
    }
    t.render()
}

fn estimate_row(t: &mut Table, name: &str, e: &Estimate) {
    t.row([
        name.to_string(),
        e.successes.to_string(),
        e.trials.to_string(),
        num(e.p),
        num(e.se),
        e.reference.map(num).unwrap_or_else(|| "-".into()),
        if e.sparse { "sparse".into() } else { String::new() },
    ]);
}

pub fn hole_table(r: &HoleLemmaReport) -> String {
    let mut out = format!(
        "hole process: lambda = {}, a = {}, K = {}, runs = {}, attempts = {}, edge mismatches = {}\n",
        r.lambda, r.a, r.k, r.runs, r.attempts, r.edge_mismatches
    );
    let mut t = Table::new(["event", "hits", "trials", "freq", "se", "reference", ""]);
    estimate_row(&mut t, "Hole(j) > a/2 | Hole(j-1) low or at edge", &r.jump_past_half);
    estimate_row(&mut t, "a/2 < Hole(j) < a", &r.upper_band);
    estimate_row(&mut t, "L(j+2) > L(j)", &r.left_within_two);
    estimate_row(&mut t, "emission goes left", &r.left_share);
    estimate_row(&mut t, "T_j > a^3", &r.long_attempt);
    estimate_row(&mut t, "emission with T_j < a/2 | Hole(j-1) <= a/2", &r.quick_emission);
    estimate_row(&mut t, "G_l (never frozen at level l)", &r.good_levels);
    out.push_str(&t.render());
    for w in &r.warnings {
        let _ = writeln!(out, "warning: {w}");
    }
    out
}

pub fn probe_table(r: &ProbeReport) -> String {
    let s = &r.spec;
    let mut out = format!(
        "exponential moments: lambda = {}, a = {}, K = {}, n = {}, trials = {}\n",
        s.lambda, s.a, s.k, s.n, s.trials
    );
    let mut t = Table::new(["theta", "E[exp(theta Frozen)]", "se", "log mean"]);
    for m in &r.frozen_moments {
        t.row([m.theta.to_string(), num(m.value.mean()), num(m.value.se()), num(m.value.log_mean)]);
    }
    out.push_str(&t.render());
    let _ = writeln!(
        out,
        "\nlevel sums for block {} (m <= {}), reference e^3 = {}",
        s.block,
        s.m_max,
        num(r.reference)
    );
    let mut t = Table::new(["level", "theta", "mean", "se", "complete", "note"]);
    for l in &r.level_sums {
        t.row([
            l.level.to_string(),
            l.theta.to_string(),
            num(l.value.mean()),
            num(l.value.se()),
            l.complete_trials.to_string(),
            if l.truncated { "truncated".to_string() } else { String::new() },
        ]);
    }
    out.push_str(&t.render());
    out
}

/// λ down the side, ζ across the top.
pub fn phase_table(g: &PhaseGrid) -> String {
    let mut headers = vec!["lambda \\ zeta".to_string()];
    headers.extend(g.spec.zetas.iter().map(|z| z.to_string()));
    let mut t = Table::new(headers);
    for &l in &g.spec.lambdas {
        let mut row = vec![l.to_string()];
        row.extend(g.row(l).iter().map(|p| format!("{:.3}", p.active.mean)));
        t.row(row);
    }
    format!("P(m(0) >= {}) on [-{L}, {L}], {} trials per cell\n{}", g.spec.k, g.spec.trials, t.render(), L = g.spec.half_width)
}
