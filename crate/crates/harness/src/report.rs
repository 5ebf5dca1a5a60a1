//! CSV tables and the plain-text run summary.

use std::fs;
use std::path::{Path, PathBuf};

use irsa_rl::environment::TraceRow;
use irsa_rl::stats::Summary;

use crate::convergence::ConvergenceReport;
use crate::coverage::CoverageReport;
use crate::error::{HarnessError, Result};
use crate::sweep::SweepRow;
use crate::virtual_compare::VirtualComparison;
use crate::waterfall::WaterfallRow;

/// One experiment's output; written as `<name>.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

/// A named pass/fail line for the summary.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }

    pub fn line(&self) -> String {
        format!(
            "{} {}: {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.detail
        )
    }
}

pub fn num(x: f64) -> String {
    format!("{x:.6}")
}

fn summary_cells(s: &Summary) -> Vec<String> {
    vec![num(s.mean), num(s.std_error), num(s.ci_low), num(s.ci_high)]
}

/// Writes every table as CSV plus `summary.txt` into `dir`, creating it if
/// needed. Returns the written paths.
pub fn emit_report(dir: &Path, tables: &[Table], checks: &[Check]) -> Result<Vec<PathBuf>> {
    if tables.is_empty() {
        return Err(HarnessError::Config("nothing to report".into()));
    }
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| HarnessError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;
    let mut written = Vec::new();
    let mut summary = String::new();
    for table in tables {
        let path = dir.join(format!("{}.csv", table.name));
        let csv_err = |source| HarnessError::Csv { path: path.clone(), source };
        let mut w = csv::Writer::from_path(&path).map_err(csv_err)?;
        w.write_record(&table.columns).map_err(csv_err)?;
        for row in &table.rows {
            w.write_record(row).map_err(csv_err)?;
        }
        w.flush().map_err(io(&path))?;
        summary.push_str(&format!("{}: {} rows -> {}\n", table.name, table.rows.len(), path.display()));
        written.push(path);
    }
    for check in checks {
        summary.push_str(&check.line());
        summary.push('\n');
    }
    let path = dir.join("summary.txt");
    fs::write(&path, summary).map_err(io(&path))?;
    written.push(path);
    Ok(written)
}

pub fn sweep_table(name: &str, rows: &[SweepRow]) -> Table {
    let mut t = Table::new(
        name,
        &["variant", "load", "n_slots", "nodes", "repetitions", "mean_throughput", "std_error", "ci_low", "ci_high"],
    );
    for r in rows {
        let mut row = vec![
            r.variant.to_string(),
            num(r.load),
            r.n_slots.to_string(),
            r.nodes.to_string(),
            r.summary.n.to_string(),
        ];
        row.extend(summary_cells(&r.summary));
        t.push(row);
    }
    t
}

/// Per-iteration training trace with the repetition index as `trial`.
pub fn trace_table(name: &str, traces: &[Vec<TraceRow<f64>>]) -> Table {
    let mut t = Table::new(name, &["trial", "episode", "iteration", "mean_reward", "throughput", "resets"]);
    for (trial, trace) in traces.iter().enumerate() {
        for r in trace {
            t.push(vec![
                trial.to_string(),
                r.episode.to_string(),
                r.iteration.to_string(),
                num(r.mean_reward),
                num(r.throughput),
                r.resets.to_string(),
            ]);
        }
    }
    t
}

pub fn convergence_table(name: &str, report: &ConvergenceReport) -> Table {
    let mut t = Table::new(
        name,
        &[
            "load",
            "virtual_experience",
            "epsilon",
            "repetitions",
            "non_converged",
            "mean_time",
            "std_error",
            "ci_low",
            "ci_high",
            "mean_trace_time",
        ],
    );
    for p in &report.points {
        let mut row = vec![
            num(p.load),
            p.virtual_experience.to_string(),
            num(report.epsilon),
            p.times.len().to_string(),
            p.non_converged().to_string(),
        ];
        row.extend(summary_cells(&p.summary));
        row.push(p.mean_trace_time.to_string());
        t.push(row);
    }
    t
}

pub fn virtual_compare_table(name: &str, cmp: &VirtualComparison) -> Table {
    let mut t = Table::new(
        name,
        &["load", "iterations", "variant", "mean_throughput", "std_error", "ci_low", "ci_high", "best"],
    );
    for r in &cmp.rows {
        let mut row = vec![num(cmp.load), r.iterations.to_string(), r.variant.to_string()];
        row.extend(summary_cells(&r.summary));
        row.push(r.best.to_string());
        t.push(row);
    }
    t
}

pub fn waterfall_table(name: &str, rows: &[WaterfallRow]) -> Table {
    let mut t = Table::new(
        name,
        &[
            "load",
            "random_mean",
            "random_ci_low",
            "random_ci_high",
            "low_mean",
            "low_ci_low",
            "low_ci_high",
            "high_mean",
            "high_ci_low",
            "high_ci_high",
            "dec_rl_envelope",
            "envelope",
            "winner",
        ],
    );
    for r in rows {
        let mut row = vec![num(r.load)];
        for s in [&r.random, &r.low, &r.high] {
            row.extend([num(s.mean), num(s.ci_low), num(s.ci_high)]);
        }
        row.extend([num(r.dec_rl_envelope), num(r.envelope), r.winner.name().to_string()]);
        t.push(row);
    }
    t
}

pub fn coverage_table(name: &str, c: &CoverageReport) -> Table {
    let mut t = Table::new(
        name,
        &[
            "space_pairs",
            "class_size",
            "p_hat",
            "predicted_ratio",
            "plain_mean",
            "virtual_mean",
            "measured_ratio",
            "uncovered_plain",
            "uncovered_virtual",
        ],
    );
    t.push(vec![
        c.space_pairs.to_string(),
        num(c.class_size),
        format!("{:.6e}", c.p_hat),
        c.predicted_ratio.map_or_else(|| "none".into(), num),
        num(c.plain.mean),
        num(c.with_virtual.mean),
        num(c.measured_ratio()),
        c.uncovered_plain.to_string(),
        c.uncovered_virtual.to_string(),
    ]);
    t
}
