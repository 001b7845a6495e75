//! Closed-form vs Monte Carlo comparison rows and their file formats.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::stats::EnsembleStats;
use crate::error::{Error, Result};

/// Pass threshold on |z|.
pub const Z_THRESHOLD: f64 = 3.0;

pub const REPORT_HEADER: &str = "label,t,closed_form,mc_mean,mc_stderr,z,pass";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub label: String,
    pub t: f64,
    pub closed_form: f64,
    pub mc_mean: f64,
    pub mc_stderr: f64,
    pub z: f64,
    pub pass: bool,
}

fn agrees_exactly(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

/// Builds a comparison row from a point estimate and its standard error.
///
/// A zero standard error is only acceptable when the estimate reproduces the
/// closed form (up to rounding); otherwise this is a deterministic mismatch.
pub fn compare_estimate(label: &str, t: f64, closed_form: f64, estimate: f64, stderr: f64) -> Result<ReportRow> {
    let z = if stderr > 0.0 {
        (estimate - closed_form) / stderr
    } else if agrees_exactly(estimate, closed_form) {
        0.0
    } else {
        return Err(Error::DeterministicMismatch {
            label: label.to_string(),
            closed_form,
            observed: estimate,
        });
    };
    Ok(ReportRow {
        label: label.to_string(),
        t,
        closed_form,
        mc_mean: estimate,
        mc_stderr: stderr,
        z,
        pass: z.is_finite() && z.abs() <= Z_THRESHOLD,
    })
}

/// Compares the ensemble mean of `stats` against `closed_form`.
pub fn compare(label: &str, t: f64, closed_form: f64, stats: &EnsembleStats) -> Result<ReportRow> {
    if stats.count() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: stats.count() as usize,
        });
    }
    compare_estimate(label, t, closed_form, stats.mean(), stats.stderr())
}

/// One-sided check `estimate <= bound + 3 stderr`; z is measured against
/// the bound, and only excess above it fails.
pub fn compare_upper_bound(label: &str, t: f64, bound: f64, estimate: f64, stderr: f64) -> ReportRow {
    let excess = estimate - bound;
    let z = if stderr > 0.0 {
        excess / stderr
    } else if excess <= 0.0 || agrees_exactly(estimate, bound) {
        0.0
    } else {
        f64::INFINITY
    };
    ReportRow {
        label: label.to_string(),
        t,
        closed_form: bound,
        mc_mean: estimate,
        mc_stderr: stderr,
        z,
        pass: z <= Z_THRESHOLD,
    }
}

/// Ordered collection of comparison rows.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormReport {
    pub rows: Vec<ReportRow>,
}

impl ClosedFormReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, row: ReportRow) {
        self.rows.push(row);
    }

    /// Appends a comparison; a deterministic mismatch becomes a failing row
    /// with infinite z instead of aborting the whole report.
    pub fn push_estimate(&mut self, label: &str, t: f64, closed_form: f64, estimate: f64, stderr: f64) {
        let row = compare_estimate(label, t, closed_form, estimate, stderr).unwrap_or_else(|_| ReportRow {
            label: label.to_string(),
            t,
            closed_form,
            mc_mean: estimate,
            mc_stderr: stderr,
            z: if estimate > closed_form {
                f64::INFINITY
            } else {
                f64::NEG_INFINITY
            },
            pass: false,
        });
        self.push(row);
    }

    pub fn push_stats(&mut self, label: &str, t: f64, closed_form: f64, stats: &EnsembleStats) {
        self.push_estimate(label, t, closed_form, stats.mean(), stats.stderr());
    }

    pub fn passed(&self) -> usize {
        self.rows.iter().filter(|r| r.pass).count()
    }

    pub fn failed(&self) -> usize {
        self.rows.len() - self.passed()
    }

    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(REPORT_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                csv_field(&r.label),
                r.t,
                r.closed_form,
                r.mc_mean,
                r.mc_stderr,
                r.z,
                r.pass
            );
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// A named numeric table written as `series_<name>.csv`; column 0 is time
/// (or the natural abscissa).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesTable {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl SeriesTable {
    pub fn new(name: impl Into<String>, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn file_name(&self) -> String {
        format!("series_{}.csv", self.name)
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let line: Vec<String> = row.iter().map(|x| x.to_string()).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }
}
