use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    /// `pass <=> |residual| <= tol`.
    Identity,
    /// `pass <=> margin >= -tol`; nonnegative margin means satisfied.
    Inequality,
}

/// One verification outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    /// Stable identifier of the statement being checked.
    pub anchor: String,
    pub kind: CheckKind,
    pub lhs: f64,
    pub rhs: f64,
    /// Residual for identities, margin for inequalities.
    pub residual_or_margin: f64,
    pub tol: f64,
    pub pass: bool,
    pub skipped: bool,
    pub context: BTreeMap<String, String>,
}

impl CheckReport {
    pub fn identity(name: impl Into<String>, anchor: &str, lhs: f64, rhs: f64, tol: f64) -> Self {
        let residual = lhs - rhs;
        CheckReport {
            name: name.into(),
            anchor: anchor.to_string(),
            kind: CheckKind::Identity,
            lhs,
            rhs,
            residual_or_margin: residual,
            tol,
            pass: residual.abs() <= tol,
            skipped: false,
            context: BTreeMap::new(),
        }
    }

    /// `margin` is supplied by the caller so that either `lhs <= rhs` or
    /// `lhs >= rhs` can be expressed with a nonnegative-is-good sign.
    pub fn inequality(name: impl Into<String>, anchor: &str, lhs: f64, rhs: f64, margin: f64, tol: f64) -> Self {
        CheckReport {
            name: name.into(),
            anchor: anchor.to_string(),
            kind: CheckKind::Inequality,
            lhs,
            rhs,
            residual_or_margin: margin,
            tol,
            pass: margin >= -tol,
            skipped: false,
            context: BTreeMap::new(),
        }
    }

    /// `lhs <= rhs`.
    pub fn at_most(name: impl Into<String>, anchor: &str, lhs: f64, rhs: f64, tol: f64) -> Self {
        Self::inequality(name, anchor, lhs, rhs, rhs - lhs, tol)
    }

    /// `lhs >= rhs`.
    pub fn at_least(name: impl Into<String>, anchor: &str, lhs: f64, rhs: f64, tol: f64) -> Self {
        Self::inequality(name, anchor, lhs, rhs, lhs - rhs, tol)
    }

    /// A check that could not be evaluated; counts as neither pass nor fail.
    pub fn skipped(name: impl Into<String>, anchor: &str, reason: &str) -> Self {
        let mut r = CheckReport {
            name: name.into(),
            anchor: anchor.to_string(),
            kind: CheckKind::Identity,
            lhs: f64::NAN,
            rhs: f64::NAN,
            residual_or_margin: f64::NAN,
            tol: 0.0,
            pass: true,
            skipped: true,
            context: BTreeMap::new(),
        };
        r.context.insert("note".into(), reason.to_string());
        r
    }

    /// A failed check for an error raised while evaluating it.
    pub fn failed(name: impl Into<String>, anchor: &str, reason: &str) -> Self {
        let mut r = Self::skipped(name, anchor, reason);
        r.skipped = false;
        r.pass = false;
        r
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.context.insert(key.to_string(), value.to_string());
        self
    }

    /// Replaces the tolerance and recomputes `pass`.
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self.recheck()
    }

    /// Recomputes `pass` from the residual or margin and `tol`.
    pub fn recheck(mut self) -> Self {
        if !self.skipped && self.residual_or_margin.is_finite() {
            self.pass = match self.kind {
                CheckKind::Identity => self.residual_or_margin.abs() <= self.tol,
                CheckKind::Inequality => self.residual_or_margin >= -self.tol,
            };
        }
        self
    }

    pub fn failed_hard(&self) -> bool {
        !self.pass && !self.skipped
    }
}

/// A check evaluated along a parameter grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathReport {
    pub name: String,
    pub grid: Vec<f64>,
    /// Named per-grid-point series (traces, eigenvalue sums, ...).
    pub series: BTreeMap<String, Vec<f64>>,
    pub checks: Vec<CheckReport>,
}

impl PathReport {
    pub fn new(name: impl Into<String>, grid: Vec<f64>) -> Self {
        PathReport { name: name.into(), grid, series: BTreeMap::new(), checks: Vec::new() }
    }

    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn push(&mut self, c: CheckReport) {
        self.checks.push(c);
    }

    pub fn add_series(&mut self, key: &str, values: Vec<f64>) {
        self.series.insert(key.to_string(), values);
    }

    pub fn failures(&self) -> Vec<&CheckReport> {
        self.checks.iter().filter(|c| c.failed_hard()).collect()
    }
}

/// Second differences `y[i-1] - 2 y[i] + y[i+1]` at interior points.
pub fn second_differences(y: &[f64]) -> Vec<f64> {
    y.windows(3).map(|w| w[0] - 2.0 * w[1] + w[2]).collect()
}

/// Second differences on a possibly non-uniform grid, scaled so that they
/// reduce to `y[i-1] - 2 y[i] + y[i+1]` when the spacing is uniform.
pub fn scaled_second_differences(x: &[f64], y: &[f64]) -> Vec<f64> {
    (1..x.len().min(y.len()).saturating_sub(1))
        .map(|i| {
            let (h1, h2) = (x[i] - x[i - 1], x[i + 1] - x[i]);
            let dd = 2.0 * ((y[i + 1] - y[i]) / h2 - (y[i] - y[i - 1]) / h1) / (h1 + h2);
            dd * h1 * h2
        })
        .collect()
}

/// Minimum of a slice, `+inf` when empty.
pub fn min_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

pub fn max_abs_of(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}
