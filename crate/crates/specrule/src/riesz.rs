//! Monotonicity of weighted Riesz means `A(τ)⁻² Σ (zB(τ) - λ_j(τ))₊²`.
//!
//! With `A = exp(-∫(1+η)/θ)` and `B = exp(-∫η/θ)`,
//! `d/dτ [A⁻² Σ(zB-λ)₊²] = 2/(A²θ) Σ [(zB-λ)₊² - (zB-λ)₊(ηλ + θλ̇)]`,
//! so the mean is non-increasing for `θ > 0` (non-decreasing for `θ < 0`)
//! whenever the bracket is non-positive.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Result, SpecError};
use crate::family::OperatorFamily;
use crate::linalg::{commutator, eigendecompose, norm_sqr, Matrix};
use crate::quad::adaptive_simpson;
use crate::report::{max_abs_of, CheckReport, PathReport};
use crate::tol;

/// Eigenvalues at one parameter value, ascending, with first derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct Levels {
    pub lambda: Vec<f64>,
    pub lambda_dot: Vec<f64>,
    /// Every eigenvalue below this threshold is included.
    pub complete_below: f64,
}

/// Anything that can report its low-lying spectrum along a parameter.
pub trait LevelSource: Sync {
    fn levels(&self, tau: f64) -> Result<Levels>;

    /// The underlying matrix family, when there is one.
    fn family(&self) -> Option<&OperatorFamily> {
        None
    }
}

impl LevelSource for OperatorFamily {
    fn levels(&self, tau: f64) -> Result<Levels> {
        let e = self.evaluate(tau)?;
        let d = eigendecompose(&e.h)?;
        let lambda_dot = (0..d.dim()).map(|j| d.expectation(e.hdot.matrix(), j)).collect();
        Ok(Levels { lambda: d.eigenvalues, lambda_dot, complete_below: f64::INFINITY })
    }

    fn family(&self) -> Option<&OperatorFamily> {
        Some(self)
    }
}

/// Precomputed levels at fixed grid points.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedLevels {
    pub grid: Vec<f64>,
    pub levels: Vec<Levels>,
}

impl LevelSource for TabulatedLevels {
    fn levels(&self, tau: f64) -> Result<Levels> {
        self.grid
            .iter()
            .position(|&g| g == tau)
            .map(|i| self.levels[i].clone())
            .ok_or_else(|| SpecError::InvalidArgument(format!("no tabulated levels at {tau}")))
    }
}

/// A coefficient `η(τ)` or `θ(τ)`.
#[derive(Clone)]
pub enum Coefficient {
    Constant(f64),
    /// `c τ`.
    Linear(f64),
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coefficient::Constant(c) => write!(f, "Constant({c})"),
            Coefficient::Linear(c) => write!(f, "Linear({c})"),
            Coefficient::Custom(_) => f.write_str("Custom"),
        }
    }
}

impl Coefficient {
    pub fn eval(&self, tau: f64) -> f64 {
        match self {
            Coefficient::Constant(c) => *c,
            Coefficient::Linear(c) => c * tau,
            Coefficient::Custom(g) => g(tau),
        }
    }
}

/// `η`, `θ` and the derived weights `A`, `B`, normalized to 1 at `τ₀`.
#[derive(Debug, Clone)]
pub struct RieszCoefficients {
    pub eta: Coefficient,
    pub theta: Coefficient,
}

/// Quadrature tolerance for non-closed-form weights.
pub const WEIGHT_QUADRATURE: f64 = 1e-12;

impl RieszCoefficients {
    pub fn new(eta: Coefficient, theta: Coefficient) -> Self {
        RieszCoefficients { eta, theta }
    }

    /// `(A(τ), B(τ))` with `A(τ₀) = B(τ₀) = 1`.
    pub fn weights(&self, tau0: f64, tau: f64) -> Result<(f64, f64)> {
        match (&self.eta, &self.theta) {
            (Coefficient::Constant(e), Coefficient::Constant(c)) => {
                if *c == 0.0 {
                    return Err(SpecError::InvalidArgument("θ vanishes".into()));
                }
                let s = (tau - tau0) / c;
                Ok(((-(1.0 + e) * s).exp(), (-e * s).exp()))
            }
            (Coefficient::Constant(e), Coefficient::Linear(c)) => {
                if *c == 0.0 || tau0 * tau <= 0.0 {
                    return Err(SpecError::InvalidArgument("θ = cτ vanishes on the interval".into()));
                }
                let r = tau / tau0;
                Ok((r.powf(-(1.0 + e) / c), r.powf(-e / c)))
            }
            _ => {
                let (eta, theta) = (self.eta.clone(), self.theta.clone());
                let ia = adaptive_simpson(&|s| (1.0 + eta.eval(s)) / theta.eval(s), tau0, tau, WEIGHT_QUADRATURE);
                let ib = adaptive_simpson(&|s| eta.eval(s) / theta.eval(s), tau0, tau, WEIGHT_QUADRATURE);
                if !(ia.is_finite() && ib.is_finite()) {
                    return Err(SpecError::Accuracy("weight integral not finite; θ may vanish".into()));
                }
                Ok(((-ia).exp(), (-ib).exp()))
            }
        }
    }

    /// Sign of `θ` on the grid; an error if it vanishes or changes sign.
    pub fn theta_sign(&self, grid: &[f64]) -> Result<f64> {
        let s = self.theta.eval(grid[0]).signum();
        for &t in grid {
            let v = self.theta.eval(t);
            if v == 0.0 || v.signum() != s || !v.is_finite() {
                return Err(SpecError::InvalidArgument(format!("θ must keep a strict sign; θ({t}) = {v}")));
            }
        }
        Ok(s)
    }
}

/// How the hypotheses of the monotonicity statement are verified.
#[derive(Debug, Clone)]
pub enum Hypotheses {
    /// Operators `G_α` for which, on each eigenvector with `λ_j ≤ zB`,
    /// `Σ_α ½(<[G*,[H,G]]> + <[G,[H,G*]]>) = 1` and
    /// `Σ_α ‖[H,G]u_j‖² + ‖[H,G*]u_j‖² ≤ ηλ_j + θλ̇_j`. Needs a matrix family.
    Probes(Vec<Matrix>),
    /// Evaluate `Σ(zB-λ)₊² - (zB-λ)₊(ηλ+θλ̇) ≤ 0` directly from the levels.
    Direct,
    /// Scan only; monotonicity is asserted without a verified hypothesis.
    None,
}

#[derive(Debug, Clone)]
pub struct RieszScan {
    pub z: f64,
    pub coefficients: RieszCoefficients,
    pub hypotheses: Hypotheses,
    /// Base tolerance for the monotonicity and key-inequality checks.
    pub tol_base: f64,
}

impl RieszScan {
    pub fn new(z: f64, coefficients: RieszCoefficients, hypotheses: Hypotheses) -> Self {
        RieszScan { z, coefficients, hypotheses, tol_base: tol::EXACT_INEQUALITY }
    }
}

struct Point {
    a: f64,
    b: f64,
    quantity: f64,
    key: f64,
    key_scale: f64,
    probe: Option<ProbeOutcome>,
}

#[derive(Clone)]
struct ProbeOutcome {
    worst_norm: (f64, usize),
    worst_bound: (f64, usize),
    scale: f64,
}

fn probe_hypotheses(family: &OperatorFamily, probes: &[Matrix], tau: f64, threshold: f64, eta: f64, theta: f64) -> Result<ProbeOutcome> {
    let e = family.evaluate(tau)?;
    let d = eigendecompose(&e.h)?;
    let h = e.h.matrix();
    let mut parts = Vec::with_capacity(probes.len());
    for g in probes {
        if g.dim() != h.dim() {
            return Err(SpecError::DimensionMismatch { expected: h.dim(), got: g.dim() });
        }
        let gs = g.adjoint();
        let hg = commutator(h, g)?;
        let hgs = commutator(h, &gs)?;
        let c = &commutator(&gs, &hg)? + &commutator(g, &hgs)?;
        parts.push((c, hg, hgs));
    }
    let mut out = ProbeOutcome { worst_norm: (0.0, 0), worst_bound: (f64::INFINITY, 0), scale: 1.0 };
    for j in (0..d.dim()).filter(|&j| d.eigenvalues[j] <= threshold) {
        let u = d.vector(j);
        let (mut norm, mut energy) = (0.0, 0.0);
        for (c, hg, hgs) in &parts {
            norm += 0.5 * d.expectation(c, j);
            energy += norm_sqr(&hg.matvec(&u)) + norm_sqr(&hgs.matvec(&u));
        }
        let bound = eta * d.eigenvalues[j] + theta * d.expectation(e.hdot.matrix(), j);
        out.scale = out.scale.max(energy.abs()).max(bound.abs());
        if (norm - 1.0).abs() > out.worst_norm.0.abs() {
            out.worst_norm = (norm - 1.0, j);
        }
        if bound - energy < out.worst_bound.0 {
            out.worst_bound = (bound - energy, j);
        }
    }
    Ok(out)
}

/// Scans `A⁻² Σ(zB - λ_j)₊²` over `grid` and checks its monotonicity after
/// verifying the hypotheses in the requested mode.
pub fn riesz_monotonicity_scan(source: &dyn LevelSource, grid: &[f64], scan: &RieszScan) -> Result<PathReport> {
    if grid.len() < 2 || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(SpecError::InvalidArgument("grid must be ascending with at least two points".into()));
    }
    let coeffs = &scan.coefficients;
    let sign = coeffs.theta_sign(grid)?;
    let probes = match &scan.hypotheses {
        Hypotheses::Probes(p) => {
            let fam = source
                .family()
                .ok_or_else(|| SpecError::InvalidArgument("probe hypotheses need a matrix family".into()))?;
            Some((fam, p))
        }
        _ => None,
    };
    let tau0 = grid[0];
    let points: Vec<Point> = grid
        .par_iter()
        .map(|&t| {
            let (a, b) = coeffs.weights(tau0, t)?;
            let lv = source.levels(t)?;
            let threshold = scan.z * b;
            if threshold >= lv.complete_below {
                return Err(SpecError::Accuracy(format!(
                    "levels complete only below {}, but zB = {threshold} at τ={t}",
                    lv.complete_below
                )));
            }
            let (eta, theta) = (coeffs.eta.eval(t), coeffs.theta.eval(t));
            let (mut sum, mut key, mut key_scale) = (0.0, 0.0, 0.0);
            for (&l, &ld) in lv.lambda.iter().zip(&lv.lambda_dot) {
                let w = (threshold - l).max(0.0);
                if w > 0.0 {
                    let drift = w * (eta * l + theta * ld);
                    sum += w * w;
                    key += w * w - drift;
                    key_scale += w * w + drift.abs();
                }
            }
            let probe = match probes {
                Some((fam, p)) => Some(probe_hypotheses(fam, p, t, threshold, eta, theta)?),
                None => None,
            };
            Ok(Point { a, b, quantity: sum / (a * a), key, key_scale, probe })
        })
        .collect::<Result<_>>()?;
    let mut rep = PathReport::new("riesz-monotonicity", grid.to_vec());
    let quantity: Vec<f64> = points.iter().map(|p| p.quantity).collect();
    let mut verified = true;
    match &scan.hypotheses {
        Hypotheses::Probes(_) => {
            let (mut worst_n, mut worst_b) = ((0.0f64, 0usize, grid[0]), (f64::INFINITY, 0usize, grid[0]));
            let mut scale = 1.0f64;
            for (p, &t) in points.iter().zip(grid) {
                let o = p.probe.as_ref().expect("probe outcome");
                scale = scale.max(o.scale);
                if o.worst_norm.0.abs() > worst_n.0.abs() {
                    worst_n = (o.worst_norm.0, o.worst_norm.1, t);
                }
                if o.worst_bound.0 < worst_b.0 {
                    worst_b = (o.worst_bound.0, o.worst_bound.1, t);
                }
            }
            let cn = CheckReport::identity("riesz-normalization", "riesz-commutator-normalization", 1.0 + worst_n.0, 1.0, tol::tol(tol::EXACT_IDENTITY, 1.0))
                .with("j", worst_n.1)
                .with("tau", worst_n.2);
            let cb = if worst_b.0.is_finite() {
                CheckReport::inequality("riesz-energy-bound", "riesz-commutator-energy-bound", worst_b.0, 0.0, worst_b.0, tol::tol(tol::EXACT_INEQUALITY, scale))
                    .with("j", worst_b.1)
                    .with("tau", worst_b.2)
            } else {
                CheckReport::skipped("riesz-energy-bound", "riesz-commutator-energy-bound", "no level below zB")
            };
            verified = cn.pass && cb.pass;
            rep.push(cn);
            rep.push(cb);
        }
        Hypotheses::Direct => {
            let mut worst = 0;
            for i in 0..points.len() {
                if points[i].key > points[worst].key {
                    worst = i;
                }
            }
            let p = &points[worst];
            let c = CheckReport::at_most("riesz-key-inequality", "riesz-key-inequality", p.key, 0.0, tol::tol(scan.tol_base, p.key_scale))
                .with("tau", grid[worst]);
            verified = c.pass;
            rep.push(c);
        }
        Hypotheses::None => {}
    }
    let diffs: Vec<f64> = quantity.windows(2).map(|w| w[1] - w[0]).collect();
    let (margin, at) = if sign > 0.0 {
        diffs.iter().enumerate().map(|(i, &d)| (-d, i)).fold((f64::INFINITY, 0), |m, x| if x.0 < m.0 { x } else { m })
    } else {
        diffs.iter().enumerate().map(|(i, &d)| (d, i)).fold((f64::INFINITY, 0), |m, x| if x.0 < m.0 { x } else { m })
    };
    let direction = if sign > 0.0 { "non-increasing" } else { "non-decreasing" };
    let mono = if verified {
        CheckReport::inequality("riesz-monotonicity", "riesz-mean-monotonicity", margin, 0.0, margin, tol::tol(scan.tol_base, max_abs_of(&quantity)))
            .with("direction", direction)
            .with("tau", grid[at + 1])
            .with("z", scan.z)
    } else {
        CheckReport::skipped("riesz-monotonicity", "riesz-mean-monotonicity", "hypotheses not verified")
    };
    let mono = if matches!(scan.hypotheses, Hypotheses::None) { mono.with("hypotheses", "not verified") } else { mono };
    rep.push(mono);
    rep.add_series("A", points.iter().map(|p| p.a).collect());
    rep.add_series("B", points.iter().map(|p| p.b).collect());
    rep.add_series("key", points.iter().map(|p| p.key).collect());
    rep.add_series("quantity", quantity);
    Ok(rep)
}

/// The `z = 0` case: `A⁻² Σ(-λ_j)₊²` over the negative levels.
pub fn negative_part_monotonicity(source: &dyn LevelSource, grid: &[f64], coefficients: RieszCoefficients, hypotheses: Hypotheses) -> Result<PathReport> {
    let mut rep = riesz_monotonicity_scan(source, grid, &RieszScan::new(0.0, coefficients, hypotheses))?;
    rep.name = "negative-part-monotonicity".into();
    Ok(rep)
}
