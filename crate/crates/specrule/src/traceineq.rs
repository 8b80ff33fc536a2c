//! Trace and eigenvalue inequalities along Hermitian matrix paths.
//!
//! Matrix functions are always formed spectrally, `F(H) = U F(Λ) U*`.
//! Hypotheses on `F` are spot-checked at Chebyshev points of the realized
//! spectral range, not proven.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SpecError};
use crate::family::{FdOptions, OperatorFamily};
use crate::linalg::{commutator, eigendecompose, HermitianMatrix, Matrix, SpectralDecomposition};
use crate::quad::linspace;
use crate::report::{max_abs_of, min_of, scaled_second_differences, CheckReport, PathReport};
use crate::scalar::{spot_convexity, spot_points, ScalarFunction};
use crate::tol;

/// Default number of uniform `τ` points on `[0, 1]`.
pub const DEFAULT_GRID: usize = 33;
/// Minimum grid size for second-difference claims.
pub const MIN_GRID: usize = 5;
/// Base tolerance for statements evaluated exactly on a grid.
pub const GRID_EXACT: f64 = 1e-9;

pub fn default_grid() -> Vec<f64> {
    linspace(0.0, 1.0, DEFAULT_GRID)
}

/// `W₋₁(y)` for `y ∈ [-1/e, 0)`: the solution `w ≤ -1` of `w e^w = y`.
pub fn lambert_w_neg_branch(y: f64) -> Result<f64> {
    let branch = -(-1.0f64).exp();
    if !(y.is_finite() && y < 0.0 && y >= branch - 1e-16) {
        return Err(SpecError::InvalidArgument(format!("W₋₁ needs y in [-1/e, 0), got {y}")));
    }
    if y <= branch {
        return Ok(-1.0);
    }
    let g = |w: f64| w * w.exp();
    let mut w = if y < -0.25 {
        let p = -(2.0 * (1.0 + std::f64::consts::E * y)).sqrt();
        -1.0 + p - p * p / 3.0 + 11.0 * p.powi(3) / 72.0
    } else {
        let l1 = (-y).ln();
        let l2 = (-l1).ln();
        l1 - l2 + l2 / l1
    };
    for _ in 0..64 {
        let ew = w.exp();
        let f = w * ew - y;
        let fp = ew * (w + 1.0);
        if fp == 0.0 {
            break;
        }
        let step = f / (fp - (w + 2.0) * f / (2.0 * w + 2.0));
        let next = w - step;
        if !next.is_finite() || next > -1.0 {
            break;
        }
        w = next;
        if step.abs() <= 1e-16 * w.abs() {
            break;
        }
    }
    if w <= -1.0 && ((g(w) - y) / y).abs() <= 1e-13 {
        return Ok(w);
    }
    // Bisection on the decreasing branch w ↦ w e^w, w < -1.
    let (mut lo, mut hi) = (-2.0f64, -1.0f64);
    while g(lo) < y {
        lo *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if g(mid) < y {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `Σ F(λ_j)` over the spectrum of `H`.
pub fn trace_of_function(h: &HermitianMatrix, f: &ScalarFunction) -> Result<f64> {
    trace_on(&eigendecompose(h)?, f)
}

fn trace_on(d: &SpectralDecomposition, f: &ScalarFunction) -> Result<f64> {
    f.check_domain(&d.eigenvalues)?;
    Ok(d.eigenvalues.iter().map(|&x| f.value(x)).sum())
}

fn derivative_on(d: &SpectralDecomposition, f: &ScalarFunction, k: usize) -> Result<Matrix> {
    let vals: Vec<f64> = d.eigenvalues.iter().map(|&x| f.derivative(k, x)).collect::<Result<_>>()?;
    let u = &d.vectors;
    Ok(&(u * &Matrix::diag(&vals)) * &u.adjoint())
}

/// `Re Tr(XY)`.
fn trace_product(x: &Matrix, y: &Matrix) -> f64 {
    let n = x.dim();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += (x[(i, j)] * y[(j, i)]).re;
        }
    }
    s
}

fn interpolate(a: &HermitianMatrix, b: &HermitianMatrix, tau: f64) -> HermitianMatrix {
    HermitianMatrix::symmetrize(&a.scale_real(1.0 - tau) + &b.scale_real(tau))
}

fn check_pair(a: &HermitianMatrix, b: &HermitianMatrix) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(SpecError::DimensionMismatch { expected: a.dim(), got: b.dim() });
    }
    Ok(())
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < MIN_GRID {
        return Err(SpecError::InvalidArgument(format!("second differences need at least {MIN_GRID} grid points")));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(SpecError::InvalidArgument("grid must be strictly ascending".into()));
    }
    Ok(())
}

/// Joint interval `[min λ, max λ]`.
fn joint_range(ds: &[&SpectralDecomposition]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for d in ds {
        for &x in &d.eigenvalues {
            lo = lo.min(x);
            hi = hi.max(x);
        }
    }
    (lo, hi)
}

/// Spot check that `F^{(k)}` is strictly positive (negative) on `[a, b]`.
fn strict_sign(f: &ScalarFunction, k: usize, positive: bool, a: f64, b: f64) -> Result<bool> {
    for x in spot_points(a, b) {
        let v = f.derivative(k, x)?;
        if !(if positive { v > 0.0 } else { v < 0.0 }) {
            return Ok(false);
        }
    }
    Ok(true)
}

fn hypothesis(ok: bool, what: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(SpecError::Hypothesis(format!("{what} (spot-checked)")))
    }
}

/// Central second difference of `φ`, Romberg-extrapolated over `opts.levels` halvings.
pub fn second_derivative_romberg(phi: &(dyn Fn(f64) -> Result<f64> + Sync), tau: f64, opts: FdOptions) -> Result<f64> {
    if opts.levels == 0 || opts.h <= 0.0 {
        return Err(SpecError::InvalidArgument("fd step and levels must be positive".into()));
    }
    let c = phi(tau)?;
    let mut table = Vec::with_capacity(opts.levels);
    for l in 0..opts.levels {
        let h = opts.h / f64::from(1u32 << l);
        table.push((phi(tau + h)? - 2.0 * c + phi(tau - h)?) / (h * h));
    }
    let mut k = 1;
    while table.len() > 1 {
        let f = 4f64.powi(k);
        table = table.windows(2).map(|w| (f * w[1] - w[0]) / (f - 1.0)).collect();
        k += 1;
    }
    Ok(table[0])
}

/// Direction of an inequality, or equality when both directions hold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    AtLeast,
    AtMost,
    Equal,
}

impl Direction {
    fn from_flags(ge: bool, le: bool) -> Option<Self> {
        match (ge, le) {
            (true, true) => Some(Direction::Equal),
            (true, false) => Some(Direction::AtLeast),
            (false, true) => Some(Direction::AtMost),
            (false, false) => None,
        }
    }

    fn check(self, name: &str, anchor: &str, lhs: f64, rhs: f64, tol: f64) -> CheckReport {
        match self {
            Direction::AtLeast => CheckReport::at_least(name, anchor, lhs, rhs, tol),
            Direction::AtMost => CheckReport::at_most(name, anchor, lhs, rhs, tol),
            Direction::Equal => CheckReport::identity(name, anchor, lhs, rhs, tol),
        }
    }

    fn margin(self, lhs: f64, rhs: f64) -> f64 {
        match self {
            Direction::AtLeast => lhs - rhs,
            Direction::AtMost => rhs - lhs,
            Direction::Equal => -(lhs - rhs).abs(),
        }
    }
}

/// Worst-case check over a path: the point with the smallest margin.
fn worst_over(
    name: &str,
    anchor: &str,
    dir: Direction,
    grid: &[f64],
    lhs: &[f64],
    rhs: &[f64],
    base: f64,
) -> CheckReport {
    let mut worst = 0;
    for i in 0..grid.len() {
        if dir.margin(lhs[i], rhs[i]) < dir.margin(lhs[worst], rhs[worst]) {
            worst = i;
        }
    }
    let mag = max_abs_of(lhs).max(max_abs_of(rhs));
    dir.check(name, anchor, lhs[worst], rhs[worst], tol::tol(base, mag)).with("tau", grid[worst])
}

/// Discrete convexity (`convex`) or concavity of `y` on the grid.
fn discrete_shape(name: &str, anchor: &str, grid: &[f64], y: &[f64], convex: bool) -> CheckReport {
    let dd = scaled_second_differences(grid, y);
    let margin = if convex { min_of(&dd) } else { min_of(&dd.iter().map(|v| -v).collect::<Vec<_>>()) };
    CheckReport::inequality(name, anchor, margin, 0.0, margin, tol::tol(GRID_EXACT, max_abs_of(y)))
        .with("shape", if convex { "convex" } else { "concave" })
}

/// Chord comparison `y(τ)` against `(1-τ)y(0) + τy(1)` for a grid on `[0, 1]`.
fn chord(name: &str, anchor: &str, grid: &[f64], y: &[f64], convex: bool) -> CheckReport {
    let (y0, y1) = (y[0], y[y.len() - 1]);
    let (t0, t1) = (grid[0], grid[grid.len() - 1]);
    let line: Vec<f64> = grid.iter().map(|&t| {
        let s = (t - t0) / (t1 - t0);
        (1.0 - s) * y0 + s * y1
    }).collect();
    let dir = if convex { Direction::AtMost } else { Direction::AtLeast };
    worst_over(name, anchor, dir, grid, y, &line, GRID_EXACT)
}

/// Which statement of the trace theorem to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TracePathPart {
    /// `F` convex: `d²Tr F(H) ≥ Tr(f(H)Ḧ) + Σ f'(λ_j) λ̇_j²`.
    Convexity,
    /// `F''` convex: `d²Tr F(H) ≤ Tr(f(H)Ḧ) + Tr(Ḣ f'(H) Ḣ)`.
    OperatorBound,
    /// `F''''` convex: adds `(1/12) Tr(f'''(H)[H,Ḣ]²)` to the lower bound.
    Improved,
}

impl TracePathPart {
    pub fn from_index(i: u8) -> Result<Self> {
        match i {
            1 => Ok(TracePathPart::Convexity),
            2 => Ok(TracePathPart::OperatorBound),
            3 => Ok(TracePathPart::Improved),
            _ => Err(SpecError::InvalidArgument(format!("part must be 1, 2 or 3, got {i}"))),
        }
    }

    fn anchor(self) -> &'static str {
        match self {
            TracePathPart::Convexity => "trace-convexity",
            TracePathPart::OperatorBound => "trace-operator-bound",
            TracePathPart::Improved => "trace-improved-operator-bound",
        }
    }
}

/// Per-`τ` margins of the chosen part, with `d²/dτ² Tr F(H)` from
/// Romberg-extrapolated second differences along the path.
pub fn trace_path_suite(family: &OperatorFamily, grid: &[f64], f: &ScalarFunction, part: TracePathPart) -> Result<PathReport> {
    check_grid(grid)?;
    let order = match part {
        TracePathPart::Convexity => 2,
        TracePathPart::OperatorBound => 2,
        TracePathPart::Improved => 4,
    };
    if f.max_order() < order {
        return Err(SpecError::Evaluator(format!("{}: derivative of order {order} unavailable", f.name())));
    }
    let decomps: Vec<SpectralDecomposition> =
        grid.par_iter().map(|&t| eigendecompose(&family.hamiltonian(t)?)).collect::<Result<_>>()?;
    let (lo, hi) = joint_range(&decomps.iter().collect::<Vec<_>>());
    let dir = match part {
        TracePathPart::Convexity => {
            Direction::from_flags(f.derivative_sign_holds(2, true, lo, hi)?, f.derivative_sign_holds(2, false, lo, hi)?)
        }
        TracePathPart::OperatorBound => Direction::from_flags(
            f.derivative_convexity_holds(2, false, lo, hi)?,
            f.derivative_convexity_holds(2, true, lo, hi)?,
        ),
        TracePathPart::Improved => Direction::from_flags(
            f.derivative_convexity_holds(4, true, lo, hi)?,
            f.derivative_convexity_holds(4, false, lo, hi)?,
        ),
    }
    .ok_or_else(|| SpecError::Hypothesis(format!("{}: no convexity or concavity for {part:?} (spot-checked)", f.name())))?;
    let opts = FdOptions::default();
    let phi = |t: f64| trace_of_function(&family.hamiltonian(t)?, f);
    let rows: Vec<(f64, f64, f64)> = grid
        .par_iter()
        .zip(&decomps)
        .map(|(&t, d)| {
            let e = family.evaluate(t)?;
            let trace = trace_on(d, f)?;
            let d2 = second_derivative_romberg(&phi, t, opts)?;
            let fh = derivative_on(d, f, 1)?;
            let mut bound = trace_product(&fh, e.hddot.matrix());
            match part {
                TracePathPart::Convexity => {
                    for j in 0..d.dim() {
                        let ld = d.expectation(e.hdot.matrix(), j);
                        bound += f.derivative(2, d.eigenvalues[j])? * ld * ld;
                    }
                }
                TracePathPart::OperatorBound | TracePathPart::Improved => {
                    let f2 = derivative_on(d, f, 2)?;
                    bound += trace_product(&(e.hdot.matrix() * &f2), e.hdot.matrix());
                    if part == TracePathPart::Improved {
                        let f4 = derivative_on(d, f, 4)?;
                        let c = commutator(e.h.matrix(), e.hdot.matrix())?;
                        bound += trace_product(&f4, &(&c * &c)) / 12.0;
                    }
                }
            }
            Ok((trace, d2, bound))
        })
        .collect::<Result<_>>()?;
    let trace: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let d2: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let bound: Vec<f64> = rows.iter().map(|r| r.2).collect();
    let mut rep = PathReport::new(format!("trace-path-part{}", part as u8 + 1), grid.to_vec());
    rep.add_series("margin", d2.iter().zip(&bound).map(|(&l, &r)| dir.margin(l, r)).collect());
    rep.push(worst_over("trace-path", part.anchor(), dir, grid, &d2, &bound, tol::FINITE_DIFFERENCE).with("f", f.name()));
    let flat = grid.iter().try_fold(0.0f64, |m, &t| Ok::<_, SpecError>(m.max(family.evaluate(t)?.hddot.max_abs())))?;
    if part == TracePathPart::Convexity && flat == 0.0 && dir != Direction::Equal {
        rep.push(discrete_shape("trace-path-trace-shape", "trace-convexity-flat-path", grid, &trace, dir == Direction::AtLeast));
    }
    rep.add_series("trace", trace);
    rep.add_series("d2_trace", d2);
    rep.add_series("bound", bound);
    Ok(rep)
}

/// Scalar transforms of `Tr F((1-τ)A + τB)` with a convexity statement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum TransformVariant {
    /// `F > 0` log-convex: `Tr F(H)` log-convex.
    LogConvex,
    /// `F > 0`, `F^{1/p}` convex, `p ≥ 1`: `(Tr F(H))^{1/p}` convex.
    PowerConvex { p: f64 },
    /// `F > 0`, `F'' < 0`, `F^{1/p}` concave, `0 < p ≤ 1`: `(Tr F(H))^{1/p}` concave.
    PowerConcave { p: f64 },
    /// `F'' > 0`, `F^{-1/p}` concave, `p > 0`: `(Tr F(H))^{-1/p}` concave.
    InversePowerConcave { p: f64 },
    /// `F'' > 0`, `F'²/F'' ≤ a`: `exp(-Tr F(H)/(an))` concave.
    ExpConcave { a: f64 },
    /// `det(H)^{1/n}` concave (the previous case with `F = -ln`, `a = 1`).
    Determinant,
}

impl TransformVariant {
    fn label(&self) -> &'static str {
        match self {
            TransformVariant::LogConvex => "log-convex",
            TransformVariant::PowerConvex { .. } => "power-convex",
            TransformVariant::PowerConcave { .. } => "power-concave",
            TransformVariant::InversePowerConcave { .. } => "inverse-power-concave",
            TransformVariant::ExpConcave { .. } => "exp-concave",
            TransformVariant::Determinant => "determinant-concave",
        }
    }
}

/// Transform margins on the segment `(1-τ)A + τB`, `τ` on `grid ⊂ [0, 1]`:
/// discrete shape, chord comparison, and `Tr G(H)·d²Tr F ≥ (d Tr F)²` with
/// `G = F'²/F''`.
pub fn scalar_transform_suite(
    a: &HermitianMatrix,
    b: &HermitianMatrix,
    f: &ScalarFunction,
    variant: TransformVariant,
    grid: &[f64],
) -> Result<PathReport> {
    check_pair(a, b)?;
    check_grid(grid)?;
    let neg_ln = ScalarFunction::neg_ln();
    let f = if variant == TransformVariant::Determinant { &neg_ln } else { f };
    let (da, db) = (eigendecompose(a)?, eigendecompose(b)?);
    for d in [&da, &db] {
        f.check_domain(&d.eigenvalues).map_err(|e| match variant {
            TransformVariant::Determinant => SpecError::Domain("determinant variant needs positive definite A and B".into()),
            _ => e,
        })?;
    }
    let (lo, hi) = joint_range(&[&da, &db]);
    let val = |x: f64| f.value(x);
    let positive = spot_points(lo, hi).iter().all(|&x| val(x) > 0.0);
    match variant {
        TransformVariant::LogConvex => {
            hypothesis(positive, "F must be positive")?;
            hypothesis(spot_convexity(&|x| val(x).ln(), lo, hi, true), "ln F must be convex")?;
        }
        TransformVariant::PowerConvex { p } => {
            hypothesis(p >= 1.0, "p must be at least 1")?;
            hypothesis(positive, "F must be positive")?;
            hypothesis(spot_convexity(&|x| val(x).powf(1.0 / p), lo, hi, true), "F^{1/p} must be convex")?;
        }
        TransformVariant::PowerConcave { p } => {
            hypothesis(p > 0.0 && p <= 1.0, "p must lie in (0, 1]")?;
            hypothesis(positive, "F must be positive")?;
            hypothesis(strict_sign(f, 2, false, lo, hi)?, "F'' must be negative")?;
            hypothesis(spot_convexity(&|x| val(x).powf(1.0 / p), lo, hi, false), "F^{1/p} must be concave")?;
        }
        TransformVariant::InversePowerConcave { p } => {
            hypothesis(p > 0.0, "p must be positive")?;
            hypothesis(positive, "F must be positive")?;
            hypothesis(strict_sign(f, 2, true, lo, hi)?, "F'' must be positive")?;
            hypothesis(spot_convexity(&|x| val(x).powf(-1.0 / p), lo, hi, false), "F^{-1/p} must be concave")?;
        }
        TransformVariant::ExpConcave { a: cap } => {
            hypothesis(cap > 0.0, "a must be positive")?;
            hypothesis(strict_sign(f, 2, true, lo, hi)?, "F'' must be positive")?;
            let g_ok = spot_points(lo, hi).iter().all(|&x| {
                let (f1, f2) = (f.derivative(1, x).unwrap_or(f64::NAN), f.derivative(2, x).unwrap_or(f64::NAN));
                f1 * f1 / f2 <= cap * (1.0 + 1e-12)
            });
            hypothesis(g_ok, "F'^2/F'' must be bounded by a")?;
        }
        TransformVariant::Determinant => {}
    }
    let n = a.dim() as f64;
    let (convex, transform): (bool, Box<dyn Fn(f64) -> f64 + Sync>) = match variant {
        TransformVariant::LogConvex => (true, Box::new(f64::ln)),
        TransformVariant::PowerConvex { p } => (true, Box::new(move |t: f64| t.powf(1.0 / p))),
        TransformVariant::PowerConcave { p } => (false, Box::new(move |t: f64| t.powf(1.0 / p))),
        TransformVariant::InversePowerConcave { p } => (false, Box::new(move |t: f64| t.powf(-1.0 / p))),
        TransformVariant::ExpConcave { a: cap } => (false, Box::new(move |t: f64| (-t / (cap * n)).exp())),
        TransformVariant::Determinant => (false, Box::new(move |t: f64| (-t / n).exp())),
    };
    let bma = HermitianMatrix::symmetrize(b.matrix() - a.matrix());
    let phi = |t: f64| trace_of_function(&interpolate(a, b, t), f);
    let opts = FdOptions::default();
    let rows: Vec<(f64, f64, f64, f64)> = grid
        .par_iter()
        .map(|&t| {
            let d = eigendecompose(&interpolate(a, b, t))?;
            let tr = trace_on(&d, f)?;
            let dtr = trace_product(&derivative_on(&d, f, 1)?, bma.matrix());
            let d2 = second_derivative_romberg(&phi, t, opts)?;
            let mut trg = 0.0;
            for &x in &d.eigenvalues {
                let (f1, f2) = (f.derivative(1, x)?, f.derivative(2, x)?);
                trg += f1 * f1 / f2;
            }
            Ok((tr, dtr, d2, trg))
        })
        .collect::<Result<_>>()?;
    let q: Vec<f64> = rows.iter().map(|r| transform(r.0)).collect();
    let label = variant.label();
    let mut rep = PathReport::new(format!("transform-{label}"), grid.to_vec());
    rep.push(discrete_shape(&format!("{label}-discrete"), "trace-transform-shape", grid, &q, convex).with("f", f.name()));
    rep.push(chord(&format!("{label}-chord"), "trace-transform-chord", grid, &q, convex).with("f", f.name()));
    let cs_l: Vec<f64> = rows.iter().map(|r| r.3 * r.2).collect();
    let cs_r: Vec<f64> = rows.iter().map(|r| r.1 * r.1).collect();
    if rows.iter().all(|r| r.3.is_finite()) {
        rep.push(
            worst_over("cauchy-schwarz", "trace-cauchy-schwarz", Direction::AtLeast, grid, &cs_l, &cs_r, tol::FINITE_DIFFERENCE)
                .with("f", f.name()),
        );
    }
    rep.add_series("trace", rows.iter().map(|r| r.0).collect());
    rep.add_series("transformed", q);
    Ok(rep)
}

/// Klein's inequality `Tr(F(B) - F(A) - F'(A)(B-A)) ≥ 0` and the two-sided
/// chord chain for `φ(τ) = Tr F((1-τ)A + τB)`.
pub fn klein_suite(a: &HermitianMatrix, b: &HermitianMatrix, f: &ScalarFunction, grid: &[f64]) -> Result<Vec<CheckReport>> {
    check_pair(a, b)?;
    check_grid(grid)?;
    let (da, db) = (eigendecompose(a)?, eigendecompose(b)?);
    let (lo, hi) = joint_range(&[&da, &db]);
    hypothesis(f.derivative_sign_holds(2, true, lo, hi)?, &format!("{} must be convex", f.name()))?;
    let (fa, fb) = (trace_on(&da, f)?, trace_on(&db, f)?);
    let bma = b.matrix() - a.matrix();
    let fpa = derivative_on(&da, f, 1)?;
    let fpb = derivative_on(&db, f, 1)?;
    let lin = trace_product(&fpa, &bma);
    let klein = fb - fa - lin;
    let mut out = vec![CheckReport::at_least("klein", "klein-inequality", klein, 0.0, tol::tol(tol::EXACT_INEQUALITY, fa.abs() + fb.abs() + lin.abs()))
        .with("f", f.name())];
    let cross = trace_product(&(&fpb - &fpa), &bma);
    let phis: Vec<f64> = grid.par_iter().map(|&t| trace_of_function(&interpolate(a, b, t), f)).collect::<Result<_>>()?;
    let gaps: Vec<f64> = grid.iter().zip(&phis).map(|(&t, &p)| (1.0 - t) * fa + t * fb - p).collect();
    let caps: Vec<f64> = grid.iter().map(|&t| t * (1.0 - t) * cross).collect();
    let zeros = vec![0.0; grid.len()];
    let mag = fa.abs() + fb.abs();
    let lower = worst_over("klein-chain-lower", "two-sided-convex-trace", Direction::AtLeast, grid, &gaps, &zeros, GRID_EXACT);
    let upper = worst_over("klein-chain-upper", "two-sided-convex-trace", Direction::AtMost, grid, &gaps, &caps, GRID_EXACT);
    out.push(lower.with_tol(tol::tol(GRID_EXACT, mag)).with("f", f.name()));
    out.push(upper.with_tol(tol::tol(GRID_EXACT, mag + cross.abs())).with("f", f.name()));
    Ok(out)
}

/// Sign pattern of `F'`, `F''` for the mean-transform statement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MeanCase {
    /// `F' > 0`, `F'' > 0`, `A` concave: mean convex.
    IncreasingConvex,
    /// `F' < 0`, `F'' > 0`, `A` concave: mean concave.
    DecreasingConvex,
    /// `F' > 0`, `F'' < 0`, `A` convex: mean concave.
    IncreasingConcave,
    /// `F' < 0`, `F'' < 0`, `A` convex: mean convex.
    DecreasingConcave,
}

impl MeanCase {
    pub fn from_index(i: u8) -> Result<Self> {
        match i {
            1 => Ok(MeanCase::IncreasingConvex),
            2 => Ok(MeanCase::DecreasingConvex),
            3 => Ok(MeanCase::IncreasingConcave),
            4 => Ok(MeanCase::DecreasingConcave),
            _ => Err(SpecError::InvalidArgument(format!("case must be 1..4, got {i}"))),
        }
    }

    /// `(F' > 0, F'' > 0, A convex, mean convex)`.
    fn pattern(self) -> (bool, bool, bool, bool) {
        match self {
            MeanCase::IncreasingConvex => (true, true, false, true),
            MeanCase::DecreasingConvex => (false, true, false, false),
            MeanCase::IncreasingConcave => (true, false, true, false),
            MeanCase::DecreasingConcave => (false, false, true, true),
        }
    }
}

fn mean_hypotheses(f: &ScalarFunction, case: MeanCase, lo: f64, hi: f64, ylo: f64, yhi: f64) -> Result<()> {
    if !f.has_inverse() {
        return Err(SpecError::Evaluator(format!("{}: inverse with two derivatives required", f.name())));
    }
    let (inc, cvx, a_convex, _) = case.pattern();
    hypothesis(strict_sign(f, 1, inc, lo, hi)?, if inc { "F' must be positive" } else { "F' must be negative" })?;
    hypothesis(strict_sign(f, 2, cvx, lo, hi)?, if cvx { "F'' must be positive" } else { "F'' must be negative" })?;
    if yhi - ylo > 1e-12 * (1.0 + ylo.abs()) {
        let g = |y: f64| f.mean_transform(y).unwrap_or(f64::NAN);
        hypothesis(spot_convexity(&g, ylo, yhi, a_convex), if a_convex { "A(y) must be convex" } else { "A(y) must be concave" })?;
    }
    Ok(())
}

/// `τ ↦ F⁻¹(Tr F((1-τ)A + τB)/n)` has the shape fixed by the sign pattern.
pub fn mean_transform_suite(a: &HermitianMatrix, b: &HermitianMatrix, f: &ScalarFunction, case: MeanCase, grid: &[f64]) -> Result<PathReport> {
    check_pair(a, b)?;
    check_grid(grid)?;
    let (da, db) = (eigendecompose(a)?, eigendecompose(b)?);
    let (lo, hi) = joint_range(&[&da, &db]);
    let n = a.dim() as f64;
    let phis: Vec<f64> = grid.par_iter().map(|&t| Ok(trace_of_function(&interpolate(a, b, t), f)? / n)).collect::<Result<_>>()?;
    let (ylo, yhi) = (min_of(&phis), phis.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    mean_hypotheses(f, case, lo, hi, ylo, yhi)?;
    let psi: Vec<f64> = phis.iter().map(|&y| f.inverse(y)).collect::<Result<_>>()?;
    let convex = case.pattern().3;
    let mut rep = PathReport::new("mean-transform", grid.to_vec());
    rep.push(discrete_shape("mean-transform", "mean-transform-shape", grid, &psi, convex).with("f", f.name()).with("case", format!("{case:?}")));
    rep.push(chord("mean-transform-chord", "mean-transform-shape", grid, &psi, convex).with("f", f.name()));
    rep.add_series("mean", phis);
    rep.add_series("psi", psi);
    Ok(rep)
}

/// Floor used when regularizing density matrices.
pub const DENSITY_FLOOR: f64 = 1e-12;

fn density(rho: &HermitianMatrix, eps: Option<f64>, which: &str) -> Result<SpectralDecomposition> {
    let n = rho.dim();
    let tr = rho.trace().re;
    if (tr - 1.0).abs() > 1e-10 * n as f64 {
        return Err(SpecError::InvalidArgument(format!("{which} has trace {tr}, expected 1")));
    }
    let rho = match eps {
        Some(e) => {
            if !(e > 0.0 && e < 1.0) {
                return Err(SpecError::InvalidArgument(format!("regularization must lie in (0, 1), got {e}")));
            }
            HermitianMatrix::symmetrize(&rho.scale_real(1.0 - e) + &Matrix::identity(n).scale_real(e / n as f64))
        }
        None => rho.clone(),
    };
    let d = eigendecompose(&rho)?;
    let min = d.eigenvalues[0];
    if min < -1e-12 {
        return Err(SpecError::InvalidArgument(format!("{which} is not positive semidefinite (eigenvalue {min})")));
    }
    if min <= 0.0 {
        return Err(SpecError::Domain(format!(
            "{which} has a zero eigenvalue where ln is singular; regularize by mixing with I/n (e.g. ε = {DENSITY_FLOOR})"
        )));
    }
    Ok(d)
}

fn entropy_of(d: &SpectralDecomposition) -> f64 {
    -d.eigenvalues.iter().map(|&x| x * x.ln()).sum::<f64>()
}

/// von Neumann entropy `-Tr(ρ ln ρ)` of a full-rank density matrix.
pub fn von_neumann_entropy(rho: &HermitianMatrix) -> Result<f64> {
    Ok(entropy_of(&density(rho, None, "density matrix")?))
}

/// Entropy inequalities on `(1-τ)A + τB` for density matrices `A`, `B`;
/// `regularize = Some(ε)` mixes both with `I/n` first.
pub fn entropy_suite(a: &HermitianMatrix, b: &HermitianMatrix, regularize: Option<f64>, grid: &[f64]) -> Result<PathReport> {
    check_pair(a, b)?;
    check_grid(grid)?;
    let da = density(a, regularize, "A")?;
    let db = density(b, regularize, "B")?;
    let (ar, br) = (HermitianMatrix::symmetrize(da.reconstruct()), HermitianMatrix::symmetrize(db.reconstruct()));
    let (sa, sb) = (entropy_of(&da), entropy_of(&db));
    let (ln_a, ln_b) = (da.function_of(f64::ln), db.function_of(f64::ln));
    let n = a.dim() as f64;
    let s: Vec<f64> = grid
        .par_iter()
        .map(|&t| {
            let d = eigendecompose(&interpolate(&ar, &br, t))?;
            if d.eigenvalues[0] <= 0.0 {
                return Err(SpecError::Domain(format!("path leaves the full-rank densities at τ={t}")));
            }
            Ok(entropy_of(&d))
        })
        .collect::<Result<_>>()?;
    let mut rep = PathReport::new("entropy", grid.to_vec());
    let note = regularize.map(|e| format!("inputs mixed with I/n at ε={e}"));
    let tag = |c: CheckReport| match &note {
        Some(s) => c.with("regularized", s),
        None => c,
    };
    rep.push(tag(discrete_shape("entropy-concavity-discrete", "entropy-concavity", grid, &s, false)));
    rep.push(tag(chord("entropy-concavity", "entropy-concavity", grid, &s, false)));
    let cross = trace_product(ar.matrix(), &ln_b) + trace_product(br.matrix(), &ln_a);
    let upper: Vec<f64> = grid.iter().map(|&t| (1.0 - t).powi(2) * sa + t * t * sb - t * (1.0 - t) * cross).collect();
    rep.push(tag(worst_over("entropy-upper-chain", "entropy-quadratic-upper", Direction::AtMost, grid, &s, &upper, GRID_EXACT)));
    let b_ln_a = trace_product(br.matrix(), &ln_a);
    let a_ln_b = trace_product(ar.matrix(), &ln_b);
    rep.push(tag(CheckReport::at_most("entropy-klein", "entropy-klein", b_ln_a, -sb, tol::tol(GRID_EXACT, b_ln_a.abs() + sb))));
    rep.push(tag(CheckReport::at_most("entropy-klein-swapped", "entropy-klein", a_ln_b, -sa, tol::tol(GRID_EXACT, a_ln_b.abs() + sa))));
    // ψ(τ) = F⁻¹((1 + S)/n) with F = -λ ln λ + λ.
    let f = ScalarFunction::entropy_weight();
    let ys: Vec<f64> = s.iter().map(|&x| (1.0 + x) / n).collect();
    let (ylo, yhi) = (min_of(&ys), ys.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    let range = joint_range(&[&da, &db]);
    match mean_hypotheses(&f, MeanCase::IncreasingConcave, range.0, range.1, ylo, yhi) {
        Ok(()) => {
            let psi: Vec<f64> = ys.iter().map(|&y| f.inverse(y)).collect::<Result<_>>()?;
            rep.push(tag(discrete_shape("entropy-psi-concavity", "entropy-mean-concavity", grid, &psi, false)));
            rep.add_series("psi", psi);
        }
        Err(SpecError::Hypothesis(msg)) => rep.push(CheckReport::failed("entropy-psi-concavity", "entropy-mean-concavity", &msg)),
        Err(e) => return Err(e),
    }
    // Improved Klein: (F⁻¹)'(y_A) Tr(F'(A)(B-A))/n ≥ F⁻¹(y_B) - F⁻¹(y_A).
    let (ya, yb) = ((1.0 + sa) / n, (1.0 + sb) / n);
    let slope = f.inverse_derivative(1, ya)?;
    let lhs = slope * trace_product(&ln_a.scale_real(-1.0), &(br.matrix() - ar.matrix())) / n;
    let rhs = f.inverse(yb)? - f.inverse(ya)?;
    rep.push(tag(CheckReport::at_least("entropy-improved-klein", "entropy-improved-klein", lhs, rhs, tol::tol(GRID_EXACT, lhs.abs() + rhs.abs()))));
    rep.add_series("entropy", s);
    Ok(rep)
}

/// Bounds on `Σ_{j≤m} λ_j((1-τ)A + τB)` from the concavity of `θ_m`, and at
/// `τ = ½` the bounds for `λ_j(A + B)`.
pub fn matrix_sum_bounds(a: &HermitianMatrix, b: &HermitianMatrix, tau: f64, m: usize) -> Result<Vec<CheckReport>> {
    check_pair(a, b)?;
    let n = a.dim();
    if m == 0 || m > n {
        return Err(SpecError::InvalidArgument(format!("need 1 ≤ m ≤ n, got m={m}, n={n}")));
    }
    if !(0.0..=1.0).contains(&tau) {
        return Err(SpecError::InvalidArgument(format!("τ must lie in [0, 1], got {tau}")));
    }
    let al = eigendecompose(a)?.sorted_eigenvalues();
    let be = eigendecompose(b)?.sorted_eigenvalues();
    let lam = eigendecompose(&interpolate(a, b, tau))?.sorted_eigenvalues();
    let theta: f64 = lam[..m].iter().sum();
    let s = 1.0 - tau;
    let lower: f64 = (0..m).map(|j| s * al[j] + tau * be[j]).sum();
    let upper: f64 = (0..m).map(|j| s * s * al[j] + tau * tau * be[j] + s * tau * (al[n - 1 - j] + be[n - 1 - j])).sum();
    let mag = max_abs_of(&al) + max_abs_of(&be);
    let tl = tol::tol(tol::EXACT_INEQUALITY, mag * m as f64);
    let sum = eigendecompose(&HermitianMatrix::symmetrize(a.matrix() + b.matrix()))?.sorted_eigenvalues();
    let theta_sum: f64 = sum[..m].iter().sum();
    let sum_lower: f64 = (0..m).map(|j| al[j] + be[j]).sum();
    let sum_upper: f64 = 0.5 * (0..m).map(|j| al[j] + be[j] + al[n - 1 - j] + be[n - 1 - j]).sum::<f64>();
    Ok(vec![
        CheckReport::at_least("matrix-sum-lower", "matrix-sum-lower", theta, lower, tl).with("tau", tau).with("m", m),
        CheckReport::at_most("matrix-sum-upper", "matrix-sum-upper", theta, upper, tl).with("tau", tau).with("m", m),
        CheckReport::at_least("matrix-sum-a-plus-b-lower", "matrix-sum-a-plus-b", theta_sum, sum_lower, tl).with("m", m),
        CheckReport::at_most("matrix-sum-a-plus-b-upper", "matrix-sum-a-plus-b", theta_sum, sum_upper, tl).with("m", m),
    ])
}

/// Discrete concavity of `θ_m(τ) = Σ_{j≤m} λ_j((1-τ)A + τB)` on `grid`.
pub fn theta_m_concavity(a: &HermitianMatrix, b: &HermitianMatrix, m: usize, grid: &[f64]) -> Result<CheckReport> {
    check_pair(a, b)?;
    check_grid(grid)?;
    if m == 0 || m > a.dim() {
        return Err(SpecError::InvalidArgument(format!("need 1 ≤ m ≤ n, got m={m}")));
    }
    let theta: Vec<f64> = grid
        .par_iter()
        .map(|&t| Ok(eigendecompose(&interpolate(a, b, t))?.sorted_eigenvalues()[..m].iter().sum()))
        .collect::<Result<_>>()?;
    let c = discrete_shape("theta-m-concavity", "theta-m-concavity", grid, &theta, false).with("m", m);
    Ok(c.with_tol(tol::tol(tol::EXACT_INEQUALITY, 0.0)))
}

/// Which bottom-of-spectrum statement to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BottomPart {
    /// `Ḧ ≤ 0`, `F' ≤ 0`, `F'' > 0`: Cauchy–Schwarz lower bound; the mean
    /// is concave when `A` is concave.
    DecreasingConvex,
    /// `Ḧ ≤ 0`, `F' ≥ 0`, `F'' < 0`: Cauchy–Schwarz upper bound; the mean
    /// is concave when `A` is convex.
    IncreasingConcave,
    /// `F`, `F''` concave with `2F'(λ_j) + F''(λ_j)(λ_{m+1} - λ_j) ≤ 0`.
    ConcaveGap,
}

impl BottomPart {
    pub fn from_index(i: u8) -> Result<Self> {
        match i {
            1 => Ok(BottomPart::DecreasingConvex),
            2 => Ok(BottomPart::IncreasingConcave),
            3 => Ok(BottomPart::ConcaveGap),
            _ => Err(SpecError::InvalidArgument(format!("part must be 1, 2 or 3, got {i}"))),
        }
    }
}

/// Second-derivative bounds for `Σ_{j≤m} F(λ_j)` along a family. The inner
/// sum over `k` runs over the complement of `{1..m}`.
pub fn bottom_spectrum_suite(family: &OperatorFamily, grid: &[f64], f: &ScalarFunction, m: usize, part: BottomPart) -> Result<PathReport> {
    check_grid(grid)?;
    let n = family.dim();
    if m == 0 || m > n {
        return Err(SpecError::InvalidArgument(format!("need 1 ≤ m ≤ n, got m={m}, n={n}")));
    }
    let snaps: Vec<_> = grid.par_iter().map(|&t| family.snapshot(t, FdOptions::default())).collect::<Result<_>>()?;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for s in &snaps {
        let l = s.lambda();
        lo = lo.min(l[0]);
        hi = hi.max(l[m - 1]);
    }
    match part {
        BottomPart::DecreasingConvex | BottomPart::IncreasingConcave => {
            for &t in grid {
                let top = family.hddot_max_eigenvalue(t)?;
                if top > 1e-10 {
                    return Err(SpecError::Hypothesis(format!("Ḧ has positive eigenvalue {top} at τ={t}")));
                }
            }
            let dec = part == BottomPart::DecreasingConvex;
            hypothesis(f.derivative_sign_holds(1, !dec, lo, hi)?, if dec { "F' must be non-positive" } else { "F' must be non-negative" })?;
            hypothesis(strict_sign(f, 2, dec, lo, hi)?, if dec { "F'' must be positive" } else { "F'' must be negative" })?;
        }
        BottomPart::ConcaveGap => {
            hypothesis(f.derivative_sign_holds(2, false, lo, hi)?, "F must be concave")?;
            hypothesis(f.derivative_convexity_holds(2, false, lo, hi)?, "F'' must be concave")?;
        }
    }
    let mut rep = PathReport::new(format!("bottom-spectrum-{part:?}"), grid.to_vec());
    let (mut lhs, mut rhs, mut taus, mut sums) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (s, &t) in snaps.iter().zip(grid) {
        let l = s.lambda();
        if m < n && l[m] - l[m - 1] <= s.decomp.degeneracy_tol {
            rep.push(CheckReport::skipped("bottom-spectrum", "bottom-spectrum", "gap λ_{m+1} - λ_m closes").with("tau", t));
            continue;
        }
        if !s.decomp.all_simple() {
            rep.push(CheckReport::skipped("bottom-spectrum", "bottom-spectrum", "degenerate spectrum").with("tau", t));
            continue;
        }
        let mut d2 = 0.0;
        for j in 0..m {
            d2 += f.derivative(1, l[j])? * s.lambda_ddot[j] + f.derivative(2, l[j])? * s.lambda_dot[j].powi(2);
        }
        let r = match part {
            BottomPart::DecreasingConvex | BottomPart::IncreasingConcave => {
                let (mut num, mut den) = (0.0, 0.0);
                for j in 0..m {
                    let (f1, f2) = (f.derivative(1, l[j])?, f.derivative(2, l[j])?);
                    num += f1 * s.lambda_dot[j];
                    den += f1 * f1 / f2;
                }
                if den == 0.0 {
                    0.0
                } else {
                    num * num / den
                }
            }
            BottomPart::ConcaveGap => {
                if m < n {
                    for j in 0..m {
                        let c = 2.0 * f.derivative(1, l[j])? + f.derivative(2, l[j])? * (l[m] - l[j]);
                        if c > 1e-12 * (1.0 + c.abs()) {
                            return Err(SpecError::Hypothesis(format!("2F'(λ_j) + F''(λ_j)(λ_(m+1) - λ_j) = {c} > 0 at τ={t}, j={j}")));
                        }
                    }
                }
                let mut r = 0.0;
                for j in 0..m {
                    r += f.derivative(2, l[j])? * s.hdot_norm_sq(j) + f.derivative(1, l[j])? * s.hddot_expect(j);
                }
                r
            }
        };
        lhs.push(d2);
        rhs.push(r);
        taus.push(t);
        sums.push(l[..m].iter().map(|&x| f.value(x)).sum::<f64>());
    }
    if taus.is_empty() {
        return Ok(rep);
    }
    let dir = if part == BottomPart::IncreasingConcave { Direction::AtMost } else { Direction::AtLeast };
    rep.push(worst_over("bottom-spectrum", "bottom-spectrum", dir, &taus, &lhs, &rhs, tol::FINITE_DIFFERENCE).with("f", f.name()).with("m", m));
    // Mean transform over the bottom m levels under the A(y) shape hypothesis.
    let strictly_monotone = strict_sign(f, 1, part == BottomPart::IncreasingConcave, lo, hi).unwrap_or(false);
    if part != BottomPart::ConcaveGap && f.has_inverse() && strictly_monotone && taus.len() == grid.len() {
        let ys: Vec<f64> = sums.iter().map(|&v| v / m as f64).collect();
        let (ylo, yhi) = (min_of(&ys), ys.iter().copied().fold(f64::NEG_INFINITY, f64::max));
        let g = |y: f64| f.mean_transform(y).unwrap_or(f64::NAN);
        let a_convex = part == BottomPart::IncreasingConcave;
        if yhi - ylo <= 1e-12 * (1.0 + ylo.abs()) || spot_convexity(&g, ylo, yhi, a_convex) {
            let psi: Vec<f64> = ys.iter().map(|&y| f.inverse(y)).collect::<Result<_>>()?;
            rep.push(discrete_shape("bottom-spectrum-mean", "bottom-spectrum-mean-concavity", grid, &psi, false));
            rep.add_series("psi", psi);
        }
    }
    rep.add_series("d2_sum", lhs);
    rep.add_series("bound", rhs);
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_density, random_hermitian, random_positive_definite, rng};

    #[test]
    fn lambert_w_values() {
        assert_eq!(lambert_w_neg_branch(-(-1.0f64).exp()).unwrap(), -1.0);
        assert!((lambert_w_neg_branch(-0.1).unwrap() + 3.577152063957297).abs() < 1e-9);
        for i in 1..100 {
            let y = -(-1.0f64).exp() * i as f64 / 100.0;
            let w = lambert_w_neg_branch(y).unwrap();
            assert!(w <= -1.0);
            assert!(((w * w.exp() - y) / y).abs() < 1e-12, "y={y} w={w}");
        }
        let tiny = lambert_w_neg_branch(-1e-300).unwrap();
        assert!(((tiny * tiny.exp() + 1e-300) / 1e-300).abs() < 1e-12);
        assert!(lambert_w_neg_branch(0.0).is_err());
        assert!(lambert_w_neg_branch(-0.5).is_err());
    }

    #[test]
    fn trace_of_function_examples() {
        let mut r = rng(40, 0);
        let h = random_hermitian(&mut r, 5);
        let t = trace_of_function(&h, &ScalarFunction::polynomial(&[0.0, 1.0])).unwrap();
        assert!((t - h.trace().re).abs() < 1e-12);
        let e = trace_of_function(&HermitianMatrix::diag(&[0.0, 2f64.ln()]), &ScalarFunction::exp()).unwrap();
        assert!((e - 3.0).abs() < 1e-14);
        let sq = trace_of_function(&h, &ScalarFunction::power(2.0).scaled(1.0, "sq"));
        assert!(sq.is_err(), "power is defined on (0, ∞) only");
        let sq = trace_of_function(&h, &ScalarFunction::polynomial(&[0.0, 0.0, 1.0])).unwrap();
        assert!((sq - (h.matrix() * h.matrix()).trace().re).abs() < 1e-10 * (1.0 + sq.abs()));
    }

    fn linear(seed: u64, n: usize) -> OperatorFamily {
        let mut r = rng(seed, 0);
        OperatorFamily::linear(random_hermitian(&mut r, n), random_hermitian(&mut r, n)).unwrap()
    }

    #[test]
    fn trace_path_parts() {
        let fam = linear(41, 5);
        let grid = linspace(0.0, 1.0, 9);
        let p1 = trace_path_suite(&fam, &grid, &ScalarFunction::exp(), TracePathPart::Convexity).unwrap();
        assert!(p1.pass(), "{:?}", p1.checks);
        assert_eq!(p1.checks.len(), 2);
        let cubic = ScalarFunction::polynomial(&[0.3, -1.0, 0.5, 0.2]);
        let p2 = trace_path_suite(&fam, &grid, &cubic, TracePathPart::OperatorBound).unwrap();
        assert_eq!(p2.checks[0].kind, crate::report::CheckKind::Identity);
        assert!(p2.checks[0].residual_or_margin.abs() < 1e-7, "{:?}", p2.checks);
        let quintic = ScalarFunction::polynomial(&[0.1, 0.2, -0.3, 0.1, 0.05, 0.02]);
        let p3 = trace_path_suite(&fam, &grid, &quintic, TracePathPart::Improved).unwrap();
        assert!(p3.checks[0].residual_or_margin.abs() < 1e-6, "{:?}", p3.checks);
        let p2e = trace_path_suite(&fam, &grid, &ScalarFunction::exp(), TracePathPart::OperatorBound).unwrap();
        assert!(p2e.pass(), "{:?}", p2e.checks);
        let p3e = trace_path_suite(&fam, &grid, &ScalarFunction::exp(), TracePathPart::Improved).unwrap();
        assert!(p3e.pass(), "{:?}", p3e.checks);
    }

    #[test]
    fn transforms() {
        let mut r = rng(42, 0);
        let (a, b) = (random_hermitian(&mut r, 5), random_hermitian(&mut r, 5));
        let rep = scalar_transform_suite(&a, &b, &ScalarFunction::exp(), TransformVariant::LogConvex, &default_grid()).unwrap();
        assert!(rep.pass(), "{:?}", rep.checks);
        // Peierls–Bogoliubov at τ = ½ directly.
        let mid = trace_of_function(&interpolate(&a, &b, 0.5), &ScalarFunction::exp()).unwrap();
        let ta = trace_of_function(&a, &ScalarFunction::exp()).unwrap();
        let tb = trace_of_function(&b, &ScalarFunction::exp()).unwrap();
        assert!(mid <= (ta * tb).sqrt());
        let (pa, pb) = (random_positive_definite(&mut r, 6, 0.5), random_positive_definite(&mut r, 6, 0.5));
        let det = scalar_transform_suite(&pa, &pb, &ScalarFunction::exp(), TransformVariant::Determinant, &default_grid()).unwrap();
        assert!(det.pass(), "{:?}", det.checks);
        let det_at = |h: &HermitianMatrix| eigendecompose(h).unwrap().eigenvalues.iter().product::<f64>().powf(1.0 / 6.0);
        assert!(det_at(&interpolate(&pa, &pb, 0.3)) >= 0.7 * det_at(&pa) + 0.3 * det_at(&pb));
        assert!(matches!(
            scalar_transform_suite(&a, &b, &ScalarFunction::exp(), TransformVariant::Determinant, &default_grid()),
            Err(SpecError::Domain(_))
        ));
        let pw = scalar_transform_suite(&pa, &pb, &ScalarFunction::power(3.0), TransformVariant::PowerConvex { p: 3.0 }, &default_grid()).unwrap();
        assert!(pw.pass(), "{:?}", pw.checks);
        let pc = scalar_transform_suite(&pa, &pb, &ScalarFunction::power(0.5), TransformVariant::PowerConcave { p: 0.5 }, &default_grid()).unwrap();
        assert!(pc.pass(), "{:?}", pc.checks);
        let ip = scalar_transform_suite(&pa, &pb, &ScalarFunction::power(-1.0), TransformVariant::InversePowerConcave { p: 1.0 }, &default_grid());
        assert!(ip.unwrap().pass());
        let same = scalar_transform_suite(&a, &a, &ScalarFunction::exp(), TransformVariant::LogConvex, &default_grid()).unwrap();
        for c in &same.checks {
            let bound = if c.name == "cauchy-schwarz" { 1e-6 } else { 1e-9 };
            assert!(c.residual_or_margin.abs() < bound, "{c:?}");
        }
    }

    #[test]
    fn klein() {
        let mut r = rng(43, 0);
        let (a, b) = (random_hermitian(&mut r, 4), random_hermitian(&mut r, 4));
        let sq = ScalarFunction::polynomial(&[0.0, 0.0, 1.0]);
        let k = klein_suite(&a, &b, &sq, &default_grid()).unwrap();
        let diff = b.matrix() - a.matrix();
        let fro2 = diff.frobenius().powi(2);
        assert!((k[0].lhs - fro2).abs() < 1e-12 * (1.0 + fro2), "{k:?}");
        for c in klein_suite(&a, &b, &ScalarFunction::exp(), &default_grid()).unwrap() {
            assert!(c.pass && c.residual_or_margin >= -1e-9, "{c:?}");
        }
        for c in klein_suite(&a, &a, &ScalarFunction::exp(), &default_grid()).unwrap() {
            assert!(c.residual_or_margin.abs() < 1e-12, "{c:?}");
        }
        assert!(matches!(klein_suite(&a, &b, &ScalarFunction::polynomial(&[0.0, 0.0, -1.0]), &default_grid()), Err(SpecError::Hypothesis(_))));
    }

    #[test]
    fn mean_transforms() {
        let mut r = rng(44, 0);
        let (a, b) = (random_hermitian(&mut r, 4), random_hermitian(&mut r, 4));
        let e = mean_transform_suite(&a, &b, &ScalarFunction::exp(), MeanCase::IncreasingConvex, &default_grid()).unwrap();
        assert!(e.pass(), "{:?}", e.checks);
        let (pa, pb) = (random_positive_definite(&mut r, 4, 0.3), random_positive_definite(&mut r, 4, 0.3));
        let l = mean_transform_suite(&pa, &pb, &ScalarFunction::ln(), MeanCase::IncreasingConcave, &default_grid()).unwrap();
        assert!(l.pass(), "{:?}", l.checks);
        let same = mean_transform_suite(&a, &a, &ScalarFunction::exp(), MeanCase::IncreasingConvex, &default_grid()).unwrap();
        assert!(same.checks.iter().all(|c| c.residual_or_margin.abs() < 1e-12));
        assert!(mean_transform_suite(&a, &b, &ScalarFunction::exp(), MeanCase::DecreasingConvex, &default_grid()).is_err());
    }

    #[test]
    fn entropy_cases() {
        let n = 3;
        let mixed = HermitianMatrix::diag(&[1.0 / 3.0; 3]);
        let same = entropy_suite(&mixed, &mixed, None, &default_grid()).unwrap();
        for c in &same.checks {
            assert!(c.pass && c.residual_or_margin.abs() < 1e-12, "{c:?}");
        }
        assert!((von_neumann_entropy(&mixed).unwrap() - (n as f64).ln()).abs() < 1e-14);
        let pure = HermitianMatrix::diag(&[1.0, 0.0]);
        let half = HermitianMatrix::diag(&[0.5, 0.5]);
        assert!(matches!(entropy_suite(&pure, &half, None, &default_grid()), Err(SpecError::Domain(_))));
        let rep = entropy_suite(&pure, &half, Some(DENSITY_FLOOR), &default_grid()).unwrap();
        assert!(rep.pass(), "{:?}", rep.checks);
        let s = &rep.series["entropy"];
        assert!((s[32] - 2f64.ln()).abs() < 1e-12);
        assert!(s[16] - (0.5 * s[0] + 0.5 * s[32]) > 0.1);
        let mut r = rng(45, 0);
        for _ in 0..5 {
            let (a, b) = (random_density(&mut r, 3), random_density(&mut r, 3));
            let rep = entropy_suite(&a, &b, None, &default_grid()).unwrap();
            assert!(rep.pass(), "{:?}", rep.failures());
        }
    }

    #[test]
    fn entropy_inverse_consistency() {
        let f = ScalarFunction::entropy_weight();
        for &x in &[0.05, 0.3, 0.7, 0.99] {
            let y = f.value(x);
            assert!((f.inverse(y).unwrap() - x).abs() < 1e-12);
            assert!((f.inverse_derivative(1, y).unwrap() - 1.0 / -x.ln()).abs() < 1e-9);
        }
    }

    #[test]
    fn matrix_sum_cases() {
        let mut r = rng(46, 0);
        let (a, b) = (random_hermitian(&mut r, 6), random_hermitian(&mut r, 6));
        for c in matrix_sum_bounds(&a, &b, 0.5, 2).unwrap() {
            assert!(c.pass && c.residual_or_margin >= -1e-9, "{c:?}");
        }
        let full = matrix_sum_bounds(&a, &b, 0.3, 6).unwrap();
        assert!(full[0].residual_or_margin.abs() < 1e-12);
        let (da, db) = (HermitianMatrix::diag(&[0.0, 1.0, 2.0]), HermitianMatrix::diag(&[1.0, 3.0, 4.0]));
        let c = matrix_sum_bounds(&da, &db, 0.4, 2).unwrap();
        assert!(c[0].residual_or_margin.abs() < 1e-12);
        assert!(theta_m_concavity(&a, &b, 3, &default_grid()).unwrap().pass);
    }

    #[test]
    fn bottom_spectrum_cases() {
        let fam = linear(47, 8);
        let grid = linspace(0.0, 1.0, 9);
        // Full spectrum, part 1 with F = 1/λ shifted onto the positive axis.
        let mut r = rng(48, 0);
        let pos = OperatorFamily::linear(random_positive_definite(&mut r, 5, 1.0), random_positive_definite(&mut r, 5, 1.0)).unwrap();
        let inv = ScalarFunction::power(-1.0);
        let p1 = bottom_spectrum_suite(&pos, &grid, &inv, 5, BottomPart::DecreasingConvex).unwrap();
        assert!(p1.pass(), "{:?}", p1.checks);
        let neg = ScalarFunction::polynomial(&[0.0, -1.0]);
        assert!(matches!(bottom_spectrum_suite(&fam, &grid, &neg, 1, BottomPart::DecreasingConvex), Err(SpecError::Hypothesis(_))));
        let low = grid.iter().map(|&t| eigendecompose(&fam.hamiltonian(t).unwrap()).unwrap().eigenvalues[0]).fold(f64::INFINITY, f64::min);
        let f = ScalarFunction::neg_shifted_square(low - 1.0);
        let p3 = bottom_spectrum_suite(&fam, &grid, &f, 3, BottomPart::ConcaveGap).unwrap();
        assert!(p3.pass(), "{:?}", p3.checks);
    }
}
