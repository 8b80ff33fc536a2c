//! Both sides of the abstract sum rules and second-order Feynman–Hellmann
//! statements for finite Hermitian matrices.
//!
//! Conventions: `<a, b>` is conjugate-linear in `a`; `M_kj = <u_k, Ḣ u_j>`
//! and `g_kj = <u_k, G u_j>` are matrix elements in the eigenbasis.

use crate::error::{Result, SpecError};
use crate::family::{FdOptions, OperatorFamily, Snapshot};
use crate::linalg::{
    align_eigenvectors, commutator, dot, double_commutator, eigendecompose, norm_sqr, Eigensystem, HermitianMatrix,
    Matrix, SpectralDecomposition, C64,
};
use crate::report::{scaled_second_differences, CheckReport, PathReport};
use crate::scalar::ScalarFunction;
use crate::tol;

pub use crate::riesz::{negative_part_monotonicity, riesz_monotonicity_scan};

fn check_subset(n: usize, subset: &[usize]) -> Result<Vec<bool>> {
    let mut inj = vec![false; n];
    for &j in subset {
        if j >= n {
            return Err(SpecError::InvalidArgument(format!("index {j} outside spectrum of size {n}")));
        }
        inj[j] = true;
    }
    Ok(inj)
}

fn check_dim(sys: &Eigensystem, g: &Matrix) -> Result<()> {
    if g.dim() != sys.dim() {
        return Err(SpecError::DimensionMismatch { expected: sys.dim(), got: g.dim() });
    }
    Ok(())
}

/// Per-eigenvector TRK quantities for a probe `G`.
#[derive(Debug, Clone)]
pub struct TrkTerms {
    /// `C_j = <[G*,[H,G]] u_j, u_j> + <[G,[H,G*]] u_j, u_j>`.
    pub commutator_side: Vec<f64>,
    /// `‖[H,G]u_j‖² + ‖[H,G*]u_j‖²`.
    pub first_commutator_norms: Vec<f64>,
    /// `w_jk = |<G u_j, u_k>|² + |<G* u_j, u_k>|²`, indexed `[j][k]`.
    pub weights: Vec<Vec<f64>>,
}

impl TrkTerms {
    pub fn new(sys: &Eigensystem, g: &Matrix) -> Result<Self> {
        check_dim(sys, g)?;
        let h = sys.h.matrix();
        let gs = g.adjoint();
        let hg = commutator(h, g)?;
        let hgs = commutator(h, &gs)?;
        let c = &commutator(&gs, &hg)? + &commutator(g, &hgs)?;
        let d = &sys.decomp;
        let n = d.dim();
        let commutator_side = (0..n).map(|j| d.expectation(&c, j)).collect();
        let first_commutator_norms = (0..n)
            .map(|j| {
                let u = d.vector(j);
                norm_sqr(&hg.matvec(&u)) + norm_sqr(&hgs.matvec(&u))
            })
            .collect();
        let ge = d.in_eigenbasis(g);
        let weights = (0..n).map(|j| (0..n).map(|k| ge[(k, j)].norm_sqr() + ge[(j, k)].norm_sqr()).collect()).collect();
        Ok(TrkTerms { commutator_side, first_commutator_norms, weights })
    }
}

/// TRK sum rule for eigenvector `j`, general (possibly non-Hermitian) `G`.
pub fn trk_sum_rule(sys: &Eigensystem, g: &Matrix, j: usize) -> Result<CheckReport> {
    let t = TrkTerms::new(sys, g)?;
    trk_from_terms(&sys.decomp, &t, j)
}

pub(crate) fn trk_from_terms(d: &SpectralDecomposition, t: &TrkTerms, j: usize) -> Result<CheckReport> {
    let n = d.dim();
    if j >= n {
        return Err(SpecError::InvalidArgument(format!("index {j} outside spectrum of size {n}")));
    }
    let lam = &d.eigenvalues;
    let mut rhs = 0.0;
    let mut mag = t.commutator_side[j].abs();
    for k in 0..n {
        let term = 2.0 * (lam[k] - lam[j]) * t.weights[j][k];
        rhs += term;
        mag += term.abs();
    }
    Ok(CheckReport::identity("trk", "trk-sum-rule", t.commutator_side[j], rhs, tol::tol(tol::EXACT_IDENTITY, mag))
        .with("j", j))
}

/// Sides of the quadratic sum rule for subset `J` and shift `z`.
#[derive(Debug, Clone, Copy)]
pub struct HsSides {
    pub lhs: f64,
    pub rhs: f64,
    pub magnitude: f64,
}

pub(crate) fn hs_sides(d: &SpectralDecomposition, t: &TrkTerms, subset: &[usize], z: f64) -> Result<HsSides> {
    let n = d.dim();
    let inj = check_subset(n, subset)?;
    let lam = &d.eigenvalues;
    let (mut lhs, mut rhs, mut mag) = (0.0, 0.0, 0.0);
    for &j in subset {
        let a = 0.5 * (z - lam[j]).powi(2) * t.commutator_side[j];
        let b = (z - lam[j]) * t.first_commutator_norms[j];
        lhs += a - b;
        mag += a.abs() + b.abs();
        for k in (0..n).filter(|&k| !inj[k]) {
            let term = (z - lam[j]) * (z - lam[k]) * (lam[k] - lam[j]) * t.weights[j][k];
            rhs += term;
            mag += term.abs();
        }
    }
    Ok(HsSides { lhs, rhs, magnitude: mag })
}

/// Quadratic sum rule identity for subset `J` and real `z`.
pub fn hs_quadratic_sum_rule(sys: &Eigensystem, g: &Matrix, subset: &[usize], z: f64) -> Result<CheckReport> {
    let t = TrkTerms::new(sys, g)?;
    let s = hs_sides(&sys.decomp, &t, subset, z)?;
    Ok(CheckReport::identity("hs-quadratic", "hs-quadratic-sum-rule", s.lhs, s.rhs, tol::tol(tol::EXACT_IDENTITY, s.magnitude))
        .with("z", z)
        .with("J", format!("{subset:?}")))
}

/// For `J = {1..n}` and `z ∈ [λ_n, λ_{n+1}]`: the right side is non-positive and
/// bounded by `½(z-λ_n)(z-λ_{n+1}) Σ_{j≤n} C_j`.
pub fn hs_band_bound(sys: &Eigensystem, g: &Matrix, n_prefix: usize, z: f64) -> Result<Vec<CheckReport>> {
    let d = &sys.decomp;
    let n = d.dim();
    if n_prefix == 0 || n_prefix >= n {
        return Err(SpecError::InvalidArgument(format!("band bound needs a proper prefix, got {n_prefix} of {n}")));
    }
    let lam = d.sorted_eigenvalues();
    let (lo, hi) = (lam[n_prefix - 1], lam[n_prefix]);
    if z < lo || z > hi {
        return Err(SpecError::InvalidArgument(format!("z={z} outside [{lo}, {hi}]")));
    }
    let t = TrkTerms::new(sys, g)?;
    let subset: Vec<usize> = (0..n_prefix).collect();
    let s = hs_sides(d, &t, &subset, z)?;
    let csum: f64 = subset.iter().map(|&j| t.commutator_side[j]).sum();
    let bound = 0.5 * (z - lo) * (z - hi) * csum;
    let tl = tol::tol(tol::EXACT_INEQUALITY, s.magnitude);
    Ok(vec![
        CheckReport::at_most("hs-rhs-nonpositive", "hs-band-sign", s.rhs, 0.0, tl).with("z", z).with("n", n_prefix),
        CheckReport::at_most("hs-band-bound", "hs-band-upper-bound", s.rhs, bound, tl).with("z", z).with("n", n_prefix),
    ])
}

/// Gap formula `<Ḣu_j,u_k> = (λ_j-λ_k)<u̇_j,u_k> + λ̇_j δ_jk` with `u̇_j` from
/// central differences of aligned eigenvectors, plus its exact integral form.
pub fn gap_formula_check(family: &OperatorFamily, tau: f64, h: f64) -> Result<Vec<CheckReport>> {
    if h <= 0.0 {
        return Err(SpecError::InvalidArgument("step must be positive".into()));
    }
    let e = family.evaluate(tau)?;
    let d = eigendecompose(&e.h)?;
    let plus_eval = family.evaluate(tau + h)?;
    let plus = align_eigenvectors(&d, &eigendecompose(&plus_eval.h)?)?.decomp;
    let minus = family.aligned_at(tau - h, &d)?;
    let n = d.dim();
    let m = d.in_eigenbasis(e.hdot.matrix());
    let lam = &d.eigenvalues;
    let simple: Vec<usize> = (0..n).filter(|&j| d.is_simple(j)).collect();
    let mut out = Vec::new();
    if simple.is_empty() {
        out.push(CheckReport::skipped("gap-formula", "gap-formula", "no simple eigenvalue at τ"));
        return Ok(out);
    }
    let udot: Vec<Vec<C64>> = simple
        .iter()
        .map(|&j| plus.vector(j).iter().zip(minus.vector(j)).map(|(a, b)| (a - b) / (2.0 * h)).collect())
        .collect();
    let (mut worst, mut wl, mut wr, mut mag) = (0.0f64, 0.0, 0.0, 0.0f64);
    for (a, &j) in simple.iter().enumerate() {
        for &k in &simple {
            let uk = d.vector(k);
            let lhs = m[(k, j)];
            let mut rhs = dot(&uk, &udot[a]) * (lam[j] - lam[k]);
            if j == k {
                rhs += lhs.re;
                // <u_j, u̇_j> is imaginary; only the real part is constrained.
                rhs = C64::new(rhs.re, lhs.im);
            }
            mag = mag.max(lhs.norm());
            let r = (lhs - rhs).norm();
            if r >= worst {
                worst = r;
                wl = lhs.norm();
                wr = lhs.norm() - r;
            }
        }
    }
    out.push(
        CheckReport::identity("gap-formula", "gap-formula", wl, wr, tol::tol(tol::FINITE_DIFFERENCE, mag))
            .with("tau", tau)
            .with("h", h)
            .with("degenerate_skipped", n - simple.len()),
    );
    // Integral form over [τ, τ+h]: exact for any step.
    let dh = plus_eval.h.matrix() - e.h.matrix();
    let (mut worst, mut mag) = (0.0f64, 0.0f64);
    for &j in &simple {
        let up = plus.vector(j);
        let u = d.vector(j);
        let diff: Vec<C64> = up.iter().zip(&u).map(|(a, b)| a - b).collect();
        for &k in &simple {
            let uk = d.vector(k);
            let lhs = dh.sandwich(&up, &uk);
            let rhs = dot(&diff, &uk) * (lam[j] - lam[k]) + dot(&up, &uk) * (plus.eigenvalues[j] - lam[j]);
            worst = worst.max((lhs - rhs).norm());
            mag = mag.max(lhs.norm());
        }
    }
    out.push(
        CheckReport::identity("gap-formula-integral", "gap-formula-integral", worst, 0.0, tol::tol(1e-10, e.h.max_abs()))
            .with("tau", tau)
            .with("h", h)
            .with("max_element", mag),
    );
    Ok(out)
}

/// `<Ḧu_j,u_j> - λ̈_j = 2 Σ_{λ_k≠λ_j} |<Ḣu_j,u_k>|² / (λ_k-λ_j)`.
pub fn second_derivative_identity(snap: &Snapshot, j: usize) -> Result<CheckReport> {
    let n = snap.dim();
    if j >= n {
        return Err(SpecError::InvalidArgument(format!("index {j} outside spectrum of size {n}")));
    }
    if !snap.decomp.is_simple(j) {
        return Ok(CheckReport::skipped("second-derivative", "second-derivative-sum-rule", "degenerate eigenvalue"));
    }
    let lam = snap.lambda();
    let lhs = snap.hddot_expect(j) - snap.lambda_ddot[j];
    let mut rhs = 0.0;
    let mut mag = lhs.abs() + snap.lambda_ddot[j].abs();
    for k in (0..n).filter(|&k| !snap.decomp.coincide(j, k)) {
        let t = 2.0 * snap.m2(k, j) / (lam[k] - lam[j]);
        rhs += t;
        mag += t.abs();
    }
    Ok(CheckReport::identity("second-derivative", "second-derivative-sum-rule", lhs, rhs, tol::tol(tol::FINITE_DIFFERENCE, mag))
        .with("j", j)
        .with("tau", snap.eval.tau))
}

/// Weighted second-order rule. Full `J`: the symmetric difference-quotient
/// identity. Proper `J`: the inequality when `f'` is concave, an identity when
/// `f'` is affine.
pub fn fh2_weighted_sum(snap: &Snapshot, f: &ScalarFunction, subset: &[usize]) -> Result<CheckReport> {
    let n = snap.dim();
    let inj = check_subset(n, subset)?;
    if !snap.decomp.all_simple() {
        return Ok(CheckReport::skipped("fh2-weighted", "fh2-general", "degenerate spectrum"));
    }
    let lam = snap.lambda();
    let fv: Vec<f64> = lam.iter().map(|&x| f.value(x)).collect();
    if fv.iter().any(|v| !v.is_finite()) {
        return Err(SpecError::Domain(format!("weight {} not finite on the spectrum", f.name())));
    }
    let full = inj.iter().all(|&b| b);
    if full {
        let (mut lhs, mut rhs, mut mag) = (0.0, 0.0, 0.0);
        for j in 0..n {
            let a = fv[j] * (snap.lambda_ddot[j] - snap.hddot_expect(j));
            lhs += a;
            mag += (fv[j] * snap.lambda_ddot[j]).abs() + a.abs();
            for k in (0..n).filter(|&k| k != j) {
                let t = (fv[k] - fv[j]) / (lam[k] - lam[j]) * snap.m2(k, j);
                rhs += t;
                mag += t.abs();
            }
        }
        return Ok(CheckReport::identity("fh2-weighted", "fh2-general", lhs, rhs, tol::tol(tol::FINITE_DIFFERENCE, mag))
            .with("f", f.name())
            .with("tau", snap.eval.tau));
    }
    let lo = lam.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = lam.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let affine = f.polynomial_degree().is_some_and(|d| d <= 2);
    if !affine && !f.derivative_convexity_holds(1, false, lo, hi)? {
        return Ok(CheckReport::skipped("fh2-weighted", "fh2-general-inequality", "f' not concave on the spectral range (spot-checked)"));
    }
    let (mut lhs, mut rhs, mut mag) = (0.0, 0.0, 0.0);
    for &j in subset {
        let fp = f.derivative(1, lam[j])?;
        let l = fv[j] * snap.lambda_ddot[j] + fp * snap.lambda_dot[j].powi(2);
        let r = fv[j] * snap.hddot_expect(j) + fp * snap.hdot_norm_sq(j);
        lhs += l;
        rhs += r;
        mag += l.abs() + r.abs();
        for k in (0..n).filter(|&k| !inj[k]) {
            let t = (2.0 * fv[j] + fp * (lam[k] - lam[j])) / (lam[k] - lam[j]) * snap.m2(k, j);
            rhs -= t;
            mag += t.abs();
        }
    }
    let tl = tol::tol(tol::FINITE_DIFFERENCE, mag);
    let c = if affine {
        CheckReport::identity("fh2-weighted", "fh2-general-equality", lhs, rhs, tl)
    } else {
        CheckReport::at_least("fh2-weighted", "fh2-general-inequality", lhs, rhs, tl)
    };
    Ok(c.with("f", f.name()).with("J", format!("{subset:?}")).with("tau", snap.eval.tau))
}

/// Sides of the quadratic second-order rule.
#[derive(Debug, Clone, Copy)]
pub struct Fh2QuadraticSides {
    /// `Σ_J (z-λ_j)²(<Ḧu_j,u_j> - λ̈_j) - 2(z-λ_j)(‖Ḣu_j‖² - λ̇_j²)`.
    pub lhs: f64,
    /// Operator-derivative restatement of the left side.
    pub lhs_operator: f64,
    /// `2 Σ_J Σ_{J^c} (z-λ_j)(z-λ_k)/(λ_k-λ_j) |<Ḣu_j,u_k>|²`.
    pub rhs: f64,
    pub magnitude: f64,
}

pub fn fh2_quadratic_sides(snap: &Snapshot, subset: &[usize], z: f64) -> Result<Fh2QuadraticSides> {
    let n = snap.dim();
    let inj = check_subset(n, subset)?;
    let lam = snap.lambda();
    let h = snap.eval.h.matrix();
    let hd = snap.eval.hdot.matrix();
    let hdd = snap.eval.hddot.matrix();
    // K = z - H, K̇ = -Ḣ, K̈ = -Ḧ.
    let k = &Matrix::identity(n).scale_real(z) - h;
    let kd = hd.scale_real(-1.0);
    let kdd = hdd.scale_real(-1.0);
    let kk = &k * &k;
    let d2k3 = &(&(&(&kdd * &kk) + &(&(&k * &kdd) * &k)) + &(&kk * &kdd))
        + &(&(&(&(&kd * &kd) * &k) + &(&(&kd * &k) * &kd)) + &(&k * &(&kd * &kd))).scale_real(2.0);
    let dc = double_commutator(hd, h)?;
    let (mut lhs, mut lhs_op, mut rhs, mut mag) = (0.0, 0.0, 0.0, 0.0);
    for &j in subset {
        let kap = z - lam[j];
        let ld = snap.lambda_dot[j];
        let ldd = snap.lambda_ddot[j];
        let a = kap * kap * (snap.hddot_expect(j) - ldd);
        let b = 2.0 * kap * (snap.hdot_norm_sq(j) - ld * ld);
        lhs += a - b;
        let cube = 6.0 * kap * ld * ld - 3.0 * kap * kap * ldd;
        let op = snap.decomp.expectation(&d2k3, j);
        let c = snap.decomp.expectation(&dc, j);
        lhs_op += (cube - op - c) / 3.0;
        mag += a.abs() + b.abs() + (kap * kap * ldd).abs();
        for kx in (0..n).filter(|&kx| !inj[kx]) {
            if snap.decomp.coincide(j, kx) {
                continue;
            }
            let t = 2.0 * kap * (z - lam[kx]) / (lam[kx] - lam[j]) * snap.m2(kx, j);
            rhs += t;
            mag += t.abs();
        }
    }
    Ok(Fh2QuadraticSides { lhs, lhs_operator: lhs_op, rhs, magnitude: mag })
}

/// Quadratic second-order rule; the two forms of the left side are compared
/// first, then the left side against the right.
pub fn fh2_quadratic(snap: &Snapshot, subset: &[usize], z: f64) -> Result<Vec<CheckReport>> {
    if !snap.decomp.all_simple() {
        return Ok(vec![CheckReport::skipped("fh2-quadratic", "fh2-quadratic", "degenerate spectrum")]);
    }
    let s = fh2_quadratic_sides(snap, subset, z)?;
    Ok(vec![
        CheckReport::identity(
            "fh2-quadratic-restatement",
            "fh2-quadratic-operator-derivative",
            s.lhs,
            s.lhs_operator,
            tol::tol(tol::EXACT_IDENTITY, s.magnitude),
        )
        .with("z", z)
        .with("tau", snap.eval.tau),
        CheckReport::identity("fh2-quadratic", "fh2-quadratic", s.lhs, s.rhs, tol::tol(tol::FINITE_DIFFERENCE, s.magnitude))
            .with("z", z)
            .with("J", format!("{subset:?}"))
            .with("tau", snap.eval.tau),
    ])
}

/// Tolerance on squeezing margins.
pub const SQUEEZE_MARGIN: f64 = 1e-6;
/// Tolerance on the 2×2 equality case.
pub const SQUEEZE_EQUALITY: f64 = 1e-8;

/// Squeezing bounds for `J = {1..m}`:
/// `C/(λ_n-λ_1)² ≤ Q ≤ C/d²` and `Q ≥ 0`, where `Q = Σ_J <Ḧu_j,u_j> - λ̈_j`,
/// `C = Σ_J <[Ḣ,[H,Ḣ]]u_j,u_j>` and `d = λ_{m+1} - λ_m`.
pub fn squeeze_bounds(snap: &Snapshot, m: usize) -> Result<Vec<CheckReport>> {
    let n = snap.dim();
    if m == 0 || m >= n {
        return Err(SpecError::InvalidArgument(format!("squeezing needs 1 ≤ m < n, got m={m}, n={n}")));
    }
    let lam = snap.decomp.sorted_eigenvalues();
    let d = lam[m] - lam[m - 1];
    if d <= snap.decomp.degeneracy_tol {
        return Err(SpecError::Degenerate(format!("gap d = {d} is not positive")));
    }
    let spread = lam[n - 1] - lam[0];
    // Columns are in increasing order straight from eigendecompose.
    let q: f64 = (0..m).map(|j| snap.hddot_expect(j) - snap.lambda_ddot[j]).sum();
    let dc = double_commutator(snap.eval.hdot.matrix(), snap.eval.h.matrix())?;
    let c: f64 = (0..m).map(|j| snap.decomp.expectation(&dc, j)).sum();
    let upper = c / (d * d);
    let lower = c / (spread * spread);
    let tl = tol::absolute(SQUEEZE_MARGIN);
    let mut out = vec![
        CheckReport::at_least("squeeze-nonnegative", "squeeze-lower", q, 0.0, tl).with("m", m),
        CheckReport::at_most("squeeze-upper", "squeeze-upper", q, upper, tl).with("m", m).with("d", d),
        CheckReport::at_least("squeeze-two-sided-lower", "squeeze-two-sided", q, lower, tl).with("m", m),
    ];
    let commutes = commutator(snap.eval.h.matrix(), snap.eval.hdot.matrix())?.max_abs() <= 1e-12 * (1.0 + snap.eval.h.max_abs());
    if commutes {
        out.push(CheckReport::identity("squeeze-commuting", "squeeze-commuting", q, 0.0, tl).with("m", m));
    }
    if n == 2 {
        out.push(CheckReport::identity(
            "squeeze-2x2-equality",
            "squeeze-2x2-equality",
            q,
            upper,
            tol::tol(SQUEEZE_EQUALITY, upper),
        ));
    }
    Ok(out)
}

/// The quadratic second-order rule on `e^{-iGτ}H₀e^{iGτ}` at `τ = 0` (with
/// `λ̇ = λ̈ = 0`) against the quadratic sum rule for `(H₀, G)`, `G` Hermitian.
pub fn unitary_reduction_check(h0: &HermitianMatrix, g: &HermitianMatrix, subset: &[usize], z: f64) -> Result<Vec<CheckReport>> {
    let fam = OperatorFamily::unitary_conjugation(h0.clone(), g.clone())?;
    let n = fam.dim();
    let mut snap = fam.snapshot_with(0.0, vec![0.0; n])?;
    snap.lambda_dot = vec![0.0; n];
    let f = fh2_quadratic_sides(&snap, subset, z)?;
    let sys = Eigensystem { h: snap.eval.h.clone(), decomp: snap.decomp.clone() };
    let t = TrkTerms::new(&sys, g.matrix())?;
    let s = hs_sides(&sys.decomp, &t, subset, z)?;
    let mag = f.magnitude + s.magnitude;
    let tl = tol::tol(tol::EXACT_IDENTITY, mag);
    Ok(vec![
        CheckReport::identity("unitary-reduction-lhs", "unitary-reduction", f.lhs, s.lhs, tl).with("z", z),
        CheckReport::identity("unitary-reduction-rhs", "unitary-reduction", f.rhs, s.rhs, tl).with("z", z),
        CheckReport::identity("unitary-reduction-fh2", "fh2-quadratic", f.lhs, f.rhs, tl).with("z", z),
    ])
}

/// Tolerance base for the cube-root convexity scan.
pub const CUBEROOT_TOL: f64 = 1e-8;

/// `τ ↦ (Σ_{λ_j<z}(z-λ_j)³)^{1/3}` is convex when `Ḧ ≤ 0`, on each stretch of
/// the grid where membership of `J` is constant.
pub fn cuberoot_convexity_check(family: &OperatorFamily, grid: &[f64], z: f64) -> Result<PathReport> {
    if grid.len() < 5 {
        return Err(SpecError::InvalidArgument("second differences need at least 5 grid points".into()));
    }
    let mut counts = Vec::with_capacity(grid.len());
    let mut q = Vec::with_capacity(grid.len());
    for &t in grid {
        let top = family.hddot_max_eigenvalue(t)?;
        if top > 1e-10 {
            return Err(SpecError::Hypothesis(format!("Ḧ has positive eigenvalue {top} at τ={t}")));
        }
        let lam = eigendecompose(&family.hamiltonian(t)?)?.eigenvalues;
        let below: Vec<f64> = lam.iter().filter(|&&l| l < z).map(|&l| z - l).collect();
        counts.push(below.len());
        q.push(below.iter().map(|x| x.powi(3)).sum::<f64>().cbrt());
    }
    let mut rep = PathReport::new("cuberoot-convexity", grid.to_vec());
    rep.add_series("q", q.clone());
    rep.add_series("count", counts.iter().map(|&c| c as f64).collect());
    let mut start = 0;
    for i in 1..=grid.len() {
        if i == grid.len() || counts[i] != counts[start] {
            let seg = &q[start..i];
            if seg.len() >= 5 && counts[start] > 0 {
                let dd = scaled_second_differences(&grid[start..i], seg);
                let margin = dd.iter().copied().fold(f64::INFINITY, f64::min);
                let qmax = seg.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                rep.push(
                    CheckReport::inequality("cuberoot-convexity", "cuberoot-convexity", margin, 0.0, margin, tol::tol(CUBEROOT_TOL, qmax))
                        .with("segment_start", grid[start])
                        .with("segment_end", grid[i - 1])
                        .with("count", counts[start]),
                );
            } else {
                rep.push(
                    CheckReport::skipped("cuberoot-convexity", "cuberoot-convexity", "segment too short or J empty")
                        .with("segment_start", grid[start])
                        .with("count", counts[start]),
                );
            }
            start = i;
        }
    }
    Ok(rep)
}

/// Convenience: snapshot with default steps.
pub fn snapshot(family: &OperatorFamily, tau: f64) -> Result<Snapshot> {
    family.snapshot(tau, FdOptions::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{gapped_hermitian, random_complex, random_hermitian, rng};

    fn sigma_x() -> HermitianMatrix {
        HermitianMatrix::from_real_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap()
    }

    #[test]
    fn trk_commuting_is_zero() {
        let sys = Eigensystem::new(HermitianMatrix::diag(&[1.0, 2.0, 4.0])).unwrap();
        let g = Matrix::diag(&[3.0, -1.0, 0.5]);
        for j in 0..3 {
            let c = trk_sum_rule(&sys, &g, j).unwrap();
            assert_eq!(c.lhs, 0.0);
            assert_eq!(c.rhs, 0.0);
        }
    }

    #[test]
    fn trk_two_by_two_hand_value() {
        let sys = Eigensystem::new(HermitianMatrix::diag(&[0.0, 1.0])).unwrap();
        let c = trk_sum_rule(&sys, sigma_x().matrix(), 0).unwrap();
        assert!((c.lhs - 4.0).abs() < 1e-15 && (c.rhs - 4.0).abs() < 1e-15, "{c:?}");
    }

    #[test]
    fn trk_random_non_hermitian_probe() {
        let mut r = rng(21, 0);
        let sys = Eigensystem::new(random_hermitian(&mut r, 8)).unwrap();
        let g = random_complex(&mut r, 8);
        for j in 0..8 {
            assert!(trk_sum_rule(&sys, &g, j).unwrap().pass);
        }
    }

    #[test]
    fn hs_two_by_two_hand_value() {
        // J={1}, z=½: ½·¼·4 − ½·(‖[H,G]e₁‖²·2) = ½ − ½·2 = −½;
        // right side (½)(−½)(1)(1+1) = −½.
        let sys = Eigensystem::new(HermitianMatrix::diag(&[0.0, 1.0])).unwrap();
        let c = hs_quadratic_sum_rule(&sys, sigma_x().matrix(), &[0], 0.5).unwrap();
        assert!((c.lhs + 0.5).abs() < 1e-12 && (c.rhs + 0.5).abs() < 1e-12, "{c:?}");
    }

    #[test]
    fn hs_full_spectrum_is_zero() {
        let mut r = rng(22, 0);
        let sys = Eigensystem::new(random_hermitian(&mut r, 5)).unwrap();
        let g = random_complex(&mut r, 5);
        let c = hs_quadratic_sum_rule(&sys, &g, &[0, 1, 2, 3, 4], 0.7).unwrap();
        assert_eq!(c.rhs, 0.0);
        assert!(c.pass && c.lhs.abs() < 1e-10, "{c:?}");
    }

    #[test]
    fn hs_band_bound_random() {
        let mut r = rng(23, 0);
        let sys = Eigensystem::new(random_hermitian(&mut r, 10)).unwrap();
        let g = random_complex(&mut r, 10);
        let l = &sys.decomp.eigenvalues;
        let z = 0.5 * (l[2] + l[3]);
        assert!(hs_quadratic_sum_rule(&sys, &g, &[0, 1, 2], z).unwrap().pass);
        for c in hs_band_bound(&sys, &g, 3, z).unwrap() {
            assert!(c.pass && c.residual_or_margin >= 0.0, "{c:?}");
        }
        assert!(hs_band_bound(&sys, &g, 3, l[5]).is_err());
    }

    #[test]
    fn gap_formula_random_and_unitary() {
        let mut r = rng(24, 0);
        let lin = OperatorFamily::linear(random_hermitian(&mut r, 5), random_hermitian(&mut r, 5)).unwrap();
        for c in gap_formula_check(&lin, 0.4, 1e-4).unwrap() {
            assert!(c.pass, "{c:?}");
        }
        let (h0, g) = (random_hermitian(&mut r, 4), random_hermitian(&mut r, 4));
        let uni = OperatorFamily::unitary_conjugation(h0.clone(), g.clone()).unwrap();
        for c in gap_formula_check(&uni, 0.0, 1e-4).unwrap() {
            assert!(c.pass, "{c:?}");
        }
        // |<Ḣu_j,u_k>| = |λ_j-λ_k| |<Gu_j,u_k>| for the conjugation family.
        let s = uni.snapshot_with(0.0, vec![0.0; 4]).unwrap();
        let ge = s.decomp.in_eigenbasis(g.matrix());
        let l = s.lambda();
        for j in 0..4 {
            for k in 0..4 {
                assert!((s.m[(k, j)].norm() - (l[j] - l[k]).abs() * ge[(k, j)].norm()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn second_derivative_commuting_is_zero() {
        let f = OperatorFamily::linear(HermitianMatrix::diag(&[0.0, 1.0, 3.0]), HermitianMatrix::diag(&[2.0, -1.0, 0.0])).unwrap();
        let s = snapshot(&f, 0.2).unwrap();
        for j in 0..3 {
            let c = second_derivative_identity(&s, j).unwrap();
            assert!(c.pass && c.rhs == 0.0, "{c:?}");
        }
    }

    #[test]
    fn second_derivative_two_by_two_closed_form() {
        let f = OperatorFamily::linear(HermitianMatrix::diag(&[0.0, 1.0]), sigma_x()).unwrap();
        let tau = 0.35f64;
        let s = snapshot(&f, tau).unwrap();
        // λ₁ = (1-τ)/2 - √s/2 with s = 5τ² - 2τ + 1.
        let q = 5.0 * tau * tau - 2.0 * tau + 1.0;
        let dq = 10.0 * tau - 2.0;
        let ldd = -(20.0 * q - dq * dq) / (8.0 * q.powf(1.5));
        assert!((s.lambda_ddot[0] - ldd).abs() < 1e-8, "{} {}", s.lambda_ddot[0], ldd);
        let c = second_derivative_identity(&s, 0).unwrap();
        assert!(c.pass, "{c:?}");
        assert!((c.rhs - 2.0 * s.m2(1, 0) / (s.lambda()[1] - s.lambda()[0])).abs() < 1e-15);
    }

    #[test]
    fn second_derivative_random_fd_limited() {
        let mut r = rng(25, 0);
        let f = OperatorFamily::linear(random_hermitian(&mut r, 6), random_hermitian(&mut r, 6)).unwrap();
        let s = snapshot(&f, 0.5).unwrap();
        for j in 0..6 {
            let c = second_derivative_identity(&s, j).unwrap();
            assert!(c.residual_or_margin.abs() <= 1e-5, "{c:?}");
        }
    }

    #[test]
    fn fh2_weighted_cases() {
        let mut r = rng(26, 0);
        let f = OperatorFamily::linear(random_hermitian(&mut r, 6), random_hermitian(&mut r, 6)).unwrap();
        let s = snapshot(&f, 0.3).unwrap();
        let all: Vec<usize> = (0..6).collect();
        let c = fh2_weighted_sum(&s, &ScalarFunction::polynomial(&[1.0]), &all).unwrap();
        assert!(c.pass && c.rhs == 0.0, "{c:?}");
        let c = fh2_weighted_sum(&s, &ScalarFunction::polynomial(&[0.0, 1.0]), &all).unwrap();
        assert!(c.pass, "{c:?}");
        let z = 0.5 * (s.lambda()[1] + s.lambda()[2]);
        let c = fh2_weighted_sum(&s, &ScalarFunction::shifted_square(z), &[0, 1]).unwrap();
        assert_eq!(c.anchor, "fh2-general-equality");
        assert!(c.pass, "{c:?}");
        let c = fh2_weighted_sum(&s, &ScalarFunction::exp(), &[0, 1]).unwrap();
        assert!(c.skipped, "exp' is convex, not concave");
    }

    #[test]
    fn fh2_quadratic_matches_general_with_square_weight() {
        let mut r = rng(27, 0);
        let f = OperatorFamily::linear(random_hermitian(&mut r, 6), random_hermitian(&mut r, 6)).unwrap();
        let s = snapshot(&f, 0.3).unwrap();
        let z = 0.5 * (s.lambda()[1] + s.lambda()[2]);
        let q = fh2_quadratic_sides(&s, &[0, 1], z).unwrap();
        assert!((q.lhs - q.lhs_operator).abs() < 1e-9 * (1.0 + q.magnitude));
        assert!((q.lhs - q.rhs).abs() < 1e-5);
        for c in fh2_quadratic(&s, &[0, 1], z).unwrap() {
            assert!(c.pass, "{c:?}");
        }
        // General inequality with f = (z-λ)² is the same statement, up to sign
        // of both sides: no systematic discrepancy.
        let g = fh2_weighted_sum(&s, &ScalarFunction::shifted_square(z), &[0, 1]).unwrap();
        assert!(((g.lhs - g.rhs) + (q.lhs - q.rhs)).abs() < 1e-9 * (1.0 + q.magnitude));
    }

    #[test]
    fn fh2_quadratic_shift_invariance() {
        let mut r = rng(28, 0);
        let (a, b) = (random_hermitian(&mut r, 5), random_hermitian(&mut r, 5));
        let f1 = OperatorFamily::linear(a.clone(), b.clone()).unwrap();
        let c = 1.7;
        let shift = HermitianMatrix::symmetrize(Matrix::identity(5).scale_real(c));
        let f2 = OperatorFamily::linear(
            HermitianMatrix::symmetrize(a.matrix() + shift.matrix()),
            HermitianMatrix::symmetrize(b.matrix() + shift.matrix()),
        )
        .unwrap();
        let (s1, s2) = (snapshot(&f1, 0.4).unwrap(), snapshot(&f2, 0.4).unwrap());
        let z = 0.3;
        let q1 = fh2_quadratic_sides(&s1, &[0, 1], z).unwrap();
        let q2 = fh2_quadratic_sides(&s2, &[0, 1], z + c).unwrap();
        assert!((q1.lhs - q2.lhs).abs() < 1e-7 && (q1.rhs - q2.rhs).abs() < 1e-9);
    }

    #[test]
    fn squeeze_two_by_two_equality() {
        let f = OperatorFamily::linear(HermitianMatrix::diag(&[0.0, 1.0]), sigma_x()).unwrap();
        let s = snapshot(&f, 0.35).unwrap();
        let cs = squeeze_bounds(&s, 1).unwrap();
        for c in &cs {
            assert!(c.pass, "{c:?}");
        }
        assert!(cs.iter().any(|c| c.name == "squeeze-2x2-equality"));
    }

    #[test]
    fn squeeze_commuting_and_random() {
        let f = OperatorFamily::linear(HermitianMatrix::diag(&[0.0, 1.0, 3.0]), HermitianMatrix::diag(&[1.0, 1.5, 2.0])).unwrap();
        let s = snapshot(&f, 0.5).unwrap();
        let cs = squeeze_bounds(&s, 1).unwrap();
        assert!(cs.iter().all(|c| c.pass));
        assert!(cs.iter().any(|c| c.name == "squeeze-commuting"));
        let mut r = rng(29, 0);
        let f = OperatorFamily::linear(gapped_hermitian(&mut r, 8, 0.2), HermitianMatrix::symmetrize(random_hermitian(&mut r, 8).scale_real(0.1))).unwrap();
        let s = snapshot(&f, 0.0).unwrap();
        for c in squeeze_bounds(&s, 3).unwrap() {
            assert!(c.pass, "{c:?}");
        }
    }

    #[test]
    fn unitary_reduction_two_by_two_and_random() {
        for c in unitary_reduction_check(&HermitianMatrix::diag(&[0.0, 1.0]), &sigma_x(), &[0], -0.3).unwrap() {
            assert!(c.pass && c.residual_or_margin.abs() < 1e-12, "{c:?}");
        }
        let mut r = rng(30, 0);
        let (h0, g) = (random_hermitian(&mut r, 8), random_hermitian(&mut r, 8));
        for c in unitary_reduction_check(&h0, &g, &[0, 1, 2], 0.25).unwrap() {
            assert!(c.pass, "{c:?}");
        }
    }

    #[test]
    fn printed_negative_half_form_fails() {
        // The reduction with −½ on the first term does not balance.
        let sys = Eigensystem::new(HermitianMatrix::diag(&[0.0, 1.0])).unwrap();
        let t = TrkTerms::new(&sys, sigma_x().matrix()).unwrap();
        let z = -0.3;
        let s = hs_sides(&sys.decomp, &t, &[0], z).unwrap();
        let lam = &sys.decomp.eigenvalues;
        let dc = 0.5 * t.commutator_side[0];
        let hg = 0.5 * t.first_commutator_norms[0];
        let printed = -0.5 * (z - lam[0]).powi(2) * dc - (z - lam[0]) * hg;
        assert!((printed - 0.5 * s.rhs).abs() > 0.1);
        let corrected = 0.5 * (z - lam[0]).powi(2) * dc - (z - lam[0]) * hg;
        assert!((corrected - 0.5 * s.rhs).abs() < 1e-14);
    }

    #[test]
    fn cuberoot_cases() {
        let f = OperatorFamily::linear(HermitianMatrix::diag(&[0.0, 2.0]), sigma_x()).unwrap();
        let grid: Vec<f64> = (0..21).map(|i| i as f64 * 0.05).collect();
        let p = cuberoot_convexity_check(&f, &grid, 0.9).unwrap();
        assert!(p.pass(), "{:?}", p.checks);
        let bad = OperatorFamily::polynomial(vec![HermitianMatrix::diag(&[0.0, 1.0]), HermitianMatrix::diag(&[0.0, 0.0]), HermitianMatrix::diag(&[1.0, 0.0])]).unwrap();
        assert!(matches!(cuberoot_convexity_check(&bad, &grid, 0.5), Err(SpecError::Hypothesis(_))));
    }
}
