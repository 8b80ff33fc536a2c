//! One-parameter Hermitian families `H(τ)` with exact `Ḣ`, `Ḧ`.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Result, SpecError};
use crate::linalg::{
    align_eigenvectors, commutator, dot, double_commutator, eigendecompose, unitary_exp, HermitianMatrix, Matrix,
    SpectralDecomposition, C64,
};
use crate::report::CheckReport;
use crate::tol;

/// Evaluator for a user-supplied family: returns `(H, Ḣ, Ḧ)` at `τ`.
pub type CustomEvaluator = Arc<dyn Fn(f64) -> Result<(Matrix, Matrix, Matrix)> + Send + Sync>;

#[derive(Clone)]
pub enum FamilyKind {
    /// `(1-τ)A + τB`.
    Linear { a: HermitianMatrix, b: HermitianMatrix },
    /// `Σ τ^i C_i`.
    Polynomial { coeffs: Vec<HermitianMatrix> },
    /// `e^{-iGτ} H₀ e^{iGτ}`.
    UnitaryConjugation { h0: HermitianMatrix, g: HermitianMatrix },
    /// `τT + V`.
    ScaledKinetic { t: HermitianMatrix, v: HermitianMatrix },
    Custom { name: String, eval: CustomEvaluator },
}

impl fmt::Debug for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FamilyKind::Linear { .. } => "Linear",
            FamilyKind::Polynomial { .. } => "Polynomial",
            FamilyKind::UnitaryConjugation { .. } => "UnitaryConjugation",
            FamilyKind::ScaledKinetic { .. } => "ScaledKinetic",
            FamilyKind::Custom { name, .. } => name,
        };
        f.write_str(s)
    }
}

/// `H`, `Ḣ`, `Ḧ` at one parameter value.
#[derive(Debug, Clone)]
pub struct FamilyEval {
    pub tau: f64,
    pub h: HermitianMatrix,
    pub hdot: HermitianMatrix,
    pub hddot: HermitianMatrix,
}

#[derive(Debug, Clone)]
pub struct OperatorFamily {
    pub kind: FamilyKind,
    dim: usize,
}

/// Steps for finite-difference eigenvalue derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdOptions {
    /// Base step for second differences.
    pub h: f64,
    /// Romberg levels: 1 is the plain central difference, 3 uses `h, h/2, h/4`.
    pub levels: usize,
}

impl Default for FdOptions {
    fn default() -> Self {
        FdOptions { h: 1e-2, levels: 3 }
    }
}

fn same_dims(ms: &[&HermitianMatrix]) -> Result<usize> {
    let n = ms.first().map(|m| m.dim()).unwrap_or(0);
    if n == 0 {
        return Err(SpecError::InvalidArgument("family needs at least one matrix".into()));
    }
    for m in ms {
        if m.dim() != n {
            return Err(SpecError::DimensionMismatch { expected: n, got: m.dim() });
        }
    }
    Ok(n)
}

impl OperatorFamily {
    pub fn linear(a: HermitianMatrix, b: HermitianMatrix) -> Result<Self> {
        let dim = same_dims(&[&a, &b])?;
        Ok(OperatorFamily { kind: FamilyKind::Linear { a, b }, dim })
    }

    pub fn polynomial(coeffs: Vec<HermitianMatrix>) -> Result<Self> {
        let dim = same_dims(&coeffs.iter().collect::<Vec<_>>())?;
        Ok(OperatorFamily { kind: FamilyKind::Polynomial { coeffs }, dim })
    }

    pub fn unitary_conjugation(h0: HermitianMatrix, g: HermitianMatrix) -> Result<Self> {
        let dim = same_dims(&[&h0, &g])?;
        Ok(OperatorFamily { kind: FamilyKind::UnitaryConjugation { h0, g }, dim })
    }

    pub fn scaled_kinetic(t: HermitianMatrix, v: HermitianMatrix) -> Result<Self> {
        let dim = same_dims(&[&t, &v])?;
        Ok(OperatorFamily { kind: FamilyKind::ScaledKinetic { t, v }, dim })
    }

    pub fn custom(name: &str, dim: usize, eval: CustomEvaluator) -> Self {
        OperatorFamily { kind: FamilyKind::Custom { name: name.into(), eval }, dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `(H, Ḣ, Ḧ)` at `τ`, each Hermitian.
    pub fn evaluate(&self, tau: f64) -> Result<FamilyEval> {
        let n = self.dim;
        let (h, hdot, hddot) = match &self.kind {
            FamilyKind::Linear { a, b } => {
                let h = &a.scale_real(1.0 - tau) + &b.scale_real(tau);
                (h, b.matrix() - a.matrix(), Matrix::zeros(n))
            }
            FamilyKind::Polynomial { coeffs } => {
                let mut h = Matrix::zeros(n);
                let mut hd = Matrix::zeros(n);
                let mut hdd = Matrix::zeros(n);
                for (i, c) in coeffs.iter().enumerate() {
                    let i32_ = i as i32;
                    h = &h + &c.scale_real(tau.powi(i32_));
                    if i >= 1 {
                        hd = &hd + &c.scale_real(i as f64 * tau.powi(i32_ - 1));
                    }
                    if i >= 2 {
                        hdd = &hdd + &c.scale_real((i * (i - 1)) as f64 * tau.powi(i32_ - 2));
                    }
                }
                (h, hd, hdd)
            }
            FamilyKind::UnitaryConjugation { h0, g } => {
                let w = unitary_exp(g, tau)?;
                let wh = w.adjoint();
                let h = &(&wh * h0.matrix()) * &w;
                let hd = commutator(&h, g)?.scale(C64::new(0.0, 1.0));
                let hdd = double_commutator(g, &h)?;
                (h, hd, hdd)
            }
            FamilyKind::ScaledKinetic { t, v } => (&t.scale_real(tau) + v.matrix(), t.matrix().clone(), Matrix::zeros(n)),
            FamilyKind::Custom { name, eval } => {
                let (h, hd, hdd) = eval(tau).map_err(|e| SpecError::Evaluator(format!("{name} at τ={tau}: {e}")))?;
                for m in [&h, &hd, &hdd] {
                    if m.dim() != n {
                        return Err(SpecError::DimensionMismatch { expected: n, got: m.dim() });
                    }
                }
                (h, hd, hdd)
            }
        };
        let strict = matches!(self.kind, FamilyKind::Custom { .. });
        let wrap = |m: Matrix| if strict { HermitianMatrix::new(m) } else { Ok(HermitianMatrix::symmetrize(m)) };
        Ok(FamilyEval { tau, h: wrap(h)?, hdot: wrap(hdot)?, hddot: wrap(hddot)? })
    }

    pub fn hamiltonian(&self, tau: f64) -> Result<HermitianMatrix> {
        Ok(self.evaluate(tau)?.h)
    }

    /// Decomposition at `τ` with columns aligned to `reference`.
    pub fn aligned_at(&self, tau: f64, reference: &SpectralDecomposition) -> Result<SpectralDecomposition> {
        let d = eigendecompose(&self.hamiltonian(tau)?)?;
        Ok(align_eigenvectors(reference, &d)?.decomp)
    }

    /// Eigen-data at `τ` with FH first derivatives and extrapolated second
    /// differences of the aligned branches.
    pub fn snapshot(&self, tau: f64, opts: FdOptions) -> Result<Snapshot> {
        let eval = self.evaluate(tau)?;
        let decomp = eigendecompose(&eval.h)?;
        let lambda_ddot = self.lambda_ddot_fd(tau, &decomp, opts)?;
        Ok(Snapshot::new(eval, decomp, lambda_ddot))
    }

    /// Snapshot with `λ̈` supplied by the caller (for families where it is known).
    pub fn snapshot_with(&self, tau: f64, lambda_ddot: Vec<f64>) -> Result<Snapshot> {
        let eval = self.evaluate(tau)?;
        let decomp = eigendecompose(&eval.h)?;
        if lambda_ddot.len() != decomp.dim() {
            return Err(SpecError::DimensionMismatch { expected: decomp.dim(), got: lambda_ddot.len() });
        }
        Ok(Snapshot::new(eval, decomp, lambda_ddot))
    }

    /// Central second differences of aligned eigenvalues, Romberg-extrapolated
    /// over `opts.levels` halvings of `opts.h`.
    pub fn lambda_ddot_fd(&self, tau: f64, decomp: &SpectralDecomposition, opts: FdOptions) -> Result<Vec<f64>> {
        if opts.levels == 0 || opts.h <= 0.0 {
            return Err(SpecError::InvalidArgument("fd step and levels must be positive".into()));
        }
        let n = decomp.dim();
        let mut table: Vec<Vec<f64>> = Vec::new();
        for l in 0..opts.levels {
            let h = opts.h / f64::from(1u32 << l);
            let plus = self.aligned_at(tau + h, decomp)?;
            let minus = self.aligned_at(tau - h, decomp)?;
            table.push(
                (0..n)
                    .map(|j| (plus.eigenvalues[j] - 2.0 * decomp.eigenvalues[j] + minus.eigenvalues[j]) / (h * h))
                    .collect(),
            );
        }
        // Romberg: error expansion in even powers of h.
        let mut k = 1;
        while table.len() > 1 {
            let f = 4f64.powi(k);
            table = table
                .windows(2)
                .map(|w| w[0].iter().zip(&w[1]).map(|(c, f2)| (f * f2 - c) / (f - 1.0)).collect())
                .collect();
            k += 1;
        }
        Ok(table.pop().unwrap_or_default())
    }

    /// Largest eigenvalue of `Ḧ(τ)`.
    pub fn hddot_max_eigenvalue(&self, tau: f64) -> Result<f64> {
        let e = self.evaluate(tau)?;
        let d = eigendecompose(&e.hddot)?;
        Ok(d.eigenvalues.last().copied().unwrap_or(0.0))
    }

    /// `max |(H(τ+h)-H(τ-h))/2h - Ḣ(τ)|` and the analogous second-difference defect of `Ḧ`.
    pub fn operator_fd_defects(&self, tau: f64, h: f64) -> Result<(f64, f64)> {
        let p = self.evaluate(tau + h)?;
        let c = self.evaluate(tau)?;
        let m = self.evaluate(tau - h)?;
        let d1 = (&(p.h.matrix() - m.h.matrix()).scale_real(0.5 / h) - c.hdot.matrix()).max_abs();
        let second = &(&(p.h.matrix() - c.h.matrix()) - &(c.h.matrix() - m.h.matrix())).scale_real(1.0 / (h * h));
        let d2 = (second - c.hddot.matrix()).max_abs();
        Ok((d1, d2))
    }
}

/// Default first-derivative step `1e-4 (1 + |τ|)`.
pub fn default_first_step(tau: f64) -> f64 {
    1e-4 * (1.0 + tau.abs())
}

/// Eigen-data of a family at one `τ`.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub eval: FamilyEval,
    pub decomp: SpectralDecomposition,
    /// `λ̇_j = <u_j, Ḣ u_j>`.
    pub lambda_dot: Vec<f64>,
    pub lambda_ddot: Vec<f64>,
    /// `M_kj = <u_k, Ḣ u_j>`.
    pub m: Matrix,
    /// `N_kj = <u_k, Ḧ u_j>`.
    pub n: Matrix,
}

impl Snapshot {
    pub fn new(eval: FamilyEval, decomp: SpectralDecomposition, lambda_ddot: Vec<f64>) -> Self {
        let m = decomp.in_eigenbasis(eval.hdot.matrix());
        let n = decomp.in_eigenbasis(eval.hddot.matrix());
        let lambda_dot = (0..decomp.dim()).map(|j| m[(j, j)].re).collect();
        Snapshot { eval, decomp, lambda_dot, lambda_ddot, m, n }
    }

    pub fn dim(&self) -> usize {
        self.decomp.dim()
    }

    pub fn lambda(&self) -> &[f64] {
        &self.decomp.eigenvalues
    }

    /// `|<Ḣu_j, u_k>|²`.
    pub fn m2(&self, k: usize, j: usize) -> f64 {
        self.m[(k, j)].norm_sqr()
    }

    /// `<Ḧu_j, u_j>`.
    pub fn hddot_expect(&self, j: usize) -> f64 {
        self.n[(j, j)].re
    }

    /// `‖Ḣu_j‖²`.
    pub fn hdot_norm_sq(&self, j: usize) -> f64 {
        let v = self.eval.hdot.matvec(&self.decomp.vector(j));
        v.iter().map(|x| x.norm_sqr()).sum()
    }

    /// `<[Ḣ,[H,Ḣ]] u_j, u_j>` from the operator itself.
    pub fn hdot_double_commutator_expect(&self, j: usize) -> Result<f64> {
        let c = double_commutator(self.eval.hdot.matrix(), self.eval.h.matrix())?;
        Ok(self.decomp.expectation(&c, j))
    }
}

/// Aligned eigen-branches of a family over a grid.
#[derive(Debug, Clone, Serialize)]
pub struct EigenPath {
    pub grid: Vec<f64>,
    /// Analytic-branch view: eigenvalues following aligned eigenvectors.
    pub branches: Vec<Vec<f64>>,
    /// Increasing-order view.
    pub sorted: Vec<Vec<f64>>,
    pub lambda_dot: Vec<Vec<f64>>,
    /// Second differences of the aligned branches; `NaN` at the ends.
    pub lambda_ddot: Vec<Vec<f64>>,
    /// `min_j |<u_j(τ_{i-1}), u_j(τ_i)>|` per step (1 at the first point).
    pub min_overlap: Vec<f64>,
    pub ambiguous: Vec<bool>,
}

impl EigenPath {
    pub const CONTINUITY: f64 = 0.9;

    pub fn build(family: &OperatorFamily, grid: &[f64]) -> Result<Self> {
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(SpecError::InvalidArgument("grid must be strictly ascending".into()));
        }
        let raw: Vec<(FamilyEval, SpectralDecomposition)> = grid
            .par_iter()
            .map(|&t| {
                let e = family.evaluate(t)?;
                let d = eigendecompose(&e.h)?;
                Ok((e, d))
            })
            .collect::<Result<_>>()?;
        let mut branches = Vec::with_capacity(grid.len());
        let mut sorted = Vec::with_capacity(grid.len());
        let mut lambda_dot = Vec::with_capacity(grid.len());
        let mut min_overlap = Vec::with_capacity(grid.len());
        let mut ambiguous = Vec::with_capacity(grid.len());
        let mut prev: Option<SpectralDecomposition> = None;
        for (e, d) in raw {
            let (d, ov, amb) = match &prev {
                None => (d, 1.0, false),
                Some(p) => {
                    let a = align_eigenvectors(p, &d)?;
                    let ov = a.overlaps.iter().copied().fold(f64::INFINITY, f64::min);
                    (a.decomp, ov, a.ambiguous)
                }
            };
            sorted.push(d.sorted_eigenvalues());
            branches.push(d.eigenvalues.clone());
            lambda_dot.push((0..d.dim()).map(|j| d.expectation(e.hdot.matrix(), j)).collect());
            min_overlap.push(ov);
            ambiguous.push(amb);
            prev = Some(d);
        }
        let n = family.dim();
        let lambda_ddot = (0..grid.len())
            .map(|i| {
                if i == 0 || i + 1 == grid.len() {
                    return vec![f64::NAN; n];
                }
                let (h1, h2) = (grid[i] - grid[i - 1], grid[i + 1] - grid[i]);
                (0..n)
                    .map(|j| {
                        let s1 = (branches[i][j] - branches[i - 1][j]) / h1;
                        let s2 = (branches[i + 1][j] - branches[i][j]) / h2;
                        2.0 * (s2 - s1) / (h1 + h2)
                    })
                    .collect()
            })
            .collect();
        Ok(EigenPath { grid: grid.to_vec(), branches, sorted, lambda_dot, lambda_ddot, min_overlap, ambiguous })
    }

    /// Branch continuity holds at every step.
    pub fn continuous(&self) -> bool {
        self.min_overlap.iter().all(|&o| o >= Self::CONTINUITY)
    }

    /// Values of branch `j` along the grid.
    pub fn branch(&self, j: usize) -> Vec<f64> {
        self.branches.iter().map(|b| b[j]).collect()
    }
}

/// First-order Feynman–Hellmann checks at `τ`: central-difference slope
/// against `<u_j, Ḣ u_j>` and the exact integral form over `[τ, τ+h]`.
pub fn fd_derivative_check(family: &OperatorFamily, tau: f64, h: f64) -> Result<Vec<CheckReport>> {
    if h <= 0.0 {
        return Err(SpecError::InvalidArgument("step must be positive".into()));
    }
    let c = family.evaluate(tau)?;
    let d = eigendecompose(&c.h)?;
    let plus_eval = family.evaluate(tau + h)?;
    let plus = align_eigenvectors(&d, &eigendecompose(&plus_eval.h)?)?.decomp;
    let minus = family.aligned_at(tau - h, &d)?;
    let n = d.dim();
    let mut out = Vec::new();
    let simple: Vec<usize> = (0..n).filter(|&j| d.is_simple(j)).collect();
    if simple.is_empty() {
        out.push(CheckReport::skipped("fh-first-derivative", "feynman-hellmann", "no simple eigenvalue at τ"));
        return Ok(out);
    }
    let (mut worst, mut lhs_w, mut rhs_w) = (0.0f64, 0.0, 0.0);
    let mut scale = 0.0f64;
    for &j in &simple {
        let slope = (plus.eigenvalues[j] - minus.eigenvalues[j]) / (2.0 * h);
        let fh = d.expectation(c.hdot.matrix(), j);
        scale = scale.max(fh.abs()).max(slope.abs());
        if (slope - fh).abs() >= worst {
            worst = (slope - fh).abs();
            lhs_w = slope;
            rhs_w = fh;
        }
    }
    let skipped = n - simple.len();
    out.push(
        CheckReport::identity("fh-first-derivative", "feynman-hellmann", lhs_w, rhs_w, tol::tol(tol::FINITE_DIFFERENCE, scale))
            .with("tau", tau)
            .with("h", h)
            .with("degenerate_skipped", skipped),
    );
    // Exact integral form, no step-size error.
    let dh = plus_eval.h.matrix() - c.h.matrix();
    let (mut worst, mut lhs_w, mut rhs_w) = (0.0f64, 0.0, 0.0);
    for &j in &simple {
        let up = plus.vector(j);
        let u = d.vector(j);
        let lhs = dh.sandwich(&up, &u);
        let rhs = dot(&up, &u) * (plus.eigenvalues[j] - d.eigenvalues[j]);
        if (lhs - rhs).norm() >= worst {
            worst = (lhs - rhs).norm();
            lhs_w = lhs.re;
            rhs_w = lhs.re - worst;
        }
    }
    out.push(
        CheckReport::identity("fh-integral", "feynman-hellmann-integral", lhs_w, rhs_w, tol::tol(1e-10, c.h.max_abs()))
            .with("tau", tau)
            .with("h", h),
    );
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_hermitian, rng};

    fn pauli_x() -> HermitianMatrix {
        HermitianMatrix::from_real_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap()
    }

    #[test]
    fn linear_path_derivatives() {
        let mut r = rng(1, 0);
        let (a, b) = (random_hermitian(&mut r, 4), random_hermitian(&mut r, 4));
        let f = OperatorFamily::linear(a.clone(), b.clone()).unwrap();
        let e = f.evaluate(0.37).unwrap();
        assert!((e.hdot.matrix() - &(b.matrix() - a.matrix())).max_abs() < 1e-15);
        assert_eq!(e.hddot.max_abs(), 0.0);
    }

    #[test]
    fn polynomial_path_at_two() {
        let mut r = rng(2, 0);
        let c: Vec<_> = (0..3).map(|_| random_hermitian(&mut r, 3)).collect();
        let f = OperatorFamily::polynomial(c.clone()).unwrap();
        let e = f.evaluate(2.0).unwrap();
        let hd = c[1].matrix() + &c[2].scale_real(4.0);
        assert!((e.hdot.matrix() - &hd).max_abs() < 1e-14);
        assert!((e.hddot.matrix() - &c[2].scale_real(2.0)).max_abs() < 1e-14);
    }

    #[test]
    fn unitary_conjugation_at_zero() {
        let mut r = rng(3, 0);
        let (h0, g) = (random_hermitian(&mut r, 5), random_hermitian(&mut r, 5));
        let f = OperatorFamily::unitary_conjugation(h0.clone(), g.clone()).unwrap();
        let e = f.evaluate(0.0).unwrap();
        assert!((e.h.matrix() - h0.matrix()).max_abs() < 1e-13);
        let hd = commutator(&h0, &g).unwrap().scale(C64::new(0.0, 1.0));
        assert!((e.hdot.matrix() - &hd).max_abs() < 1e-13);
        assert!((e.hddot.matrix() - &double_commutator(&g, &h0).unwrap()).max_abs() < 1e-13);
    }

    #[test]
    fn unitary_conjugation_isospectral() {
        let mut r = rng(4, 0);
        let f = OperatorFamily::unitary_conjugation(random_hermitian(&mut r, 6), random_hermitian(&mut r, 6)).unwrap();
        let l0 = eigendecompose(&f.hamiltonian(0.0).unwrap()).unwrap().eigenvalues;
        for t in [0.3, -1.1, 2.5] {
            let l = eigendecompose(&f.hamiltonian(t).unwrap()).unwrap().eigenvalues;
            for (a, b) in l.iter().zip(&l0) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn operator_derivatives_converge_quadratically() {
        let mut r = rng(5, 0);
        let f = OperatorFamily::unitary_conjugation(random_hermitian(&mut r, 4), random_hermitian(&mut r, 4)).unwrap();
        let (a1, a2) = f.operator_fd_defects(0.4, 1e-2).unwrap();
        let (b1, b2) = f.operator_fd_defects(0.4, 5e-3).unwrap();
        assert!((a1 / b1 - 4.0).abs() < 0.1, "{}", a1 / b1);
        assert!((a2 / b2 - 4.0).abs() < 0.1, "{}", a2 / b2);
    }

    #[test]
    fn commuting_diagonal_path_fh() {
        let f = OperatorFamily::linear(HermitianMatrix::diag(&[0.0, 1.0]), HermitianMatrix::diag(&[1.0, 3.0])).unwrap();
        let s = f.snapshot(0.5, FdOptions::default()).unwrap();
        assert_eq!(s.lambda_dot, vec![1.0, 2.0]);
        for c in fd_derivative_check(&f, 0.5, 1e-4).unwrap() {
            assert!(c.pass, "{c:?}");
        }
    }

    #[test]
    fn unitary_family_has_zero_eigenvalue_velocity() {
        let mut r = rng(6, 0);
        let f = OperatorFamily::unitary_conjugation(random_hermitian(&mut r, 5), random_hermitian(&mut r, 5)).unwrap();
        let s = f.snapshot(0.2, FdOptions::default()).unwrap();
        assert!(s.lambda_dot.iter().all(|v| v.abs() < 1e-10));
        assert!(s.lambda_ddot.iter().all(|v| v.abs() < 1e-6));
    }

    #[test]
    fn fd_slope_is_second_order() {
        let mut r = rng(7, 0);
        let f = OperatorFamily::linear(random_hermitian(&mut r, 6), random_hermitian(&mut r, 6)).unwrap();
        let res = |h: f64| fd_derivative_check(&f, 0.3, h).unwrap()[0].residual_or_margin.abs();
        let ratio = res(1e-3) / res(5e-4);
        assert!((ratio - 4.0).abs() < 0.2, "{ratio}");
    }

    #[test]
    fn integral_fh_is_exact_for_large_steps() {
        let mut r = rng(8, 0);
        let f = OperatorFamily::linear(random_hermitian(&mut r, 5), random_hermitian(&mut r, 5)).unwrap();
        let c = &fd_derivative_check(&f, 0.1, 0.05).unwrap()[1];
        assert!(c.pass, "{c:?}");
    }

    #[test]
    fn crossing_path_follows_analytic_branches() {
        let f = OperatorFamily::linear(HermitianMatrix::diag(&[0.0, 0.0]).clone(), pauli_x()).unwrap();
        let grid: Vec<f64> = (0..40).map(|i| -0.975 + 0.05 * i as f64).collect();
        let p = EigenPath::build(&f, &grid).unwrap();
        assert!(p.continuous());
        let b0 = p.branch(0);
        // Starts on -|τ| at τ=-1, i.e. +τ analytically after the crossing.
        for (t, v) in grid.iter().zip(&b0) {
            assert!((v - t).abs() < 1e-12, "{t} {v}");
        }
        for dd in &p.lambda_ddot[1..39] {
            assert!(dd.iter().all(|v| v.abs() < 1e-9));
        }
    }

    #[test]
    fn romberg_matches_closed_form_two_level() {
        // H = [[0, τ], [τ, 1-τ]] along A=diag(0,1), B=σx: λ = (1-τ)/2 ∓ √s/2
        // with s = 5τ² - 2τ + 1, so λ̈₁ = -(2s s'' - s'²)/(8 s^{3/2}).
        let f = OperatorFamily::linear(HermitianMatrix::diag(&[0.0, 1.0]), pauli_x()).unwrap();
        let tau = 0.3f64;
        let s = f.snapshot(tau, FdOptions::default()).unwrap();
        let q = 5.0 * tau * tau - 2.0 * tau + 1.0;
        let dq = 10.0 * tau - 2.0;
        let exact0 = -(2.0 * q * 10.0 - dq * dq) / (8.0 * q.powf(1.5));
        assert!((s.lambda_ddot[0] - exact0).abs() < 1e-9, "{} {}", s.lambda_ddot[0], exact0);
        assert!((s.lambda_ddot[0] + s.lambda_ddot[1]).abs() < 1e-9);
    }

    #[test]
    fn custom_family_rejects_non_hermitian() {
        let f = OperatorFamily::custom(
            "bad",
            2,
            Arc::new(|_| {
                let m = Matrix::from_real_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]])?;
                Ok((m.clone(), m.clone(), m))
            }),
        );
        assert!(f.evaluate(0.0).is_err());
    }
}
