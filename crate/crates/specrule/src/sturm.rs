//! Finite-difference Sturm–Liouville eigenproblems `-u'' + V u = E u` with
//! Dirichlet ends: symmetric tridiagonal matrices, Sturm-count bisection,
//! inverse iteration, grid quadrature and Richardson extrapolation.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SpecError};

pub const MIN_INTERIOR_POINTS: usize = 16;

/// Symmetric tridiagonal matrix; `off[i]` couples rows `i` and `i + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiagonal {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Result<Self> {
        if diag.is_empty() || off.len() + 1 != diag.len() {
            return Err(SpecError::DimensionMismatch { expected: diag.len().saturating_sub(1), got: off.len() });
        }
        if diag.iter().chain(&off).any(|x| !x.is_finite()) {
            return Err(SpecError::Domain("non-finite matrix entry".into()));
        }
        Ok(SymTridiagonal { diag, off })
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Gershgorin interval containing the spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.len();
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..n {
            let r = if i > 0 { self.off[i - 1].abs() } else { 0.0 } + if i + 1 < n { self.off[i].abs() } else { 0.0 };
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    /// Infinity norm (equal to the 1-norm by symmetry).
    pub fn norm(&self) -> f64 {
        let n = self.len();
        (0..n)
            .map(|i| {
                self.diag[i].abs()
                    + if i > 0 { self.off[i - 1].abs() } else { 0.0 }
                    + if i + 1 < n { self.off[i].abs() } else { 0.0 }
            })
            .fold(0.0, f64::max)
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i] * v[i];
                if i > 0 {
                    s += self.off[i - 1] * v[i - 1];
                }
                if i + 1 < n {
                    s += self.off[i] * v[i + 1];
                }
                s
            })
            .collect()
    }

    /// Number of eigenvalues strictly below `x`.
    pub fn sturm_count(&self, x: f64) -> usize {
        let tiny = f64::MIN_POSITIVE.sqrt() * (1.0 + x.abs());
        let mut count = 0;
        let mut q = 1.0;
        for i in 0..self.len() {
            let e2 = if i > 0 { self.off[i - 1] * self.off[i - 1] } else { 0.0 };
            q = self.diag[i] - x - if i > 0 { e2 / q } else { 0.0 };
            if q == 0.0 {
                q = -tiny;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// The `k`-th smallest eigenvalue (0-based) by bisection on the Sturm count.
    pub fn eigenvalue(&self, k: usize) -> Result<f64> {
        if k >= self.len() {
            return Err(SpecError::InvalidArgument(format!("eigenvalue index {k} out of range {}", self.len())));
        }
        let (mut lo, mut hi) = self.gershgorin();
        let pad = f64::EPSILON * (lo.abs() + hi.abs() + 1.0);
        lo -= pad;
        hi += pad;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.sturm_count(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Solves `(T - σ) x = b` by Gaussian elimination with partial pivoting.
    fn shifted_solve(&self, sigma: f64, b: &[f64]) -> Vec<f64> {
        let n = self.len();
        let guard = f64::EPSILON * self.norm().max(1.0);
        // Rows after pivoting have up to three nonzeros: a[i], c[i], f[i] (fill-in).
        let mut d: Vec<f64> = self.diag.iter().map(|x| x - sigma).collect();
        let mut lower = self.off.clone();
        let mut upper = self.off.clone();
        upper.push(0.0);
        lower.push(0.0);
        let mut fill = vec![0.0; n];
        let mut rhs = b.to_vec();
        for i in 0..n.saturating_sub(1) {
            if lower[i].abs() > d[i].abs() {
                // Swap rows i and i + 1.
                let (a0, c0, f0) = (d[i], upper[i], fill[i]);
                let (a1, c1, f1) = (lower[i], d[i + 1], upper[i + 1]);
                d[i] = a1;
                upper[i] = c1;
                fill[i] = f1;
                rhs.swap(i, i + 1);
                let m = a0 / a1;
                d[i + 1] = c0 - m * c1;
                upper[i + 1] = f0 - m * f1;
                rhs[i + 1] -= m * rhs[i];
            } else {
                if d[i] == 0.0 {
                    d[i] = guard;
                }
                let m = lower[i] / d[i];
                d[i + 1] -= m * upper[i];
                rhs[i + 1] -= m * rhs[i];
                fill[i] = 0.0;
            }
        }
        if d[n - 1] == 0.0 {
            d[n - 1] = guard;
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut s = rhs[i];
            if i + 1 < n {
                s -= upper[i] * x[i + 1];
            }
            if i + 2 < n {
                s -= fill[i] * x[i + 2];
            }
            x[i] = s / d[i];
        }
        x
    }

    /// Unit eigenvector for an accurate eigenvalue `e`, with its residual
    /// `‖Tv - ev‖`.
    pub fn eigenvector(&self, e: f64) -> Result<(Vec<f64>, f64)> {
        let n = self.len();
        let target = 1e-10 * self.norm().max(1.0);
        for attempt in 0..3 {
            let sigma = e + attempt as f64 * 1e-13 * (1.0 + e.abs());
            let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * ((i * 7919 + attempt) % 13) as f64 / 13.0).collect();
            normalize(&mut v);
            for _ in 0..4 {
                v = self.shifted_solve(sigma, &v);
                if v.iter().any(|x| !x.is_finite()) {
                    break;
                }
                normalize(&mut v);
            }
            if v.iter().any(|x| !x.is_finite()) {
                continue;
            }
            let tv = self.apply(&v);
            let res = tv.iter().zip(&v).map(|(a, b)| (a - e * b).powi(2)).sum::<f64>().sqrt();
            if res <= target {
                return Ok((v, res));
            }
        }
        Err(SpecError::Stagnation { energy: e })
    }
}

fn normalize(v: &mut [f64]) {
    let s = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if s > 0.0 {
        v.iter_mut().for_each(|x| *x /= s);
    }
}

/// `-u'' + V u` on `[a, b]` with `u(a) = u(b) = 0` and `n` interior nodes.
#[derive(Clone)]
pub struct SturmLiouvilleProblem {
    pub a: f64,
    pub b: f64,
    pub n: usize,
    potential: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl fmt::Debug for SturmLiouvilleProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SturmLiouvilleProblem").field("a", &self.a).field("b", &self.b).field("n", &self.n).finish()
    }
}

impl SturmLiouvilleProblem {
    pub fn new(a: f64, b: f64, n: usize, potential: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Result<Self> {
        if !(b > a) || !a.is_finite() || !b.is_finite() {
            return Err(SpecError::InvalidArgument(format!("interval [{a}, {b}] is empty")));
        }
        if n < MIN_INTERIOR_POINTS {
            return Err(SpecError::InvalidArgument(format!("need at least {MIN_INTERIOR_POINTS} interior points, got {n}")));
        }
        Ok(SturmLiouvilleProblem { a, b, n, potential: Arc::new(potential) })
    }

    pub fn h(&self) -> f64 {
        (self.b - self.a) / (self.n + 1) as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        let h = self.h();
        (1..=self.n).map(|i| self.a + i as f64 * h).collect()
    }

    pub fn potential(&self, x: f64) -> f64 {
        (self.potential)(x)
    }

    /// The same problem on the grid with spacing `h / 2`.
    pub fn refined(&self) -> Self {
        SturmLiouvilleProblem { n: 2 * self.n + 1, ..self.clone() }
    }
}

/// A discretized operator: the matrix acting on nodal values, with the nodes
/// and quadrature weight `h`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteOperator {
    pub matrix: SymTridiagonal,
    pub nodes: Vec<f64>,
    pub h: f64,
}

/// Central differences: diagonal `2/h² + V(x_i)`, off-diagonal `-1/h²`.
pub fn build_tridiagonal(problem: &SturmLiouvilleProblem) -> Result<DiscreteOperator> {
    let h = problem.h();
    let nodes = problem.nodes();
    let inv = 1.0 / (h * h);
    let mut diag = Vec::with_capacity(nodes.len());
    for &x in &nodes {
        let v = problem.potential(x);
        if !v.is_finite() {
            return Err(SpecError::Domain(format!("potential is not finite at x = {x}")));
        }
        diag.push(2.0 * inv + v);
    }
    let off = vec![-inv; nodes.len() - 1];
    Ok(DiscreteOperator { matrix: SymTridiagonal::new(diag, off)?, nodes, h })
}

/// Eigenvalue and nodal eigenvector normalized so that `h Σ u_i² = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteEigenpair {
    /// Branch index, starting at 1.
    pub k: usize,
    pub energy: f64,
    pub u: Vec<f64>,
    pub nodes: Vec<f64>,
    pub h: f64,
}

impl DiscreteEigenpair {
    /// Interior sign changes of the eigenvector.
    pub fn sign_changes(&self) -> usize {
        let cut = 1e-10 * self.u.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let mut last = 0.0f64;
        let mut n = 0;
        for &x in self.u.iter().filter(|x| x.abs() > cut) {
            if last != 0.0 && x.signum() != last.signum() {
                n += 1;
            }
            last = x;
        }
        n
    }
}

/// The `k` lowest eigenpairs, ascending, each with residual at most
/// `1e-10 ‖T‖`.
pub fn lowest_eigenpairs(op: &DiscreteOperator, k: usize) -> Result<Vec<DiscreteEigenpair>> {
    if k > op.matrix.len() {
        return Err(SpecError::InvalidArgument(format!("requested {k} eigenpairs from a {}-point grid", op.matrix.len())));
    }
    let scale = op.h.sqrt();
    (0..k)
        .into_par_iter()
        .map(|j| {
            let e = op.matrix.eigenvalue(j)?;
            let (mut v, _) = op.matrix.eigenvector(e)?;
            let cut = 1e-6 * v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            if v.iter().find(|x| x.abs() > cut).is_some_and(|x| *x < 0.0) {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            v.iter_mut().for_each(|x| *x /= scale);
            Ok(DiscreteEigenpair { k: j + 1, energy: e, u: v, nodes: op.nodes.clone(), h: op.h })
        })
        .collect()
}

/// `h Σ w(x_i) u_i²`.
pub fn expectation(pair: &DiscreteEigenpair, w: impl Fn(f64) -> f64) -> Result<f64> {
    let mut s = 0.0;
    for (&x, &u) in pair.nodes.iter().zip(&pair.u) {
        let wx = w(x);
        if !wx.is_finite() {
            return Err(SpecError::Domain(format!("weight is not finite at x = {x}")));
        }
        s += wx * u * u;
    }
    Ok(pair.h * s)
}

/// `h Σ u_i v_i`.
pub fn inner(p: &DiscreteEigenpair, q: &DiscreteEigenpair) -> f64 {
    p.h * p.u.iter().zip(&q.u).map(|(a, b)| a * b).sum::<f64>()
}

/// Second-order Richardson extrapolation from spacings `h` and `h / 2`.
pub fn richardson(e_n: f64, e_2n: f64) -> f64 {
    (4.0 * e_2n - e_n) / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn free(n: usize) -> SturmLiouvilleProblem {
        SturmLiouvilleProblem::new(0.0, 1.0, n, |_| 0.0).unwrap()
    }

    fn dense_eigenvalues(t: &SymTridiagonal) -> Vec<f64> {
        let n = t.len();
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| match j as i64 - i as i64 {
                        0 => t.diag[i],
                        1 => t.off[i],
                        -1 => t.off[j],
                        _ => 0.0,
                    })
                    .collect()
            })
            .collect();
        crate::linalg::eigendecompose(&crate::linalg::HermitianMatrix::from_real_rows(&rows).unwrap()).unwrap().eigenvalues
    }

    #[test]
    fn three_point_laplacian_spectrum() {
        // Built directly: the problem type enforces at least 16 nodes.
        let h: f64 = 0.25;
        let inv = 1.0 / (h * h);
        let t = SymTridiagonal::new(vec![2.0 * inv; 3], vec![-inv; 2]).unwrap();
        let expected = [(2.0 - 2f64.sqrt()) * inv, 2.0 * inv, (2.0 + 2f64.sqrt()) * inv];
        for (k, e) in expected.iter().enumerate() {
            assert!((t.eigenvalue(k).unwrap() - e).abs() < 1e-12 * e);
        }
    }

    #[test]
    fn matches_dense_solver() {
        let p = SturmLiouvilleProblem::new(0.0, 2.0, 20, |x| (3.0 * x).sin() * 5.0).unwrap();
        let op = build_tridiagonal(&p).unwrap();
        let dense = dense_eigenvalues(&op.matrix);
        for (k, e) in dense.iter().enumerate() {
            assert!((op.matrix.eigenvalue(k).unwrap() - e).abs() < 1e-9 * (1.0 + e.abs()));
        }
    }

    #[test]
    fn constant_potential_shifts_spectrum() {
        let op0 = build_tridiagonal(&free(64)).unwrap();
        let op1 = build_tridiagonal(&SturmLiouvilleProblem::new(0.0, 1.0, 64, |_| 3.5).unwrap()).unwrap();
        for k in 0..5 {
            let d = op1.matrix.eigenvalue(k).unwrap() - op0.matrix.eigenvalue(k).unwrap();
            assert!((d - 3.5).abs() < 1e-11 * op0.matrix.norm());
        }
    }

    #[test]
    fn half_order_bessel_potential_vanishes() {
        let nu: f64 = 0.5;
        let p = SturmLiouvilleProblem::new(0.0, 1.0, 32, move |x| (nu * nu - 0.25) / (x * x)).unwrap();
        assert_eq!(build_tridiagonal(&p).unwrap(), build_tridiagonal(&free(32)).unwrap());
    }

    #[test]
    fn sine_spectrum_limit() {
        let op = build_tridiagonal(&free(2000)).unwrap();
        let pairs = lowest_eigenpairs(&op, 3).unwrap();
        assert!((pairs[0].energy / (PI * PI) - 1.0).abs() < 1e-5);
        let between = 0.5 * (pairs[0].energy + pairs[1].energy);
        assert_eq!(op.matrix.sturm_count(between), 1);
        assert!(inner(&pairs[0], &pairs[1]).abs() < 1e-8);
        for p in &pairs {
            let r: f64 = op.matrix.apply(&p.u).iter().zip(&p.u).map(|(a, b)| (a - p.energy * b).powi(2)).sum::<f64>().sqrt();
            assert!(r * op.h.sqrt() <= 1e-10 * op.matrix.norm());
            assert!((expectation(p, |_| 1.0).unwrap() - 1.0).abs() < 1e-12);
            assert_eq!(p.sign_changes(), p.k - 1);
        }
        assert!(pairs[0].u[0] > 0.0);
        assert!((expectation(&pairs[0], |x| x).unwrap() - 0.5).abs() < 1e-6);
    }

    #[test]
    fn richardson_recovers_quadratic_model() {
        let (limit, c) = (2.0, 0.7);
        let h: f64 = 0.1;
        assert!((richardson(limit + c * h * h, limit + c * h * h / 4.0) - limit).abs() < 1e-14);
    }

    #[test]
    fn richardson_on_sine_spectrum() {
        let p = free(1000);
        let e1 = lowest_eigenpairs(&build_tridiagonal(&p).unwrap(), 1).unwrap()[0].energy;
        let e2 = lowest_eigenpairs(&build_tridiagonal(&p.refined()).unwrap(), 1).unwrap()[0].energy;
        let ext = richardson(e1, e2);
        let limit = PI * PI;
        assert!((ext / limit - 1.0).abs() < 1e-8);
        assert!((ext - limit).abs() < (e2 - limit).abs());
    }

    #[test]
    fn second_order_convergence() {
        let p = SturmLiouvilleProblem::new(0.0, 1.0, 50, |x| 10.0 * x * x).unwrap();
        let e: Vec<f64> = [p.clone(), p.refined(), p.refined().refined()]
            .iter()
            .map(|q| lowest_eigenpairs(&build_tridiagonal(q).unwrap(), 2).unwrap()[1].energy)
            .collect();
        let ratio = (e[0] - e[1]) / (e[1] - e[2]);
        assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn rejects_bad_input() {
        assert!(SturmLiouvilleProblem::new(1.0, 0.0, 32, |_| 0.0).is_err());
        assert!(SturmLiouvilleProblem::new(0.0, 1.0, 8, |_| 0.0).is_err());
        let p = SturmLiouvilleProblem::new(0.0, 1.0, 32, |x| if x > 0.5 { f64::NAN } else { 0.0 }).unwrap();
        assert!(build_tridiagonal(&p).is_err());
        let op = build_tridiagonal(&free(32)).unwrap();
        assert!(lowest_eigenpairs(&op, 33).is_err());
        assert!(expectation(&lowest_eigenpairs(&op, 1).unwrap()[0], |x| 1.0 / (x - op.nodes[3])).is_err());
    }
}
