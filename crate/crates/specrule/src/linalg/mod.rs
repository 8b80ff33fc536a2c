//! Dense complex linear algebra for Hermitian operators.

mod align;
mod eigen;
mod expm;

pub use align::{align_eigenvectors, Alignment};
pub use eigen::{eigendecompose, jacobi_eigen, tridiagonal_ql_eigen, JACOBI_MAX_DIM};
pub use expm::{expm, solve, unitary_exp};

use crate::error::{Result, SpecError};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::ops::{Add, Index, IndexMut, Mul, Sub};

pub type C64 = Complex64;

/// Square complex matrix stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    n: usize,
    data: Vec<C64>,
}

impl Matrix {
    pub fn zeros(n: usize) -> Self {
        Matrix { n, data: vec![C64::new(0.0, 0.0); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Matrix { n, data }
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(SpecError::InvalidArgument("empty matrix".into()));
        }
        let mut data = Vec::with_capacity(n * n);
        for r in rows {
            if r.len() != n {
                return Err(SpecError::DimensionMismatch { expected: n, got: r.len() });
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix { n, data })
    }

    pub fn from_real_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let rows: Vec<Vec<C64>> =
            rows.iter().map(|r| r.iter().map(|&x| C64::new(x, 0.0)).collect()).collect();
        Self::from_rows(&rows)
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = C64::new(v, 0.0);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<C64>> {
        self.data.chunks(self.n).map(|r| r.to_vec()).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.n, |i, j| self[(j, i)].conj())
    }

    pub fn scale(&self, s: C64) -> Self {
        Matrix { n: self.n, data: self.data.iter().map(|&x| x * s).collect() }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        Matrix { n: self.n, data: self.data.iter().map(|&x| x * s).collect() }
    }

    pub fn trace(&self) -> C64 {
        (0..self.n).map(|i| self[(i, i)]).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.norm()))
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.n).map(|i| self[(i, j)]).collect()
    }

    pub fn set_column(&mut self, j: usize, v: &[C64]) {
        for i in 0..self.n {
            self[(i, j)] = v[i];
        }
    }

    pub fn matvec(&self, v: &[C64]) -> Vec<C64> {
        self.data
            .chunks(self.n)
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        check_dims(self, other)?;
        Ok(self.mul_unchecked(other))
    }

    fn mul_unchecked(&self, other: &Matrix) -> Matrix {
        let n = self.n;
        let mut out = Matrix::zeros(n);
        for i in 0..n {
            let row = &self.data[i * n..(i + 1) * n];
            let orow = &mut out.data[i * n..(i + 1) * n];
            for (k, &a) in row.iter().enumerate() {
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                let brow = &other.data[k * n..(k + 1) * n];
                for (o, &b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// Largest deviation from Hermitian symmetry, `max |a_ij - conj(a_ji)|`.
    pub fn hermitian_defect(&self) -> f64 {
        let mut d: f64 = 0.0;
        for i in 0..self.n {
            for j in i..self.n {
                d = d.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        d
    }

    pub fn anti_hermitian_defect(&self) -> f64 {
        let mut d: f64 = 0.0;
        for i in 0..self.n {
            for j in i..self.n {
                d = d.max((self[(i, j)] + self[(j, i)].conj()).norm());
            }
        }
        d
    }

    /// `<u, M v>` with the inner product conjugate-linear in `u`.
    pub fn sandwich(&self, u: &[C64], v: &[C64]) -> C64 {
        dot(u, &self.matvec(v))
    }
}

fn check_dims(a: &Matrix, b: &Matrix) -> Result<()> {
    if a.n != b.n {
        Err(SpecError::DimensionMismatch { expected: a.n, got: b.n })
    } else {
        Ok(())
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.n + j]
    }
}

impl Add for &Matrix {
    type Output = Matrix;
    fn add(self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.n, rhs.n, "dimension mismatch");
        Matrix { n: self.n, data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect() }
    }
}

impl Sub for &Matrix {
    type Output = Matrix;
    fn sub(self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.n, rhs.n, "dimension mismatch");
        Matrix { n: self.n, data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect() }
    }
}

impl Mul for &Matrix {
    type Output = Matrix;
    fn mul(self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.n, rhs.n, "dimension mismatch");
        self.mul_unchecked(rhs)
    }
}

/// Conjugate-linear in the first argument: `sum conj(u_i) v_i`.
pub fn dot(u: &[C64], v: &[C64]) -> C64 {
    u.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
}

pub fn norm_sqr(v: &[C64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum()
}

/// `AB - BA`.
pub fn commutator(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    check_dims(a, b)?;
    Ok(&(a * b) - &(b * a))
}

/// `[G, [H, G]]`; Hermitian whenever `G` and `H` are.
pub fn double_commutator(g: &Matrix, h: &Matrix) -> Result<Matrix> {
    let inner = commutator(h, g)?;
    commutator(g, &inner)
}

/// Dense matrix with Hermitian symmetry enforced at construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HermitianMatrix(Matrix);

impl HermitianMatrix {
    /// Relative asymmetry accepted before symmetrization.
    pub const ACCEPT: f64 = 1e-8;

    /// Rejects inputs whose asymmetry exceeds `ACCEPT * (1 + max|a_ij|)`,
    /// otherwise replaces `M` by `(M + M*)/2`.
    pub fn new(m: Matrix) -> Result<Self> {
        if m.dim() == 0 {
            return Err(SpecError::InvalidArgument("dimension must be at least 1".into()));
        }
        let defect = m.hermitian_defect();
        if !(defect <= Self::ACCEPT * (1.0 + m.max_abs())) {
            return Err(SpecError::NotHermitian { asymmetry: defect });
        }
        if m.data.iter().any(|x| !x.re.is_finite() || !x.im.is_finite()) {
            return Err(SpecError::InvalidArgument("non-finite matrix entry".into()));
        }
        Ok(Self::symmetrize(m))
    }

    pub fn symmetrize(m: Matrix) -> Self {
        let n = m.dim();
        let sym = Matrix::from_fn(n, |i, j| {
            if i == j {
                C64::new(m[(i, i)].re, 0.0)
            } else {
                (m[(i, j)] + m[(j, i)].conj()) * 0.5
            }
        });
        HermitianMatrix(sym)
    }

    pub fn diag(values: &[f64]) -> Self {
        HermitianMatrix(Matrix::diag(values))
    }

    pub fn from_real_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(Matrix::from_real_rows(rows)?)
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    /// `U f(Λ) U*` for a function applied on the spectrum.
    pub fn apply_fn(&self, f: impl Fn(f64) -> f64) -> Result<Matrix> {
        Ok(eigendecompose(self)?.function_of(f))
    }
}

impl std::ops::Deref for HermitianMatrix {
    type Target = Matrix;
    fn deref(&self) -> &Matrix {
        &self.0
    }
}

/// Ascending eigenvalues with unitary eigenvector matrix (columns).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    pub vectors: Matrix,
    pub degeneracy_tol: f64,
    /// Rank of each column in increasing-eigenvalue order. Identity unless
    /// the columns were permuted by [`align_eigenvectors`].
    pub labels: Vec<usize>,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn vector(&self, j: usize) -> Vec<C64> {
        self.vectors.column(j)
    }

    pub fn degeneracy_tol_for(eigenvalues: &[f64]) -> f64 {
        let m = eigenvalues.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        1e-9 * (1.0 + m)
    }

    /// True if `λ_j` and `λ_k` are equal under the degeneracy test.
    pub fn coincide(&self, j: usize, k: usize) -> bool {
        (self.eigenvalues[j] - self.eigenvalues[k]).abs() <= self.degeneracy_tol
    }

    pub fn is_simple(&self, j: usize) -> bool {
        (0..self.dim()).all(|k| k == j || !self.coincide(j, k))
    }

    pub fn all_simple(&self) -> bool {
        (0..self.dim()).all(|j| self.is_simple(j))
    }

    /// Matrix elements `M_kj = <u_k, A u_j>`.
    pub fn in_eigenbasis(&self, a: &Matrix) -> Matrix {
        let u = &self.vectors;
        &(&u.adjoint() * a) * u
    }

    pub fn expectation(&self, a: &Matrix, j: usize) -> f64 {
        let u = self.vector(j);
        a.sandwich(&u, &u).re
    }

    pub fn reconstruct(&self) -> Matrix {
        let lam = Matrix::diag(&self.eigenvalues);
        &(&self.vectors * &lam) * &self.vectors.adjoint()
    }

    /// `U f(Λ) U*`.
    pub fn function_of(&self, f: impl Fn(f64) -> f64) -> Matrix {
        let vals: Vec<f64> = self.eigenvalues.iter().map(|&x| f(x)).collect();
        let fl = Matrix::diag(&vals);
        &(&self.vectors * &fl) * &self.vectors.adjoint()
    }

    pub fn orthonormality_defect(&self) -> f64 {
        let g = &self.vectors.adjoint() * &self.vectors;
        (&g - &Matrix::identity(self.dim())).max_abs()
    }

    /// Eigenvalues in increasing order regardless of column permutation.
    pub fn sorted_eigenvalues(&self) -> Vec<f64> {
        let mut v = self.eigenvalues.clone();
        v.sort_by(f64::total_cmp);
        v
    }
}

/// An index set `J` of the spectrum and its gap to the complement.
#[derive(Debug, Clone, PartialEq)]
pub struct GapStructure {
    pub subset_j: Vec<usize>,
    pub gap_d: f64,
}

impl GapStructure {
    /// `d = inf J^c - sup J`; infinite when `J` or its complement is empty.
    pub fn new(decomp: &SpectralDecomposition, subset_j: &[usize]) -> Result<Self> {
        let n = decomp.dim();
        let mut inj = vec![false; n];
        for &j in subset_j {
            if j >= n {
                return Err(SpecError::InvalidArgument(format!("index {j} outside spectrum of size {n}")));
            }
            inj[j] = true;
        }
        let sup_j = (0..n).filter(|&k| inj[k]).map(|k| decomp.eigenvalues[k]).fold(f64::NEG_INFINITY, f64::max);
        let inf_c = (0..n).filter(|&k| !inj[k]).map(|k| decomp.eigenvalues[k]).fold(f64::INFINITY, f64::min);
        let gap_d = if sup_j.is_finite() && inf_c.is_finite() { inf_c - sup_j } else { f64::INFINITY };
        Ok(GapStructure { subset_j: subset_j.to_vec(), gap_d })
    }

    pub fn prefix(decomp: &SpectralDecomposition, m: usize) -> Result<Self> {
        Self::new(decomp, &(0..m).collect::<Vec<_>>())
    }
}

/// A Hermitian operator together with its spectral decomposition.
#[derive(Debug, Clone)]
pub struct Eigensystem {
    pub h: HermitianMatrix,
    pub decomp: SpectralDecomposition,
}

impl Eigensystem {
    pub fn new(h: HermitianMatrix) -> Result<Self> {
        let decomp = eigendecompose(&h)?;
        Ok(Eigensystem { h, decomp })
    }

    pub fn dim(&self) -> usize {
        self.h.dim()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pauli() -> (Matrix, Matrix, Matrix) {
        let z = C64::new(0.0, 0.0);
        let one = C64::new(1.0, 0.0);
        let i = C64::new(0.0, 1.0);
        let sx = Matrix::from_rows(&[vec![z, one], vec![one, z]]).unwrap();
        let sy = Matrix::from_rows(&[vec![z, -i], vec![i, z]]).unwrap();
        let sz = Matrix::from_rows(&[vec![one, z], vec![z, -one]]).unwrap();
        (sx, sy, sz)
    }

    #[test]
    fn pauli_commutator() {
        let (sx, sy, sz) = pauli();
        let c = commutator(&sx, &sy).unwrap();
        let expect = sz.scale(C64::new(0.0, 2.0));
        assert!((&c - &expect).max_abs() < 1e-15);
    }

    #[test]
    fn self_commutator_vanishes() {
        let (sx, _, _) = pauli();
        assert_eq!(commutator(&sx, &sx).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn double_commutator_sigma_x_sigma_z() {
        let (sx, _, sz) = pauli();
        let d = double_commutator(&sx, &sz).unwrap();
        // [σx,[σz,σx]] = 2i[σx,σy] = −4σz
        assert!((&d + &sz.scale_real(4.0)).max_abs() < 1e-15);
    }

    #[test]
    fn diagonal_double_commutator_is_zero() {
        let g = Matrix::diag(&[1.0, -2.0, 0.5]);
        let h = Matrix::diag(&[3.0, 1.0, 7.0]);
        assert_eq!(double_commutator(&g, &h).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let a = Matrix::identity(2);
        let b = Matrix::identity(3);
        assert!(matches!(commutator(&a, &b), Err(SpecError::DimensionMismatch { .. })));
    }

    #[test]
    fn hermitian_rejects_asymmetric_input() {
        let m = Matrix::from_real_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        assert!(matches!(HermitianMatrix::new(m), Err(SpecError::NotHermitian { .. })));
    }

    #[test]
    fn hermitian_symmetrizes_rounding_noise() {
        let m = Matrix::from_real_rows(&[vec![1.0, 2.0 + 1e-14], vec![2.0, 3.0]]).unwrap();
        let h = HermitianMatrix::new(m).unwrap();
        assert_eq!(h.hermitian_defect(), 0.0);
    }

    #[test]
    fn gap_structure_prefix() {
        let d = eigendecompose(&HermitianMatrix::diag(&[0.0, 1.0, 3.0])).unwrap();
        let g = GapStructure::prefix(&d, 2).unwrap();
        assert!((g.gap_d - 2.0).abs() < 1e-15);
        assert!(GapStructure::prefix(&d, 3).unwrap().gap_d.is_infinite());
    }
}
