//! Seeded random matrix generators.
//!
//! All generators draw from a `ChaCha8Rng` so that a `(seed, stream)` pair
//! reproduces the same matrices on every platform.
//!
//! * Gaussian Hermitian ensemble: `H = (X + X*)/2` where `X` has independent
//!   standard complex Gaussian entries `(a + ib)/sqrt(2)`.
//! * Wishart-style positive definite: `W = X X*/n + shift * I`.
//! * Density matrices: `W / Tr W`.

use crate::linalg::{dot, HermitianMatrix, Matrix, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type SpecRng = ChaCha8Rng;

/// Generator for `(seed, stream)`; independent streams never overlap.
pub fn rng(seed: u64, stream: u64) -> SpecRng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

fn gauss(r: &mut SpecRng) -> f64 {
    r.sample(StandardNormal)
}

fn complex_gauss(r: &mut SpecRng) -> C64 {
    C64::new(gauss(r), gauss(r)) * std::f64::consts::FRAC_1_SQRT_2
}

/// Matrix with independent standard complex Gaussian entries.
pub fn random_complex(r: &mut SpecRng, n: usize) -> Matrix {
    Matrix::from_fn(n, |_, _| complex_gauss(r))
}

pub fn random_hermitian(r: &mut SpecRng, n: usize) -> HermitianMatrix {
    HermitianMatrix::symmetrize(random_complex(r, n))
}

pub fn random_real_symmetric(r: &mut SpecRng, n: usize) -> HermitianMatrix {
    let x = Matrix::from_fn(n, |_, _| C64::new(gauss(r), 0.0));
    HermitianMatrix::symmetrize(x)
}

/// Hermitian matrix whose sorted eigenvalues are at least `min_gap` apart.
pub fn gapped_hermitian(r: &mut SpecRng, n: usize, min_gap: f64) -> HermitianMatrix {
    loop {
        let h = random_hermitian(r, n);
        let d = crate::linalg::eigendecompose(&h).expect("eigensolver failed on random input");
        if d.eigenvalues.windows(2).all(|w| w[1] - w[0] >= min_gap) {
            return h;
        }
    }
}

/// Haar-like unitary by Gram–Schmidt on a complex Gaussian matrix.
pub fn random_unitary(r: &mut SpecRng, n: usize) -> Matrix {
    let x = random_complex(r, n);
    let mut cols: Vec<Vec<C64>> = Vec::with_capacity(n);
    for j in 0..n {
        let mut v = x.column(j);
        for _ in 0..2 {
            for c in &cols {
                let p = dot(c, &v);
                for (vi, ci) in v.iter_mut().zip(c) {
                    *vi -= p * ci;
                }
            }
        }
        let nv = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for vi in v.iter_mut() {
            *vi /= nv;
        }
        cols.push(v);
    }
    let mut u = Matrix::zeros(n);
    for (j, c) in cols.iter().enumerate() {
        u.set_column(j, c);
    }
    u
}

/// `X X*/n + shift I`, positive definite for `shift > 0`.
pub fn random_positive_definite(r: &mut SpecRng, n: usize, shift: f64) -> HermitianMatrix {
    let x = random_complex(r, n);
    let w = (&x * &x.adjoint()).scale_real(1.0 / n as f64);
    HermitianMatrix::symmetrize(&w + &Matrix::identity(n).scale_real(shift))
}

/// Full-rank density matrix: positive definite with unit trace.
pub fn random_density(r: &mut SpecRng, n: usize) -> HermitianMatrix {
    let w = random_positive_definite(r, n, 0.05);
    let t = w.trace().re;
    HermitianMatrix::symmetrize(w.into_matrix().scale_real(1.0 / t))
}
