use super::{Matrix, C64};
use crate::error::{Result, SpecError};

const PADE_ORDER: usize = 6;

/// Matrix exponential by scaling and squaring with a diagonal (6,6) Padé
/// approximant.
pub fn expm(x: &Matrix) -> Result<Matrix> {
    let n = x.dim();
    let norm = (0..n)
        .map(|i| (0..n).map(|j| x[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let s = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let xs = x.scale_real(0.5f64.powi(s));

    let mut c = vec![1.0f64; PADE_ORDER + 1];
    for k in 1..=PADE_ORDER {
        let q = PADE_ORDER as f64;
        let kf = k as f64;
        c[k] = c[k - 1] * (q - kf + 1.0) / (kf * (2.0 * q - kf + 1.0));
    }
    let mut num = Matrix::identity(n);
    let mut den = Matrix::identity(n);
    let mut p = Matrix::identity(n);
    for (k, &ck) in c.iter().enumerate().skip(1) {
        p = &p * &xs;
        let term = p.scale_real(ck);
        num = &num + &term;
        den = if k % 2 == 0 { &den + &term } else { &den - &term };
    }
    let mut r = solve(&den, &num)?;
    for _ in 0..s {
        r = &r * &r;
    }
    Ok(r)
}

/// `e^{iGt}` for Hermitian `G`, with one Newton–Schulz polar step
/// `U (3I - U*U) / 2` to restore unitarity.
pub fn unitary_exp(g: &Matrix, t: f64) -> Result<Matrix> {
    let u = expm(&g.scale(C64::new(0.0, t)))?;
    let n = g.dim();
    let corr = &Matrix::identity(n).scale_real(3.0) - &(&u.adjoint() * &u);
    Ok((&u * &corr).scale_real(0.5))
}

/// Solves `A X = B` by LU with partial pivoting.
pub fn solve(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    let n = a.dim();
    if b.dim() != n {
        return Err(SpecError::DimensionMismatch { expected: n, got: b.dim() });
    }
    let mut lu = a.clone();
    let mut x = b.clone();
    for k in 0..n {
        let piv = (k..n).max_by(|&i, &j| lu[(i, k)].norm().total_cmp(&lu[(j, k)].norm())).unwrap();
        if lu[(piv, k)].norm() == 0.0 {
            return Err(SpecError::InvalidArgument("singular matrix in solve".into()));
        }
        if piv != k {
            for j in 0..n {
                let t = lu[(k, j)];
                lu[(k, j)] = lu[(piv, j)];
                lu[(piv, j)] = t;
                let t = x[(k, j)];
                x[(k, j)] = x[(piv, j)];
                x[(piv, j)] = t;
            }
        }
        let inv = C64::new(1.0, 0.0) / lu[(k, k)];
        for i in k + 1..n {
            let f = lu[(i, k)] * inv;
            if f == C64::new(0.0, 0.0) {
                continue;
            }
            for j in k..n {
                let v = lu[(k, j)];
                lu[(i, j)] -= f * v;
            }
            for j in 0..n {
                let v = x[(k, j)];
                x[(i, j)] -= f * v;
            }
        }
    }
    for k in (0..n).rev() {
        let inv = C64::new(1.0, 0.0) / lu[(k, k)];
        for j in 0..n {
            let mut s = x[(k, j)];
            for i in k + 1..n {
                s -= lu[(k, i)] * x[(i, j)];
            }
            x[(k, j)] = s * inv;
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::eigendecompose;
    use crate::random::{random_hermitian, rng};

    #[test]
    fn exp_of_diagonal() {
        let d = Matrix::diag(&[0.0, 2f64.ln(), -1.0]);
        let e = expm(&d).unwrap();
        assert!((e[(1, 1)].re - 2.0).abs() < 1e-14);
        assert!((e[(2, 2)].re - (-1f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn unitary_exp_matches_spectral() {
        let mut r = rng(2, 0);
        for n in [2usize, 6, 12] {
            let g = random_hermitian(&mut r, n);
            let t = 1.7;
            let u = unitary_exp(g.matrix(), t).unwrap();
            let d = eigendecompose(&g).unwrap();
            let mut exact = Matrix::zeros(n);
            for k in 0..n {
                let ph = C64::new(0.0, t * d.eigenvalues[k]).exp();
                let v = d.vector(k);
                for i in 0..n {
                    for j in 0..n {
                        exact[(i, j)] += v[i] * ph * v[j].conj();
                    }
                }
            }
            assert!((&u - &exact).max_abs() < 1e-12, "n={n}: {}", (&u - &exact).max_abs());
            let defect = (&(&u.adjoint() * &u) - &Matrix::identity(n)).max_abs();
            assert!(defect < 1e-14);
        }
    }

    #[test]
    fn solve_recovers_identity() {
        let mut r = rng(9, 0);
        let a = random_hermitian(&mut r, 5).into_matrix();
        let x = solve(&a, &a).unwrap();
        assert!((&x - &Matrix::identity(5)).max_abs() < 1e-12);
    }
}
