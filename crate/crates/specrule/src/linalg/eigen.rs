use super::{HermitianMatrix, Matrix, SpectralDecomposition, C64};
use crate::error::{Result, SpecError};

/// Largest dimension handled by cyclic Jacobi; larger matrices go through
/// Householder tridiagonalization and implicit QL.
pub const JACOBI_MAX_DIM: usize = 64;

const MAX_SWEEPS: usize = 100;
const MAX_QL_ITER: usize = 60;

/// Ascending eigenvalues and orthonormal eigenvectors of a Hermitian matrix.
///
/// Each eigenvector is rotated so its entry of largest modulus is real and
/// positive.
pub fn eigendecompose(h: &HermitianMatrix) -> Result<SpectralDecomposition> {
    let (vals, vecs) = if h.dim() <= JACOBI_MAX_DIM {
        jacobi_eigen(h.matrix())?
    } else {
        tridiagonal_ql_eigen(h.matrix())?
    };
    Ok(finish(vals, vecs))
}

fn finish(vals: Vec<f64>, vecs: Matrix) -> SpectralDecomposition {
    let n = vals.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]).then(a.cmp(&b)));
    let eigenvalues: Vec<f64> = order.iter().map(|&k| vals[k]).collect();
    let mut vectors = Matrix::zeros(n);
    for (j, &k) in order.iter().enumerate() {
        let mut col = vecs.column(k);
        fix_phase(&mut col);
        vectors.set_column(j, &col);
    }
    let degeneracy_tol = SpectralDecomposition::degeneracy_tol_for(&eigenvalues);
    SpectralDecomposition { eigenvalues, vectors, degeneracy_tol, labels: (0..n).collect() }
}

/// Makes the entry of largest modulus real positive (first index on ties).
pub(crate) fn fix_phase(col: &mut [C64]) {
    let max = col.iter().fold(0.0f64, |m, x| m.max(x.norm()));
    if max == 0.0 {
        return;
    }
    let pivot = col.iter().position(|x| x.norm() >= max * (1.0 - 1e-12)).unwrap_or(0);
    let ph = col[pivot].conj() / col[pivot].norm();
    for x in col.iter_mut() {
        *x *= ph;
    }
    col[pivot] = C64::new(col[pivot].norm(), 0.0);
}

/// Cyclic complex Jacobi rotations. Returns unsorted eigenpairs.
pub fn jacobi_eigen(m: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    let n = m.dim();
    let mut a = m.clone();
    let mut v = Matrix::identity(n);
    let total = a.frobenius();
    if n == 1 || total == 0.0 {
        return Ok(((0..n).map(|i| a[(i, i)].re).collect(), v));
    }
    for _sweep in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)].norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * total {
            return Ok(((0..n).map(|i| a[(i, i)].re).collect(), v));
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = a[(p, q)];
                let b = apq.norm();
                if b <= 1e-300 {
                    continue;
                }
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                if b <= f64::EPSILON * 1e-3 * (app.abs() + aqq.abs()) {
                    a[(p, q)] = C64::new(0.0, 0.0);
                    a[(q, p)] = C64::new(0.0, 0.0);
                    continue;
                }
                // Phase D = diag(1, e^{-iφ}) makes the pivot real, then a real rotation.
                let ph = apq / b;
                let theta = (aqq - app) / (2.0 * b);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let jpp = C64::new(c, 0.0);
                let jpq = C64::new(s, 0.0);
                let jqp = ph.conj() * (-s);
                let jqq = ph.conj() * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * jpp + akq * jqp;
                    a[(k, q)] = akp * jpq + akq * jqq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = jpp.conj() * apk + jqp.conj() * aqk;
                    a[(q, k)] = jpq.conj() * apk + jqq.conj() * aqk;
                }
                a[(p, q)] = C64::new(0.0, 0.0);
                a[(q, p)] = C64::new(0.0, 0.0);
                a[(p, p)] = C64::new(a[(p, p)].re, 0.0);
                a[(q, q)] = C64::new(a[(q, q)].re, 0.0);
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * jpp + vkq * jqp;
                    v[(k, q)] = vkp * jpq + vkq * jqq;
                }
            }
        }
    }
    Err(SpecError::NonConvergence { iterations: MAX_SWEEPS })
}

/// Householder reduction to a complex tridiagonal, diagonal phase scaling to a
/// real symmetric tridiagonal, then implicit QL. Returns unsorted eigenpairs.
pub fn tridiagonal_ql_eigen(m: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    let n = m.dim();
    let mut a = m.clone();
    let mut q = Matrix::identity(n);
    for k in 0..n.saturating_sub(2) {
        let xnorm: f64 = (k + 1..n).map(|i| a[(i, k)].norm_sqr()).sum::<f64>().sqrt();
        if xnorm == 0.0 {
            continue;
        }
        let x0 = a[(k + 1, k)];
        let ph = if x0.norm() > 0.0 { x0 / x0.norm() } else { C64::new(1.0, 0.0) };
        let alpha = -ph * xnorm;
        let mut v = vec![C64::new(0.0, 0.0); n];
        for i in k + 1..n {
            v[i] = a[(i, k)];
        }
        v[k + 1] -= alpha;
        let vn: f64 = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if vn == 0.0 {
            continue;
        }
        for x in v.iter_mut() {
            *x /= vn;
        }
        // A <- (I - 2vv*) A (I - 2vv*)
        let w = a.matvec(&v);
        let kk: C64 = super::dot(&v, &w);
        for i in 0..n {
            for j in 0..n {
                let upd = v[i] * w[j].conj() * 2.0 + w[i] * v[j].conj() * 2.0
                    - v[i] * v[j].conj() * kk * 4.0;
                a[(i, j)] -= upd;
            }
        }
        // Q <- Q (I - 2vv*)
        let qv = q.matvec(&v);
        for i in 0..n {
            for j in 0..n {
                q[(i, j)] -= qv[i] * v[j].conj() * 2.0;
            }
        }
    }
    let mut d: Vec<f64> = (0..n).map(|i| a[(i, i)].re).collect();
    let mut e = vec![0.0; n];
    let mut phase = vec![C64::new(1.0, 0.0); n];
    for i in 0..n.saturating_sub(1) {
        let ei = a[(i + 1, i)];
        e[i] = ei.norm();
        let p = if e[i] > 0.0 { ei / e[i] } else { C64::new(1.0, 0.0) };
        phase[i + 1] = phase[i] * p;
    }
    let mut z = vec![0.0; n * n];
    for i in 0..n {
        z[i * n + i] = 1.0;
    }
    tqli(&mut d, &mut e, &mut z, n)?;
    // U = Q D Z
    let mut u = Matrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            let mut s = C64::new(0.0, 0.0);
            for k in 0..n {
                s += q[(i, k)] * phase[k] * z[k * n + j];
            }
            u[(i, j)] = s;
        }
    }
    Ok((d, u))
}

/// Implicit QL on a real symmetric tridiagonal (`e[i]` couples `i`, `i+1`),
/// accumulating rotations into the row-major `z`.
pub(crate) fn tqli(d: &mut [f64], e: &mut [f64], z: &mut [f64], n: usize) -> Result<()> {
    if n == 0 {
        return Ok(());
    }
    e[n - 1] = 0.0;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > MAX_QL_ITER {
                return Err(SpecError::NonConvergence { iterations: iter });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut underflow = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for k in 0..n {
                    let fz = z[k * n + i + 1];
                    z[k * n + i + 1] = s * z[k * n + i] + c * fz;
                    z[k * n + i] = c * z[k * n + i] - s * fz;
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_hermitian, random_unitary, rng};

    fn check_invariants(h: &HermitianMatrix, d: &SpectralDecomposition) {
        assert!(d.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
        assert!(d.orthonormality_defect() <= 1e-10, "{}", d.orthonormality_defect());
        let rec = (&d.reconstruct() - h.matrix()).max_abs();
        assert!(rec <= 1e-9 * (1.0 + h.max_abs()), "reconstruction {rec}");
    }

    #[test]
    fn diagonal_input() {
        let h = HermitianMatrix::diag(&[1.0, 2.0, 3.0]);
        let d = eigendecompose(&h).unwrap();
        assert_eq!(d.eigenvalues, vec![1.0, 2.0, 3.0]);
        assert!((&d.vectors - &Matrix::identity(3)).max_abs() == 0.0);
    }

    #[test]
    fn two_by_two_off_diagonal() {
        let h = HermitianMatrix::from_real_rows(&[vec![0.0, 0.5], vec![0.5, 0.0]]).unwrap();
        let d = eigendecompose(&h).unwrap();
        assert!((d.eigenvalues[0] + 0.5).abs() < 1e-15);
        assert!((d.eigenvalues[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn construct_then_recover() {
        let mut r = rng(7, 0);
        for n in [4usize, 9, 70] {
            let u = random_unitary(&mut r, n);
            let mut lam = vec![-1.0, 0.0, 2.0, 5.0];
            lam.extend((4..n).map(|k| 5.0 + k as f64));
            let h = HermitianMatrix::new(&(&u * &Matrix::diag(&lam)) * &u.adjoint()).unwrap();
            let d = eigendecompose(&h).unwrap();
            for (a, b) in d.eigenvalues.iter().zip(&lam) {
                assert!((a - b).abs() <= 1e-10 * (1.0 + b.abs()), "n={n}: {a} vs {b}");
            }
            check_invariants(&h, &d);
        }
    }

    #[test]
    fn ql_path_matches_jacobi() {
        let mut r = rng(11, 0);
        for n in [1usize, 2, 3, 8, 20] {
            let h = random_hermitian(&mut r, n);
            let (mut a, _) = jacobi_eigen(h.matrix()).unwrap();
            let (b, u) = tridiagonal_ql_eigen(h.matrix()).unwrap();
            let d = finish(b, u);
            a.sort_by(f64::total_cmp);
            for (x, y) in a.iter().zip(&d.eigenvalues) {
                assert!((x - y).abs() < 1e-11 * (1.0 + x.abs()));
            }
            check_invariants(&h, &d);
        }
    }

    #[test]
    fn large_dimension_uses_ql() {
        let mut r = rng(3, 1);
        let h = random_hermitian(&mut r, 80);
        let d = eigendecompose(&h).unwrap();
        check_invariants(&h, &d);
        let tr = h.trace().re;
        let s: f64 = d.eigenvalues.iter().sum();
        assert!((tr - s).abs() <= 1e-9 * (1.0 + tr.abs()));
    }

    #[test]
    fn phase_convention() {
        let mut r = rng(5, 2);
        let d = eigendecompose(&random_hermitian(&mut r, 6)).unwrap();
        for j in 0..6 {
            let col = d.vector(j);
            let (k, x) = col
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
                .unwrap();
            assert!(x.im == 0.0 && x.re > 0.0, "column {j} pivot {k}: {x}");
        }
    }
}
