//! Independent oracle for Bessel zeros `j_{ν,k}`: bisection on the ascending
//! series of `J_ν`, bracketed by McMahon's asymptotic expansion.
//!
//! The series is evaluated for `Γ(ν+1)(x/2)^{-ν} J_ν(x)`, which has the same
//! positive zeros and avoids the Gamma function.

#![allow(dead_code)]

use std::f64::consts::PI;

/// `Σ_m (-x²/4)^m / (m! (ν+1)_m)`.
pub fn reduced_bessel_j(nu: f64, x: f64) -> f64 {
    let q = -0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut m = 0.0;
    loop {
        m += 1.0;
        term *= q / (m * (m + nu));
        sum += term;
        if m > 10.0 && term.abs() < 1e-17 * sum.abs().max(1e-300) {
            break;
        }
        if m > 500.0 {
            break;
        }
    }
    sum
}

/// McMahon's estimate of `j_{ν,k}`.
pub fn mcmahon(nu: f64, k: usize) -> f64 {
    let mu = 4.0 * nu * nu;
    let beta = (k as f64 + 0.5 * nu - 0.25) * PI;
    let e = 8.0 * beta;
    beta - (mu - 1.0) / e - 4.0 * (mu - 1.0) * (7.0 * mu - 31.0) / (3.0 * e.powi(3))
}

fn bisect(nu: f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut flo = reduced_bessel_j(nu, lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = reduced_bessel_j(nu, mid);
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// The `k`-th positive zero of `J_ν` (k ≥ 1).
///
/// Sign changes are located on a fine scan from `x = 0`, and the McMahon
/// estimate selects the bracket whose zero is the `k`-th.
pub fn bessel_zero(nu: f64, k: usize) -> f64 {
    let guess = mcmahon(nu, k);
    let step = 0.01;
    let mut x = step;
    let mut f = reduced_bessel_j(nu, x);
    let mut found = 0;
    loop {
        let xn = x + step;
        let fnx = reduced_bessel_j(nu, xn);
        if (fnx < 0.0) != (f < 0.0) {
            found += 1;
            if found == k {
                let z = bisect(nu, x, xn);
                assert!((z - guess).abs() < 1.0, "scan and McMahon disagree for nu={nu}, k={k}");
                return z;
            }
        }
        x = xn;
        f = fnx;
        assert!(x < guess + 5.0, "zero not found for nu={nu}, k={k}");
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_zeros() {
        assert!((bessel_zero(0.0, 1).powi(2) - 5.7831859629).abs() < 1e-9);
        assert!((bessel_zero(1.0, 1).powi(2) - 14.681970642).abs() < 1e-8);
        assert!((bessel_zero(0.5, 3) - 3.0 * PI).abs() < 1e-10);
    }
}
