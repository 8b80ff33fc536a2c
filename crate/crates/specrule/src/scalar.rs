//! Scalar weight functions `F` with derivatives and, where available, inverses.

use std::fmt;
use std::sync::Arc;

use crate::error::{Result, SpecError};
use crate::quad::chebyshev_points;
use crate::traceineq::lambert_w_neg_branch;

pub type Fun = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Number of sample points used by hypothesis spot checks.
pub const SPOT_POINTS: usize = 50;

/// A real function together with derivatives `F, F', F'', ...` and an
/// optional inverse `F⁻¹, (F⁻¹)', (F⁻¹)''`.
#[derive(Clone)]
pub struct ScalarFunction {
    name: String,
    derivs: Vec<Fun>,
    inverse: Vec<Fun>,
    /// Open domain `(lo, hi)`; endpoints are included when finite and `closed_hi`.
    pub domain: (f64, f64),
    closed_hi: bool,
    poly_degree: Option<usize>,
}

impl fmt::Debug for ScalarFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarFunction")
            .field("name", &self.name)
            .field("orders", &self.derivs.len())
            .field("domain", &self.domain)
            .finish()
    }
}

fn arc(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Fun {
    Arc::new(f)
}

impl ScalarFunction {
    /// Builds from explicit derivative closures `[F, F', F'', ...]`.
    pub fn custom(name: &str, derivs: Vec<Fun>, domain: (f64, f64)) -> Self {
        ScalarFunction { name: name.into(), derivs, inverse: Vec::new(), domain, closed_hi: false, poly_degree: None }
    }

    pub fn with_inverse(mut self, inverse: Vec<Fun>) -> Self {
        self.inverse = inverse;
        self
    }

    pub fn exp() -> Self {
        let d: Vec<Fun> = (0..6).map(|_| arc(f64::exp)).collect();
        Self::custom("exp", d, (f64::NEG_INFINITY, f64::INFINITY)).with_inverse(vec![
            arc(f64::ln),
            arc(|y| 1.0 / y),
            arc(|y| -1.0 / (y * y)),
        ])
    }

    /// `ln λ` on `(0, ∞)`.
    pub fn ln() -> Self {
        let d = vec![
            arc(f64::ln),
            arc(|x| 1.0 / x),
            arc(|x| -1.0 / (x * x)),
            arc(|x| 2.0 / x.powi(3)),
            arc(|x| -6.0 / x.powi(4)),
            arc(|x| 24.0 / x.powi(5)),
        ];
        Self::custom("ln", d, (0.0, f64::INFINITY)).with_inverse(vec![arc(f64::exp), arc(f64::exp), arc(f64::exp)])
    }

    /// `-ln λ` on `(0, ∞)`.
    pub fn neg_ln() -> Self {
        Self::ln().scaled(-1.0, "-ln")
    }

    /// `λ^p` on `(0, ∞)`.
    pub fn power(p: f64) -> Self {
        let d: Vec<Fun> = (0..6)
            .map(|k| {
                let mut c = 1.0;
                for i in 0..k {
                    c *= p - i as f64;
                }
                let e = p - k as f64;
                arc(move |x: f64| c * x.powf(e))
            })
            .collect();
        let q = 1.0 / p;
        Self::custom(&format!("pow({p})"), d, (0.0, f64::INFINITY)).with_inverse(vec![
            arc(move |y: f64| y.powf(q)),
            arc(move |y: f64| q * y.powf(q - 1.0)),
            arc(move |y: f64| q * (q - 1.0) * y.powf(q - 2.0)),
        ])
    }

    /// `Σ c_i λ^i` with all derivatives.
    pub fn polynomial(coeffs: &[f64]) -> Self {
        let deg = coeffs.iter().rposition(|&c| c != 0.0).unwrap_or(0);
        let mut derivs = Vec::new();
        let mut c = coeffs.to_vec();
        for _ in 0..6 {
            let cc = c.clone();
            derivs.push(arc(move |x| cc.iter().rev().fold(0.0, |acc, &a| acc * x + a)));
            c = c.iter().enumerate().skip(1).map(|(i, &a)| a * i as f64).collect();
            if c.is_empty() {
                c.push(0.0);
            }
        }
        let mut f = Self::custom("polynomial", derivs, (f64::NEG_INFINITY, f64::INFINITY));
        f.poly_degree = Some(deg);
        f
    }

    /// `(z - λ)²`.
    pub fn shifted_square(z: f64) -> Self {
        let mut f = Self::polynomial(&[z * z, -2.0 * z, 1.0]);
        f.name = format!("(z-x)^2, z={z}");
        f
    }

    /// `-(λ - s)²`, concave with constant `F''`.
    pub fn neg_shifted_square(s: f64) -> Self {
        let mut f = Self::polynomial(&[-s * s, 2.0 * s, -1.0]);
        f.name = format!("-(x-s)^2, s={s}");
        f
    }

    /// `F(λ) = -λ ln λ + λ` on `(0, 1]`, whose trace gives `1 + S` for a density matrix.
    pub fn entropy_weight() -> Self {
        let d = vec![
            arc(|x: f64| -x * x.ln() + x),
            arc(|x: f64| -x.ln()),
            arc(|x: f64| -1.0 / x),
            arc(|x: f64| 1.0 / (x * x)),
            arc(|x: f64| -2.0 / x.powi(3)),
        ];
        let inv = |y: f64| (1.0 + lambert_w_neg_branch(-y / std::f64::consts::E).unwrap_or(f64::NAN)).exp();
        let mut f = Self::custom("-x ln x + x", d, (0.0, 1.0)).with_inverse(vec![
            arc(inv),
            arc(move |y| 1.0 / -inv(y).ln()),
            arc(move |y| {
                let x = inv(y);
                1.0 / (x * (-x.ln()).powi(3))
            }),
        ]);
        f.closed_hi = true;
        f
    }

    /// `s · F`, same domain; the inverse is kept only for `s = ±1`.
    pub fn scaled(&self, s: f64, name: &str) -> Self {
        let derivs = self
            .derivs
            .iter()
            .map(|g| {
                let g = g.clone();
                arc(move |x| s * g(x))
            })
            .collect();
        let inverse = if s == -1.0 {
            self.inverse
                .iter()
                .enumerate()
                .map(|(k, g)| {
                    let g = g.clone();
                    let sign = if k % 2 == 1 { -1.0 } else { 1.0 };
                    arc(move |y| sign * g(-y))
                })
                .collect()
        } else if s == 1.0 {
            self.inverse.clone()
        } else {
            Vec::new()
        };
        ScalarFunction {
            name: name.into(),
            derivs,
            inverse,
            domain: self.domain,
            closed_hi: self.closed_hi,
            poly_degree: self.poly_degree,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Highest available derivative order.
    pub fn max_order(&self) -> usize {
        self.derivs.len().saturating_sub(1)
    }

    /// Degree when `F` is a polynomial.
    pub fn polynomial_degree(&self) -> Option<usize> {
        self.poly_degree
    }

    pub fn has_inverse(&self) -> bool {
        self.inverse.len() >= 3
    }

    pub fn in_domain(&self, x: f64) -> bool {
        x > self.domain.0 && (x < self.domain.1 || (self.closed_hi && x == self.domain.1))
    }

    pub fn value(&self, x: f64) -> f64 {
        (self.derivs[0])(x)
    }

    /// `F^{(k)}(x)`.
    pub fn derivative(&self, k: usize, x: f64) -> Result<f64> {
        let g = self
            .derivs
            .get(k)
            .ok_or_else(|| SpecError::Evaluator(format!("{}: derivative of order {k} unavailable", self.name)))?;
        Ok(g(x))
    }

    /// `(F⁻¹)^{(k)}(y)` for `k ≤ 2`.
    pub fn inverse_derivative(&self, k: usize, y: f64) -> Result<f64> {
        let g = self
            .inverse
            .get(k)
            .ok_or_else(|| SpecError::Evaluator(format!("{}: inverse derivative {k} unavailable", self.name)))?;
        let v = g(y);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(SpecError::Evaluator(format!("{}: inverse not finite at {y}", self.name)))
        }
    }

    pub fn inverse(&self, y: f64) -> Result<f64> {
        self.inverse_derivative(0, y)
    }

    /// `A(y) = -(F⁻¹)'(y) / (F⁻¹)''(y)`.
    pub fn mean_transform(&self, y: f64) -> Result<f64> {
        Ok(-self.inverse_derivative(1, y)? / self.inverse_derivative(2, y)?)
    }

    /// Checks that every eigenvalue lies in the domain.
    pub fn check_domain(&self, values: &[f64]) -> Result<()> {
        match values.iter().find(|&&x| !self.in_domain(x)) {
            Some(x) => Err(SpecError::Domain(format!("{x} outside the domain of {}", self.name))),
            None => Ok(()),
        }
    }

    /// Spot check that `F^{(k)} ≥ 0` (`positive`) or `≤ 0` on `[a, b]`.
    pub fn derivative_sign_holds(&self, k: usize, positive: bool, a: f64, b: f64) -> Result<bool> {
        let pts = spot_points(a, b);
        let vals: Vec<f64> = pts.iter().map(|&x| self.derivative(k, x)).collect::<Result<_>>()?;
        let scale = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let slack = 1e-12 * (1.0 + scale);
        Ok(vals.iter().all(|&v| if positive { v >= -slack } else { v <= slack }))
    }

    /// Spot check that `F^{(k)}` is convex (`convex`) or concave on `[a, b]`.
    pub fn derivative_convexity_holds(&self, k: usize, convex: bool, a: f64, b: f64) -> Result<bool> {
        if k + 2 <= self.max_order() {
            return self.derivative_sign_holds(k + 2, convex, a, b);
        }
        let g = |x: f64| self.derivative(k, x).unwrap_or(f64::NAN);
        Ok(spot_convexity(&g, a, b, convex))
    }
}

/// Chebyshev-spaced sample points on `[a, b]`, collapsing to one when `a = b`.
pub fn spot_points(a: f64, b: f64) -> Vec<f64> {
    if a == b {
        vec![a]
    } else {
        chebyshev_points(a, b, SPOT_POINTS)
    }
}

/// Divided second differences of `g` at Chebyshev points have the sign of
/// convexity (`convex`) or concavity.
pub fn spot_convexity(g: &dyn Fn(f64) -> f64, a: f64, b: f64, convex: bool) -> bool {
    let x = spot_points(a, b);
    if x.len() < 3 {
        return true;
    }
    let y: Vec<f64> = x.iter().map(|&t| g(t)).collect();
    if y.iter().any(|v| !v.is_finite()) {
        return false;
    }
    let scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let w = b - a;
    x.windows(3).zip(y.windows(3)).all(|(xs, ys)| {
        let d1 = (ys[1] - ys[0]) / (xs[1] - xs[0]);
        let d2 = (ys[2] - ys[1]) / (xs[2] - xs[1]);
        let dd = (d2 - d1) / (xs[2] - xs[0]);
        let slack = 1e-9 * (1.0 + scale) / (w * w);
        if convex {
            dd >= -slack
        } else {
            dd <= slack
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd(f: &ScalarFunction, k: usize, x: f64) -> f64 {
        let h = 1e-5 * (1.0 + x.abs());
        (f.derivative(k, x + h).unwrap() - f.derivative(k, x - h).unwrap()) / (2.0 * h)
    }

    #[test]
    fn derivative_chains_are_consistent() {
        let cases = [
            (ScalarFunction::exp(), 0.3),
            (ScalarFunction::ln(), 0.7),
            (ScalarFunction::power(2.5), 1.3),
            (ScalarFunction::entropy_weight(), 0.4),
            (ScalarFunction::polynomial(&[1.0, -2.0, 0.5, 3.0, 0.0, 1.0]), 0.9),
        ];
        for (f, x) in cases {
            for k in 0..f.max_order() {
                let a = f.derivative(k + 1, x).unwrap();
                assert!((a - fd(&f, k, x)).abs() < 1e-6 * (1.0 + a.abs()), "{} order {k}", f.name());
            }
        }
    }

    #[test]
    fn inverses_round_trip() {
        for (f, x) in [
            (ScalarFunction::exp(), 0.4),
            (ScalarFunction::ln(), 2.0),
            (ScalarFunction::power(3.0), 1.7),
            (ScalarFunction::entropy_weight(), 0.25),
            (ScalarFunction::neg_ln(), 0.6),
        ] {
            let y = f.value(x);
            assert!((f.inverse(y).unwrap() - x).abs() < 1e-12, "{}", f.name());
            let d1 = f.inverse_derivative(1, y).unwrap();
            assert!((d1 * f.derivative(1, x).unwrap() - 1.0).abs() < 1e-10, "{}", f.name());
        }
    }

    #[test]
    fn inverse_second_derivative_by_fd() {
        for (f, y) in [(ScalarFunction::entropy_weight(), 0.6), (ScalarFunction::power(2.0), 3.0)] {
            let h = 1e-5;
            let fdv = (f.inverse_derivative(1, y + h).unwrap() - f.inverse_derivative(1, y - h).unwrap()) / (2.0 * h);
            let an = f.inverse_derivative(2, y).unwrap();
            assert!((fdv - an).abs() < 1e-6 * (1.0 + an.abs()));
        }
    }

    #[test]
    fn mean_transform_of_exp_is_identity() {
        let f = ScalarFunction::exp();
        for y in [0.5, 1.0, 4.0] {
            assert!((f.mean_transform(y).unwrap() - y).abs() < 1e-12);
        }
        let g = ScalarFunction::ln();
        assert!((g.mean_transform(0.3).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn spot_checks() {
        let f = ScalarFunction::exp();
        assert!(f.derivative_sign_holds(2, true, -1.0, 1.0).unwrap());
        assert!(f.derivative_convexity_holds(0, true, -1.0, 1.0).unwrap());
        let g = ScalarFunction::ln();
        assert!(!g.derivative_convexity_holds(0, true, 0.5, 2.0).unwrap());
        assert!(spot_convexity(&|x| x * x, -1.0, 1.0, true));
        assert!(!spot_convexity(&|x| x.sin(), 0.0, 3.0, true));
    }

    #[test]
    fn polynomial_degree_recorded() {
        assert_eq!(ScalarFunction::polynomial(&[0.0, 1.0, 0.0, 2.0, 0.0]).polynomial_degree(), Some(3));
        assert_eq!(ScalarFunction::shifted_square(1.0).derivative(3, 0.2).unwrap(), 0.0);
    }

    #[test]
    fn domain_checks() {
        let f = ScalarFunction::entropy_weight();
        assert!(f.check_domain(&[0.5, 1.0]).is_ok());
        assert!(f.check_domain(&[0.0]).is_err());
        assert!(ScalarFunction::ln().check_domain(&[-1.0]).is_err());
    }
}
