//! Invariances of the checked statements under random inputs.


use proptest::prelude::*;
use specrule::linalg::{Eigensystem, HermitianMatrix, Matrix, C64};
use specrule::random::{random_complex, random_hermitian, random_positive_definite, random_unitary, rng};
use specrule::scalar::ScalarFunction;
use specrule::sturm::{build_tridiagonal, SturmLiouvilleProblem};
use specrule::sumrules::{hs_quadratic_sum_rule, trk_sum_rule};
use specrule::traceineq::trace_of_function;

fn conj(u: &Matrix, h: &HermitianMatrix) -> HermitianMatrix {
    HermitianMatrix::symmetrize(&(u * h.matrix()) * &u.adjoint())
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Both TRK sides are quadratic in the probe: `G → cG` scales them by `|c|²`.
    #[test]
    fn trk_sides_scale_with_probe_modulus(seed in 0u64..10_000, n in 2usize..9, re in -3.0f64..3.0, im in -3.0f64..3.0) {
        let mut r = rng(seed, 0);
        let sys = Eigensystem::new(random_hermitian(&mut r, n)).unwrap();
        let g = random_complex(&mut r, n);
        let c = C64::new(re, im);
        let cg = g.scale(c);
        for j in 0..n {
            let a = trk_sum_rule(&sys, &g, j).unwrap();
            let b = trk_sum_rule(&sys, &cg, j).unwrap();
            prop_assert!(a.pass && b.pass);
            prop_assert!(close(b.lhs, c.norm_sqr() * a.lhs, 1e-9));
            prop_assert!(close(b.rhs, c.norm_sqr() * a.rhs, 1e-9));
        }
    }

    /// `H → H + cI` with `z → z + c` leaves both quadratic sum rule sides unchanged.
    #[test]
    fn quadratic_rule_is_shift_invariant(seed in 0u64..10_000, n in 2usize..9, c in -5.0f64..5.0, z in -3.0f64..3.0, m in 1usize..9) {
        let mut r = rng(seed, 1);
        let h = random_hermitian(&mut r, n);
        let g = random_complex(&mut r, n);
        let shifted = HermitianMatrix::symmetrize(h.matrix() + &Matrix::identity(n).scale_real(c));
        let subset: Vec<usize> = (0..m.min(n)).collect();
        let a = hs_quadratic_sum_rule(&Eigensystem::new(h).unwrap(), &g, &subset, z).unwrap();
        let b = hs_quadratic_sum_rule(&Eigensystem::new(shifted).unwrap(), &g, &subset, z + c).unwrap();
        prop_assert!(a.pass && b.pass);
        prop_assert!(close(a.lhs, b.lhs, 1e-8) && close(a.rhs, b.rhs, 1e-8), "{a:?} {b:?}");
    }

    /// `τ ↦ Tr e^{(1-τ)A+τB}` is unchanged when `A` and `B` are conjugated by one unitary.
    #[test]
    fn exp_trace_path_is_unitarily_invariant(seed in 0u64..10_000, n in 2usize..8, tau in 0.0f64..1.0) {
        let mut r = rng(seed, 2);
        let (a, b) = (random_hermitian(&mut r, n), random_hermitian(&mut r, n));
        let u = random_unitary(&mut r, n);
        let mix = |a: &HermitianMatrix, b: &HermitianMatrix| {
            HermitianMatrix::symmetrize(&a.matrix().scale_real(1.0 - tau) + &b.matrix().scale_real(tau))
        };
        let exp = ScalarFunction::exp();
        let x = trace_of_function(&mix(&a, &b), &exp).unwrap();
        let y = trace_of_function(&mix(&conj(&u, &a), &conj(&u, &b)), &exp).unwrap();
        prop_assert!(close(x, y, 1e-10), "{x} {y}");
    }

    /// `det(cA)^{1/n} = c det(A)^{1/n}` through `-Tr ln`.
    #[test]
    fn root_determinant_is_homogeneous(seed in 0u64..10_000, n in 1usize..8, c in 0.1f64..10.0) {
        let mut r = rng(seed, 3);
        let a = random_positive_definite(&mut r, n, 0.2);
        let ca = HermitianMatrix::symmetrize(a.matrix().scale_real(c));
        let ln = ScalarFunction::ln();
        let root = |m: &HermitianMatrix| (trace_of_function(m, &ln).unwrap() / n as f64).exp();
        prop_assert!(close(root(&ca), c * root(&a), 1e-11));
    }

    /// A constant added to the potential shifts every discrete level by that constant.
    #[test]
    fn sturm_levels_shift_with_potential(c in -50.0f64..50.0, depth in 0.0f64..40.0, n in 20usize..200) {
        let base = SturmLiouvilleProblem::new(0.0, 1.0, n, move |x: f64| -depth * (std::f64::consts::PI * x).sin()).unwrap();
        let moved = SturmLiouvilleProblem::new(0.0, 1.0, n, move |x: f64| -depth * (std::f64::consts::PI * x).sin() + c).unwrap();
        let (a, b) = (build_tridiagonal(&base).unwrap(), build_tridiagonal(&moved).unwrap());
        for k in 0..5 {
            let (ea, eb) = (a.matrix.eigenvalue(k).unwrap(), b.matrix.eigenvalue(k).unwrap());
            prop_assert!((eb - ea - c).abs() <= 1e-9 * (1.0 + ea.abs()), "k={k} {ea} {eb}");
        }
    }
}
