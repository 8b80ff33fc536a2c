//! Tolerance policy shared by all checks.
//!
//! Every tolerance is `base * (1 + magnitude) * scale()`, where the global
//! scale defaults to 1 and can be raised for hardware with looser floating
//! point guarantees.

use std::sync::atomic::{AtomicU64, Ordering};

/// Identities that hold in exact arithmetic.
pub const EXACT_IDENTITY: f64 = 1e-9;
/// Inequalities that hold in exact arithmetic.
pub const EXACT_INEQUALITY: f64 = 1e-8;
/// Statements that depend on finite-difference derivatives.
pub const FINITE_DIFFERENCE: f64 = 1e-5;
/// Statements about discretized Bessel spectra.
pub const BESSEL: f64 = 1e-4;

static SCALE_BITS: AtomicU64 = AtomicU64::new(0x3FF0_0000_0000_0000);

pub fn scale() -> f64 {
    f64::from_bits(SCALE_BITS.load(Ordering::Relaxed))
}

pub fn set_scale(s: f64) {
    assert!(s.is_finite() && s > 0.0, "tolerance scale must be positive");
    SCALE_BITS.store(s.to_bits(), Ordering::Relaxed);
}

/// Reads `SPECRULE_TOL_SCALE` and installs it; returns the active scale.
pub fn init_from_env() -> Result<f64, String> {
    match std::env::var("SPECRULE_TOL_SCALE") {
        Ok(v) => {
            let s: f64 = v
                .trim()
                .parse()
                .map_err(|_| format!("SPECRULE_TOL_SCALE is not a number: {v:?}"))?;
            if !(s.is_finite() && s > 0.0) {
                return Err(format!("SPECRULE_TOL_SCALE must be positive, got {s}"));
            }
            set_scale(s);
            Ok(s)
        }
        Err(_) => Ok(scale()),
    }
}

pub fn tol(base: f64, magnitude: f64) -> f64 {
    base * (1.0 + magnitude.abs()) * scale()
}

pub fn absolute(base: f64) -> f64 {
    base * scale()
}
