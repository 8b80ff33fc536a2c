//! Numerical verification of eigenvalue sum rules, Feynman–Hellmann identities,
//! trace inequalities and spectral monotonicity statements.
//!
//! Every check evaluates both sides of an identity or inequality and returns a
//! [`CheckReport`] with the residual (identities) or margin (inequalities).
//! Finite Hermitian matrices are handled by [`linalg`] and [`family`]; the
//! one-dimensional Sturm–Liouville problems behind the Bessel-zero and
//! Lieb–Thirring results live in [`sturm`], [`bessel`] and [`liebthirring`].

pub mod bessel;
pub mod error;
pub mod family;
pub mod liebthirring;
pub mod linalg;
pub mod quad;
pub mod random;
pub mod report;
pub mod riesz;
pub mod scalar;
pub mod scenario;
pub mod sturm;
pub mod sumrules;
pub mod tol;
pub mod traceineq;

pub use error::{Result, SpecError};
pub use family::{FamilyEval, FamilyKind, OperatorFamily};
pub use linalg::{
    align_eigenvectors, commutator, double_commutator, eigendecompose, Eigensystem, GapStructure,
    HermitianMatrix, Matrix, SpectralDecomposition, C64,
};
pub use report::{CheckKind, CheckReport, PathReport};
pub use scalar::ScalarFunction;
