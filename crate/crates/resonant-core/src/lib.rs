//! Numerical toolkit for semilinear equations `L u + N(u) = h` at resonance,
//! where `0` sits on the right boundary of a spectral gap of the self-adjoint
//! linear part `L` and `N` is a monotone, cocoercive nonlinearity.
//!
//! The constructive route implemented here:
//!
//! 1. [`operator`] — eigendecomposition of `L`, the split `H = H₋ ⊕ H₊`,
//!    gap parameters `δ`, `γ`, projections and the inverse of the negative part.
//! 2. [`nonlinearity`] — superposition (Nemytskii) operators built from scalar
//!    profiles, cocoercivity estimation and the radial recession diagnostic.
//! 3. [`checker`] — numerical validation of every solvability hypothesis for a
//!    concrete `(L, N, h)` triple, with three-valued outcomes.
//! 4. [`solver`] — the ε-perturbed equation `εP₊u + Lu + N(u) = h`, solved by
//!    damped Newton with a preconditioned Picard fallback, plus a uniqueness
//!    probe.
//! 5. [`continuation`] — the ε → 0 schedule with warm starts, a-priori bound
//!    monitors and extraction of the resonant solution.
//! 6. [`schrodinger`] — finite-difference discretizations of `-Δ + V - σ₀` on
//!    1D/2D Dirichlet boxes, gap alignment, and the full solve pipeline.

pub mod checker;
pub mod continuation;
mod dd;
pub mod io;
pub mod nonlinearity;
pub mod operator;
pub mod schrodinger;
pub mod solver;

pub use checker::{check_all, CheckStatus, HypothesisReport};
pub use continuation::{solve_resonant, ContinuationStatus, ContinuationTrace, EpsSchedule};
pub use nonlinearity::{NonlinearMap, ProfileConfig, ScalarProfile};
pub use operator::{decompose, SelfAdjointOperator, SpectralSplit, Subspace};
pub use schrodinger::{GridSpec, Potential, RhsSpec, SchrodingerProblem};
pub use solver::{solve_perturbed, PerturbedSolveResult, SolveOptions};

use thiserror::Error;

/// Errors surfaced by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix is not symmetric: max |A_ij - A_ji| = {max_asym:e} exceeds tolerance {tol:e}")]
    NotSymmetric { max_asym: f64, tol: f64 },
    #[error("eigensolver failed to converge (residual {residual:e})")]
    EigenFailure { residual: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("scalar profile violates its contract: {0}")]
    ProfileViolation(String),
    #[error("monotone contract violated: {0}")]
    MonotoneViolation(String),
    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("malformed file {path}: {reason}")]
    Parse { path: String, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;

/// Weighted inner product `Σ w_i x_i y_i` (the discrete stand-in for the L²
/// pairing on a uniform grid).
pub fn dot_w(w: &nalgebra::DVector<f64>, x: &nalgebra::DVector<f64>, y: &nalgebra::DVector<f64>) -> f64 {
    debug_assert_eq!(w.len(), x.len());
    debug_assert_eq!(w.len(), y.len());
    let mut s = 0.0;
    for i in 0..w.len() {
        s += w[i] * x[i] * y[i];
    }
    s
}

/// Weighted norm induced by [`dot_w`].
pub fn norm_w(w: &nalgebra::DVector<f64>, x: &nalgebra::DVector<f64>) -> f64 {
    dot_w(w, x, x).max(0.0).sqrt()
}
