//! Damping-basis toolkit for commutative open-quantum-system dynamics.
//!
//! A commutative dynamics Λ_t admits a time-independent bi-orthogonal pair of
//! operator bases {τ_α}, {ς_α} that simultaneously diagonalizes the dynamical
//! map, its time-local (TCL) generator, its Nakajima–Zwanzig (NZ) memory
//! kernel and the coarse-grained Redfield-like generator. All four objects
//! then differ only in scalar eigenvalue functions of time, so switching
//! between the descriptions reduces to transforms of scalar signals.
//!
//! Module layout:
//! - [`qops`] — operators, orthonormal operator bases, superoperator matrix
//!   representations, dual maps, damping-basis diagonalization.
//! - [`scalarflow`] — the scalar eigenvalue-function transforms (TCL ↔ map ↔
//!   NZ ↔ Redfield), Volterra solvers, Talbot inverse Laplace.
//! - [`lindblad`] — canonical (GKSL) form extraction and reconstruction.
//! - [`dynamics`] — propagation of the map under each description, Choi
//!   matrices, CPTP checks.
//! - [`divisibility`] — CP-/P-divisibility analysis and the simplex region
//!   scanner for random-direction dephasing.
//! - [`models`] — the built-in model zoo with closed-form reference data.
//! - [`cli`] — configuration and file emission behind the `dampflow` binary.

pub mod cli;
pub mod divisibility;
pub mod dynamics;
pub mod lindblad;
pub mod models;
pub mod qops;
pub mod scalarflow;
pub mod tol;

use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error(
        "superoperator is not diagonalizable: eigenvector matrix condition \
         number {cond:.3e} exceeds {limit:.1e} (Jordan-form dynamics are out of scope)"
    )]
    NotDiagonalizable { cond: f64, limit: f64 },

    #[error(
        "map eigenvalue |m(t)| = {value:.3e} at t = {t:.6} is at or below the \
         singular floor {floor:.1e}; the time-local generator does not exist there"
    )]
    SingularMap { t: f64, value: f64, floor: f64 },

    #[error("Talbot contour overflow at t = {t:.6}; rescale the contour or shorten the horizon")]
    ContourFailure { t: f64 },

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("unknown model: {0}")]
    UnknownModel(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
