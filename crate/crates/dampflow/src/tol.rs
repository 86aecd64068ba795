//! Central tolerance constants.
//!
//! Every threshold that decides a pass/fail or an error path lives here, so
//! the numbers are auditable in one place rather than scattered as magic
//! literals.

/// Hilbert–Schmidt orthonormality of operator bases, Tr[σ_α†σ_β] = δ_αβ.
pub const BASIS_ORTHONORMALITY: f64 = 1e-12;

/// Bi-orthogonality Tr[ς_α†τ_β] = δ_αβ and completeness of a damping pair.
pub const BIORTHOGONALITY: f64 = 1e-10;

/// Relative Frobenius residual for damping-basis reconstruction.
pub const DAMPING_RECONSTRUCTION: f64 = 1e-9;

/// Matrix representation must reproduce the action to this accuracy.
pub const SUPEROP_ACTION: f64 = 1e-12;

/// Condition-number limit on the right-eigenvector matrix; beyond this the
/// superoperator is treated as defective (Jordan case, rejected).
pub const DIAGONALIZABILITY_COND: f64 = 1e8;

/// Relative gap below which two eigenvalues are grouped as degenerate.
pub const DEGENERACY_GROUPING: f64 = 1e-8;

/// Trace- and Hermiticity-preservation conditions on a generator.
pub const GENERATOR_CONDITIONS: f64 = 1e-10;

/// Hermiticity of the GKS coefficient matrix and of extracted Hamiltonians.
pub const HERMITICITY: f64 = 1e-10;

/// Below this a canonical rate counts as zero rather than negative.
pub const RATE_SIGN: f64 = 1e-10;

/// Default rate-sign tolerance for divisibility verdicts.
pub const DIVISIBILITY_RATE: f64 = 1e-9;

/// A map eigenvalue at or below this magnitude is treated as a zero of the
/// map; the TCL generator only exists for invertible maps.
pub const SINGULAR_FLOOR: f64 = 1e-12;

/// Trace preservation of propagated maps.
pub const TRACE_PRESERVATION: f64 = 1e-8;

/// Real-axis evaluation point for the initial-value theorem u·f̃(u) → f(0).
/// This is an approximation; the relative error is O(1/u).
pub const IVT_POINT: f64 = 1e8;
