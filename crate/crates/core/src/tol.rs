//! Numerical tolerances shared across modules.

/// Normalization tolerance on unit-norm states.
pub const TOL_NORM: f64 = 1e-10;
/// Unitarity and determinant tolerance for coins.
pub const TOL_UNITARY: f64 = 1e-10;
/// Amplitudes below this modulus are treated as zero when trimming.
pub const TOL_ZERO: f64 = 1e-12;
/// Default absolute tolerance for reachability residuals on unit-norm states.
pub const TOL_REACH: f64 = 1e-9;
