//! Numerical tolerances and block sizes, collected in one place.

/// Symmetry check: max|A - A^T|.
pub const TOL_SYMMETRY: f64 = 1e-8;

/// Projector idempotency check: max|P^2 - P|.
pub const TOL_IDEMPOTENCY: f64 = 1e-8;

/// Projector trace vs asserted rank.
pub const TOL_TRACE: f64 = 1e-6;

/// Orthonormality of eigenvector / basis columns: max|V^T V - I|.
pub const TOL_ORTHONORMAL: f64 = 1e-8;

/// Eigendecomposition reconstruction, relative to max(1, ||A||_F).
pub const TOL_RECONSTRUCTION: f64 = 1e-8;

/// Default relative tolerance for pivoted Gram-Schmidt rank decisions.
pub const GRAM_SCHMIDT_TOL: f64 = 1e-10;

/// Variance denominators at or below this are treated as undefined and masked.
pub const VARIANCE_GUARD: f64 = 1e-12;

/// Positive semi-definiteness slack for covariance inputs.
pub const TOL_PSD: f64 = 1e-10;

/// Eigenvalue-gap warning threshold, relative to the top eigenvalue.
pub const EIGENGAP_WARN: f64 = 1e-6;

/// SNP block size for streaming reductions. Partial sums combine in
/// block-index order so results are bit-identical for any thread count.
pub const SNP_BLOCK: usize = 8192;

/// Correlation entries must lie in [-1, 1] within this slack.
pub const TOL_CORR_RANGE: f64 = 1e-9;
