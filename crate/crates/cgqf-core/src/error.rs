//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by the quadratic-form analysis pipeline.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A matrix required to be Hermitian positive definite has a
    /// non-positive Cholesky pivot (possibly rank deficient).
    #[error("matrix is not positive definite (pivot {pivot:.3e} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    /// An iterative method failed to reach its tolerance.
    #[error("{what} did not converge after {iterations} iterations")]
    NoConvergence { what: &'static str, iterations: usize },

    /// Input matrix fails a structural precondition (Hermitian symmetry,
    /// squareness, dimension match, singular `A`, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// MGF evaluated too close to one of its poles.
    #[error("MGF evaluation point within {distance:.3e} of pole at {pole:.6e}")]
    PoleHit { pole: f64, distance: f64 },

    /// Simplification cancelled every pole; cannot happen for a valid
    /// system and indicates a bug in the caller.
    #[error("pole/zero simplification left no poles")]
    DegenerateSystem,

    /// The combinatorial closed form would enumerate too many terms.
    #[error("closed-form residue enumeration infeasible: total multiplicity {total} exceeds {limit}")]
    TooLarge { total: u32, limit: u32 },

    /// Rationalization mapped two distinct values onto the same rational.
    #[error("rationalization collided values {a:.12e} and {b:.12e}; increase max_denominator")]
    CollisionAfterRationalize { a: f64, b: f64 },

    /// Accumulated cancellation exceeded the precision budget.
    #[error("precision loss: cancellation of {cancelled_bits} bits exceeds budget of {budget_bits} bits; raise precision_bits")]
    PrecisionLoss { cancelled_bits: i64, budget_bits: i64 },

    /// `select_m` could not reach the requested normalized MSE.
    #[error("normalized MSE target {target:.3e} unreachable: {achieved:.3e} at m_max {m_max}")]
    TargetUnreachable { target: f64, achieved: f64, m_max: u32 },

    /// Unsupported QAM constellation order.
    #[error("unsupported QAM order {0}: must be one of 4, 16, 64, 256")]
    UnsupportedM(u32),

    /// Negative Rician K factor, or K = 0 under the paper-literal covariance.
    #[error("invalid Rician K factor at branch {index}: {reason}")]
    InvalidK { index: usize, reason: String },

    /// Argument outside the function domain.
    #[error("domain error in {function}: {message}")]
    DomainError { function: &'static str, message: String },
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
