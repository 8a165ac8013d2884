//! Statistical characterization of indefinite non-central complex Gaussian
//! quadratic forms.
//!
//! A quadratic form `Q = v† A v` of a complex Gaussian vector `v` with
//! non-zero mean has no known closed-form density. This crate builds an
//! auxiliary form whose mean is randomly perturbed by Gamma-distributed
//! fluctuations with shape parameter `m`; the auxiliary form converges in
//! distribution to `Q` as `m` grows, and its MGF is a rational function, so
//! its PDF and CDF are finite mixtures of exponential-polynomial terms.
//!
//! Pipeline:
//!
//! 1. [`reduction`] diagonalizes `(v̄, L, A)` into eigenvalues `λᵢ` and
//!    non-centralities `μᵢ`.
//! 2. [`confluent`] forms the rational MGF of the auxiliary variable for a
//!    shape `m` (chosen automatically from a closed-form mean-square error).
//! 3. [`residues`] expands it in partial fractions over exact rational
//!    arithmetic, by both a combinatorial closed form and a linear-cost
//!    recursion.
//! 4. [`distribution`] evaluates the resulting PDF/CDF/moments in
//!    extended-precision floats.
//! 5. [`mrc`] applies the machinery to outage probability and Gray-coded
//!    M-QAM bit error rate of maximal-ratio-combining receivers over
//!    correlated Rician fading.
//! 6. [`montecarlo`] provides the independent stochastic oracle used for
//!    validation throughout.

pub mod confluent;
pub mod distribution;
pub mod error;
pub mod montecarlo;
pub mod mrc;
pub mod real;
pub mod reduction;
pub mod residues;
pub mod specfun;

#[cfg(test)]
pub(crate) mod testutil;

pub use confluent::PoleZeroSystem;
pub use distribution::ClosedFormDistribution;
pub use error::{Error, Result};
pub use montecarlo::SimConfig;
pub use mrc::{MrcAnalysis, MrcScenario, QamWeights};
pub use real::{Real, DEFAULT_PRECISION_BITS};
pub use reduction::{QuadraticForm, SpectralForm};
pub use residues::{RationalPoleZeroSystem, ResidueTable};
