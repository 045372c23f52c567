//! Hybrid multi-agent opinion networks.
//!
//! Agents hold opinions in `[0, 1]` and update synchronously over a weighted
//! directed network. Three agent kinds coexist in one model: averagers take
//! the weighted mean of their in-neighborhood, copiers adopt the opinion of a
//! randomly drawn in-neighbor, and voters flip a coin whose bias is the
//! weighted neighborhood mean. The crate provides
//!
//! * validated row-stochastic network matrices and generators ([`graph`]),
//! * the stochastic process itself plus Monte Carlo estimators ([`model`]),
//! * an exact recursion for first and second moments ([`moments`]),
//! * eigenvalue analysis of the convergence rate ([`spectral`]).
//!
//! Everything is generic over the floating point type through [`Scalar`];
//! the aliases at the crate root fix `f64`, which is what the binary and the
//! test batteries use.

pub mod graph;
pub mod model;
pub mod moments;
pub mod scalar;
pub mod spectral;

#[cfg(test)]
pub(crate) mod testutil;

pub use scalar::Scalar;

/// Row-stochastic network matrix over `f64`.
pub type NetworkMatrix = graph::NetworkMatrix<f64>;
/// Network diagnostics over `f64`.
pub type GraphDiagnostics = graph::GraphDiagnostics;
/// Model over `f64`.
pub type Hman = model::Hman<f64>;
/// Opinion state over `f64`.
pub type OpinionVector = model::OpinionVector<f64>;
/// Sampled path over `f64`.
pub type Trajectory = model::Trajectory<f64>;
/// Monte Carlo deviation estimates over `f64`.
pub type MsdEstimates = model::MsdEstimates<f64>;
/// Extended moment recursion over `f64`.
pub type ExtendedRecursion = moments::ExtendedRecursion<f64>;
/// Expected extended opinion vector over `f64`.
pub type ExpectedEov = moments::ExpectedEov<f64>;
/// Spectral summary over `f64`.
pub type SpectralReport = spectral::SpectralReport<f64>;
