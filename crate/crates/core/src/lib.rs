//! Estimation of the source node and initial change-point of a mean change
//! that spreads across a graph over time.
//!
//! The pipeline is:
//!
//! 1. [`cusum::cusum_transform`] turns a `p x n` data matrix into per-node
//!    CUSUM statistics.
//! 2. [`detect`] aggregates those statistics along graph-distance lags for
//!    every candidate `(source, time)` pair and takes the argmax.
//! 3. [`detect::run_test`] turns the same aggregate into a test for the
//!    existence of any change.
//!
//! [`simulate`] generates data under deterministic and stochastic spreading
//! and runs Monte Carlo benchmarks; [`preprocess`] turns weekly count series
//! into standardized residual rows.
//!
//! Node labels and time indices are 1-based at the public surface.

pub mod cusum;
pub mod detect;
pub mod error;
pub mod graph;
pub mod matrix;
pub mod preprocess;
pub mod simulate;

pub use cusum::{cusum_transform, CusumMatrix};
pub use detect::{DetectionResult, StatKind, StatMatrix};
pub use error::{Error, Result};
pub use graph::{DistanceMatrix, GraphFamily, LagMatrix, NetworkGraph};
pub use matrix::{DataMatrix, Matrix};
