//! Adaptive network intensity estimation.
//!
//! Dynamic networks — event streams `(u, v, t)` between nodes — are modeled
//! as matrices of inhomogeneous Poisson processes whose intensity factors
//! through a shared low-rank node subspace. This crate estimates the
//! time-varying intensity at every resolution level at once:
//!
//! 1. project the event counting measure onto an orthonormal basis of the
//!    unit interval (Haar wavelets by default), per node pair;
//! 2. estimate the common subspace from the truncated SVD of the
//!    concatenated coefficient matrix;
//! 3. compress each coefficient matrix into a small affinity matrix, z-score
//!    it against its sampling noise, and keep only the coefficients that
//!    survive false-discovery-rate control;
//! 4. reconstruct a denoised intensity estimate from the surviving
//!    coefficients, at any time point.
//!
//! Supporting modules provide synthetic generators with known ground truth,
//! fixed-resolution baselines for comparison, a multiscale anomaly score,
//! and the `anie` command-line driver.

pub mod affinity;
pub mod anomaly;
pub mod baselines;
pub mod basis;
pub mod coeffs;
pub mod error;
pub mod events;
pub mod model;
pub mod pipeline;
pub mod sparse;
pub mod stats;
pub mod subspace;
pub mod synth;

pub use error::{Error, ErrorClass, Result};
