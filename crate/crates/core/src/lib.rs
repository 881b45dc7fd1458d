//! Spectrum sensing with a blindly learned signal feature.
//!
//! The feature is the leading eigenvector of the received signal's sample
//! covariance. Two consecutive segments whose features agree teach the
//! feature ([`feature::fla`]); afterwards each new segment is tested by
//! matching its own feature against the learned one ([`detectors::ftm`]).
//! Max/min eigenvalue ratio (MME) and energy detectors are provided as
//! baselines, together with a deterministic Monte-Carlo harness.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod detectors;
pub mod error;
pub mod experiments;
pub mod feature;
pub mod format;
pub mod linalg;
pub mod seed;
pub mod signals;
pub mod stats;

pub use error::{Error, Result};
