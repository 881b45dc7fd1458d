//! Sample covariance estimation and symmetric eigen-analysis.

mod covariance;
mod eigen;
mod klt;

pub use covariance::{
    segment_covariance, sliding_vectors, window_covariance, CovAccumulator, CovMatrix, SYMMETRY_TOL,
};
pub use eigen::{eig_sym, leading_eigenvector, normalize_sign, EigenPairs, DEFAULT_MAX_ITER, DEFAULT_TOL};
pub use klt::{klt_transform, klt_truncate};

pub(crate) use covariance::norm;
