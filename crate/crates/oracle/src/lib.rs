//! Dense, brute-force reference computations.
//!
//! Nothing here shares code with `simplex-core`; every routine works on plain
//! dense matrices and vertex lists so it can serve as an independent check.

pub mod eigen;
pub mod topology;

pub use nalgebra::DMatrix;
