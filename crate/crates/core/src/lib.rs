//! Randomized sketching for dense linear algebra.
//!
//! The crate provides the deterministic building blocks (matrix type, SVD,
//! QR, symmetric eigen, seeded random streams), three sketch constructions
//! (sign projection, Gaussian projection, non-uniform row sampling), and the
//! estimators built on them: approximate matrix products with spectral-norm
//! error reports, sketched least squares, projection-based low-rank
//! approximation, and a small Monte Carlo lab for concentration experiments
//! on random matrix ensembles.
//!
//! Every randomized object is a pure function of its seed: identical seeds
//! reproduce identical bytes on any platform.

pub mod amm;
pub mod chernoff;
pub mod error;
pub mod generate;
pub mod io;
pub mod linalg;
pub mod lowrank;
pub mod matrix;
pub mod regression;
pub mod rng;
pub mod sketch;

pub use error::{Error, Result};
pub use matrix::DenseMatrix;
