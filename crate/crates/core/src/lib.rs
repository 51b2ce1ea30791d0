//! Micro-macro Markov chain Monte Carlo for metastable Gibbs measures.
//!
//! A chain alternates an effective-dynamics proposal on a one-dimensional
//! reaction coordinate with a biased Langevin reconstruction of the full
//! configuration. The crate provides the benchmark models, every transition
//! kernel, the tabulated macroscopic coefficients and the estimator
//! diagnostics used to compare samplers.

pub mod diagnostics;
pub mod error;
pub mod kernels;
pub mod model;
pub mod rng;
pub mod tables;

pub use error::{Error, Result};
