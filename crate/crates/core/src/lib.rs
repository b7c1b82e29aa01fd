//! Bayesian causal effect estimation.
//!
//! Parametric outcome models are sampled with an adaptive Metropolis engine
//! ([`mcmc`]); their draws are turned into causal contrasts by Bayesian
//! bootstrap standardization ([`effects`]) or Monte Carlo g-computation
//! ([`gcomp`]). [`bnp`] holds the nonparametric regressions and [`synth`] the
//! simulation scenarios with their brute-force ground truths.

pub mod bnp;
pub mod data;
pub mod effects;
pub mod error;
pub mod gcomp;
pub mod linalg;
pub mod mcmc;
pub mod models;
pub mod parallel;
pub mod prob;
pub mod synth;

pub use error::{Error, Result};
