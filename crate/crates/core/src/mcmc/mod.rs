//! Generic posterior sampler and convergence diagnostics.

pub mod diagnostics;
pub mod draws;
pub mod sampler;
pub mod target;

pub use diagnostics::{diagnose, effective_sample_size, split_rhat, DiagnosticsReport};
pub use draws::{ChainStats, DrawsMatrix};
pub use sampler::{run_chains, ChainConfig, Init};
pub use target::{LogPosteriorTarget, Transform};
