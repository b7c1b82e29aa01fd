//! Turning parameter draws into causal estimand draws.

mod estimand;
mod sensitivity;
mod standardize;

pub use estimand::{quantile_sorted, EstimandDraws, EstimandKind, Summary};
pub use sensitivity::{bias_xi, sensitivity_perturb, Direction, SensitivitySpec};
pub use standardize::{
    bb_stream, bb_weights, standardize_contrast, standardize_linear, standardize_marginal, standardize_predictions,
    standardize_stratified_or,
};
