//! Gaussian linear outcome model `Y ~ N(theta*A + X'beta, phi)`.

use nalgebra::{DMatrix, DVector};

use super::{broadcast_priors, GaussianSuffStats, NormalPrior, VariancePrior};
use crate::data::ObservedDataset;
use crate::error::{Error, Result};
use crate::linalg::ols;
use crate::mcmc::{run_chains, ChainConfig, DrawsMatrix, LogPosteriorTarget, Transform};

#[derive(Clone, Debug, PartialEq)]
pub struct LinearModelSpec {
    pub prior_theta: NormalPrior,
    /// Intercept first (when present), then one per confounder; a single
    /// entry is broadcast.
    pub prior_beta: Vec<NormalPrior>,
    pub prior_phi: VariancePrior,
    pub intercept: bool,
}

impl Default for LinearModelSpec {
    fn default() -> Self {
        Self {
            prior_theta: NormalPrior::new(0.0, 10.0),
            prior_beta: vec![NormalPrior::new(0.0, 10.0)],
            prior_phi: VariancePrior::InverseGamma { a: 1.0, b: 1.0 },
            intercept: true,
        }
    }
}

pub struct LinearTarget {
    stats: GaussianSuffStats,
    priors: Vec<NormalPrior>,
    phi: VariancePrior,
    coef_names: Vec<String>,
    init: Vec<f64>,
}

/// Column names for the coefficient vector: `theta`, `beta_0` (intercept),
/// then `beta_<confounder>`.
pub fn coefficient_names(data: &ObservedDataset, intercept: bool) -> Vec<String> {
    let mut names = vec!["theta".to_string()];
    if intercept {
        names.push("beta_0".into());
    }
    names.extend(data.confounders.iter().map(|c| format!("beta_{}", c.name)));
    names
}

pub(crate) fn design(data: &ObservedDataset, intercept: bool) -> DMatrix<f64> {
    let p = 1 + usize::from(intercept) + data.p();
    DMatrix::from_fn(data.n(), p, |i, j| {
        if j == 0 {
            data.a[i]
        } else if intercept && j == 1 {
            1.0
        } else {
            data.confounders[j - 1 - usize::from(intercept)].values[i]
        }
    })
}

impl LinearTarget {
    pub fn new(data: &ObservedDataset, spec: &LinearModelSpec) -> Result<Self> {
        spec.prior_theta.validate("theta")?;
        spec.prior_phi.validate()?;
        if data.a.iter().any(|&a| a != 0.0 && a != 1.0) {
            return Err(Error::Schema("linear model needs a binary treatment A".into()));
        }
        let x = design(data, spec.intercept);
        let y = DVector::from_column_slice(&data.y);
        let stats = GaussianSuffStats::new(&x, &y);
        let p = stats.p();
        let mut priors = vec![spec.prior_theta];
        priors.extend(broadcast_priors(&spec.prior_beta, p - 1, "beta")?);

        let mut prec = stats.xtx.clone();
        for (j, pr) in priors.iter().enumerate() {
            prec[(j, j)] += pr.precision();
        }
        if prec.cholesky().is_none() {
            return Err(Error::SingularModel(
                "design is rank deficient in directions without a proper prior".into(),
            ));
        }

        let phi0 = match spec.prior_phi {
            VariancePrior::Fixed(v) => v,
            VariancePrior::InverseGamma { .. } => match ols(&x, &y) {
                Ok(f) if f.sigma2 > 0.0 => f.sigma2,
                _ => {
                    let m = data.y.iter().sum::<f64>() / data.n().max(1) as f64;
                    (data.y.iter().map(|v| (v - m).powi(2)).sum::<f64>() / data.n().max(1) as f64).max(1e-6)
                }
            },
        };
        let mode = stats
            .conditional_mode(&priors, phi0)
            .ok_or_else(|| Error::SingularModel("posterior precision is singular".into()))?;
        let mut init: Vec<f64> = mode.iter().copied().collect();
        if !spec.prior_phi.is_fixed() {
            init.push(phi0);
        }
        Ok(Self { stats, priors, phi: spec.prior_phi, coef_names: coefficient_names(data, spec.intercept), init })
    }
}

impl LogPosteriorTarget for LinearTarget {
    fn dim(&self) -> usize {
        self.init.len()
    }

    fn param_names(&self) -> Vec<String> {
        let mut n = self.coef_names.clone();
        if !self.phi.is_fixed() {
            n.push("phi".into());
        }
        n
    }

    fn log_posterior(&self, x: &[f64]) -> f64 {
        let p = self.stats.p();
        let phi = match self.phi {
            VariancePrior::Fixed(v) => v,
            VariancePrior::InverseGamma { .. } => x[p],
        };
        let prior: f64 = self.priors.iter().zip(x).map(|(pr, &b)| pr.ln_pdf(b)).sum();
        self.stats.log_lik(&x[..p], phi) + prior + self.phi.ln_pdf(phi)
    }

    fn initial_point(&self) -> Vec<f64> {
        self.init.clone()
    }

    fn blocks(&self) -> Vec<Vec<usize>> {
        let p = self.stats.p();
        let mut b = vec![(0..p).collect()];
        if !self.phi.is_fixed() {
            b.push(vec![p]);
        }
        b
    }

    fn transforms(&self) -> Vec<Transform> {
        let mut t = vec![Transform::Identity; self.stats.p()];
        if !self.phi.is_fixed() {
            t.push(Transform::Log);
        }
        t
    }
}

/// Draws of `(theta, beta, phi)`; under the linear outcome model the `theta`
/// column is the average treatment effect.
pub fn fit_linear(data: &ObservedDataset, spec: &LinearModelSpec, cfg: &ChainConfig) -> Result<DrawsMatrix> {
    run_chains(&LinearTarget::new(data, spec)?, cfg)
}
