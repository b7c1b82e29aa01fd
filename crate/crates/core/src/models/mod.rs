//! Parametric outcome models exposed as [`LogPosteriorTarget`]s.
//!
//! [`LogPosteriorTarget`]: crate::mcmc::LogPosteriorTarget

pub mod dose;
pub mod linear;
pub mod partial_pool;

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Result};
use crate::prob::{inv_gamma_ln_pdf, normal_ln_pdf};

pub use dose::{fit_dose_ar1, DoseFit, DoseModelSpec};
pub use linear::{fit_linear, LinearModelSpec};
pub use partial_pool::{fit_partial_pool, PartialPoolSpec};

/// Gaussian prior; an infinite `sd` means flat.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormalPrior {
    pub mean: f64,
    pub sd: f64,
}

impl NormalPrior {
    pub const fn new(mean: f64, sd: f64) -> Self {
        Self { mean, sd }
    }

    pub const fn flat() -> Self {
        Self { mean: 0.0, sd: f64::INFINITY }
    }

    pub fn validate(&self, what: &str) -> Result<()> {
        if self.mean.is_finite() && self.sd > 0.0 {
            Ok(())
        } else {
            Err(invalid(format!("{what}: prior needs finite mean and positive sd")))
        }
    }

    pub fn is_flat(&self) -> bool {
        self.sd.is_infinite()
    }

    pub fn precision(&self) -> f64 {
        if self.is_flat() {
            0.0
        } else {
            1.0 / (self.sd * self.sd)
        }
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        if self.is_flat() {
            0.0
        } else {
            normal_ln_pdf(x, self.mean, self.sd)
        }
    }
}

/// Prior on a Gaussian outcome variance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum VariancePrior {
    InverseGamma { a: f64, b: f64 },
    Fixed(f64),
}

impl VariancePrior {
    pub fn validate(&self) -> Result<()> {
        match self {
            VariancePrior::InverseGamma { a, b } if *a > 0.0 && *b > 0.0 => Ok(()),
            VariancePrior::Fixed(v) if *v > 0.0 && v.is_finite() => Ok(()),
            _ => Err(invalid("variance prior parameters must be positive")),
        }
    }

    pub fn is_fixed(&self) -> bool {
        matches!(self, VariancePrior::Fixed(_))
    }

    pub fn ln_pdf(&self, phi: f64) -> f64 {
        match self {
            VariancePrior::InverseGamma { a, b } => inv_gamma_ln_pdf(phi, *a, *b),
            VariancePrior::Fixed(_) => 0.0,
        }
    }
}

/// Sufficient statistics of a Gaussian linear regression, so the likelihood
/// costs O(p^2) per evaluation regardless of n.
#[derive(Clone, Debug)]
pub struct GaussianSuffStats {
    pub n: usize,
    pub xtx: DMatrix<f64>,
    pub xty: DVector<f64>,
    pub yty: f64,
}

impl GaussianSuffStats {
    pub fn new(x: &DMatrix<f64>, y: &DVector<f64>) -> Self {
        Self { n: y.len(), xtx: x.transpose() * x, xty: x.transpose() * y, yty: y.dot(y) }
    }

    pub fn p(&self) -> usize {
        self.xty.len()
    }

    /// Residual sum of squares at `coef`.
    pub fn rss(&self, coef: &[f64]) -> f64 {
        let p = self.p();
        let mut quad = 0.0;
        let mut lin = 0.0;
        for a in 0..p {
            lin += coef[a] * self.xty[a];
            let mut row = 0.0;
            for b in 0..p {
                row += self.xtx[(a, b)] * coef[b];
            }
            quad += coef[a] * row;
        }
        (self.yty - 2.0 * lin + quad).max(0.0)
    }

    pub fn log_lik(&self, coef: &[f64], variance: f64) -> f64 {
        -0.5 * self.n as f64 * (2.0 * std::f64::consts::PI * variance).ln() - self.rss(coef) / (2.0 * variance)
    }

    /// Posterior mode of the coefficients at a fixed variance under
    /// independent Gaussian priors; `None` when the system is singular.
    pub fn conditional_mode(&self, priors: &[NormalPrior], variance: f64) -> Option<DVector<f64>> {
        let p = self.p();
        let mut prec = &self.xtx / variance;
        let mut rhs = &self.xty / variance;
        for j in 0..p {
            let t = priors[j].precision();
            prec[(j, j)] += t;
            rhs[j] += t * priors[j].mean;
        }
        prec.cholesky().map(|c| c.solve(&rhs))
    }
}

/// Broadcasts a length-1 prior list to `p` entries.
pub(crate) fn broadcast_priors(priors: &[NormalPrior], p: usize, what: &str) -> Result<Vec<NormalPrior>> {
    let out = match priors.len() {
        1 => vec![priors[0]; p],
        k if k == p => priors.to_vec(),
        k => return Err(invalid(format!("{what}: {k} priors given for {p} coefficients"))),
    };
    for pr in &out {
        pr.validate(what)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suff_stats_match_direct_rss() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 0.5, 1.0, -1.0, 1.0, 2.0]);
        let y = DVector::from_vec(vec![1.0, 2.0, -0.5]);
        let s = GaussianSuffStats::new(&x, &y);
        let b = [0.3, -0.7];
        let direct = (&y - &x * DVector::from_column_slice(&b)).norm_squared();
        assert!((s.rss(&b) - direct).abs() < 1e-12);
    }

    #[test]
    fn broadcast_checks_lengths() {
        let p = [NormalPrior::new(0.0, 1.0)];
        assert_eq!(broadcast_priors(&p, 3, "b").unwrap().len(), 3);
        assert!(broadcast_priors(&[p[0], p[0]], 3, "b").is_err());
        assert!(broadcast_priors(&[NormalPrior::new(0.0, 0.0)], 1, "b").is_err());
    }
}
