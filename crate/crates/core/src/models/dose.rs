//! Dose-effect model with a second-order random-walk prior on the dose
//! coefficients, which makes the incremental curve `Psi(k) = theta_k -
//! theta_{k-1}` a first-order autoregression.
//!
//! The dose coefficients are sampled through innovations `e_k ~ N(0, 1)`:
//! `theta_1 = mu1 + tau_1 e_1` and
//! `theta_k = 2 theta_{k-1} - theta_{k-2} + tau_k e_k` with `theta_0 := 0`
//! inside the recursion (dose 0 is absorbed into the intercept).

use nalgebra::{DMatrix, DVector};

use super::{broadcast_priors, GaussianSuffStats, NormalPrior, VariancePrior};
use crate::data::ObservedDataset;
use crate::effects::{EstimandDraws, EstimandKind};
use crate::error::{invalid, Error, Result};
use crate::linalg::ols;
use crate::mcmc::{run_chains, ChainConfig, DrawsMatrix, LogPosteriorTarget, Transform};

#[derive(Clone, Debug, PartialEq)]
pub struct DoseModelSpec {
    /// Number of non-zero dose levels.
    pub k: usize,
    pub mu1: f64,
    /// Prior sds `tau_1..tau_K`.
    pub tau: Vec<f64>,
    pub prior_intercept: NormalPrior,
    pub prior_beta: Vec<NormalPrior>,
    pub prior_phi: VariancePrior,
    /// Drop the likelihood and sample the prior.
    pub prior_only: bool,
}

impl DoseModelSpec {
    /// `tau_1 = tau1`, every later `tau_k = tauk`.
    pub fn new(k: usize, mu1: f64, tau1: f64, tauk: f64) -> Self {
        let mut tau = vec![tauk; k];
        if k > 0 {
            tau[0] = tau1;
        }
        Self {
            k,
            mu1,
            tau,
            prior_intercept: NormalPrior::new(0.0, 10.0),
            prior_beta: vec![NormalPrior::new(0.0, 10.0)],
            prior_phi: VariancePrior::InverseGamma { a: 1.0, b: 1.0 },
            prior_only: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(invalid("dose model needs K >= 2"));
        }
        if self.tau.len() != self.k || self.tau.iter().any(|&t| !(t > 0.0) || !t.is_finite()) {
            return Err(invalid("need K positive finite prior sds tau"));
        }
        if !self.mu1.is_finite() {
            return Err(invalid("mu1 must be finite"));
        }
        self.prior_intercept.validate("intercept")?;
        self.prior_phi.validate()
    }
}

pub struct DoseTarget {
    stats: GaussianSuffStats,
    spec: DoseModelSpec,
    beta_priors: Vec<NormalPrior>,
    beta_names: Vec<String>,
    init: Vec<f64>,
    warnings: Vec<String>,
}

impl DoseTarget {
    pub fn new(data: &ObservedDataset, spec: &DoseModelSpec) -> Result<Self> {
        spec.validate()?;
        let k = spec.k;
        let mut counts = vec![0usize; k + 1];
        for &a in &data.a {
            if a < 0.0 || a.fract() != 0.0 || a as usize > k {
                return Err(Error::Schema(format!("dose {a} is not an integer in 0..={k}")));
            }
            counts[a as usize] += 1;
        }
        let warnings = (1..=k)
            .filter(|&j| counts[j] == 0)
            .map(|j| format!("positivity: dose level {j} is never observed; its effect is driven by the prior"))
            .collect();

        let pl = data.p();
        let p = 1 + pl + k;
        let x = DMatrix::from_fn(data.n(), p, |i, j| {
            if j == 0 {
                1.0
            } else if j <= pl {
                data.confounders[j - 1].values[i]
            } else {
                f64::from(u8::from(data.a[i] as usize == j - pl))
            }
        });
        let y = DVector::from_column_slice(&data.y);
        let stats = GaussianSuffStats::new(&x, &y);
        let beta_priors = if pl == 0 { Vec::new() } else { broadcast_priors(&spec.prior_beta, pl, "beta")? };

        let phi0 = match spec.prior_phi {
            VariancePrior::Fixed(v) => v,
            VariancePrior::InverseGamma { .. } => ols(&x, &y).map(|f| f.sigma2).ok().filter(|s| *s > 0.0).unwrap_or(1.0),
        };
        // Start at the innovations implied by a ridge-stabilized fit.
        let mut ridge = vec![spec.prior_intercept];
        ridge.extend(beta_priors.iter().copied());
        ridge.extend(std::iter::repeat_n(NormalPrior::new(0.0, 10.0), k));
        let mode = stats.conditional_mode(&ridge, phi0).map(|m| m.iter().copied().collect::<Vec<_>>());
        let mut init = vec![0.0; 1 + pl + k];
        if let Some(m) = mode.filter(|_| !spec.prior_only) {
            init[..=pl].copy_from_slice(&m[..=pl]);
            // Clamped so a tight tau cannot start the chain far out in the tails.
            let e: Vec<f64> = innovations(&m[1 + pl..], spec).iter().map(|z| z.clamp(-3.0, 3.0)).collect();
            init[1 + pl..].copy_from_slice(&e);
        }
        if !spec.prior_phi.is_fixed() {
            init.push(phi0);
        }
        let beta_names = data.confounders.iter().map(|c| format!("beta_{}", c.name)).collect();
        Ok(Self { stats, spec: spec.clone(), beta_priors, beta_names, init, warnings })
    }

    fn pl(&self) -> usize {
        self.beta_names.len()
    }

    /// Dose coefficients `theta_1..theta_K` from the innovations.
    fn thetas(&self, e: &[f64]) -> Vec<f64> {
        thetas_from_innovations(e, &self.spec)
    }
}

fn thetas_from_innovations(e: &[f64], spec: &DoseModelSpec) -> Vec<f64> {
    let k = spec.k;
    let mut th = vec![0.0; k];
    th[0] = spec.mu1 + spec.tau[0] * e[0];
    for j in 1..k {
        let prev2 = if j >= 2 { th[j - 2] } else { 0.0 };
        th[j] = 2.0 * th[j - 1] - prev2 + spec.tau[j] * e[j];
    }
    th
}

fn innovations(th: &[f64], spec: &DoseModelSpec) -> Vec<f64> {
    let k = spec.k;
    let mut e = vec![0.0; k];
    e[0] = (th[0] - spec.mu1) / spec.tau[0];
    for j in 1..k {
        let prev2 = if j >= 2 { th[j - 2] } else { 0.0 };
        e[j] = (th[j] - 2.0 * th[j - 1] + prev2) / spec.tau[j];
    }
    e
}

impl LogPosteriorTarget for DoseTarget {
    fn dim(&self) -> usize {
        self.init.len()
    }

    fn param_names(&self) -> Vec<String> {
        let mut n = vec!["theta_0".to_string()];
        n.extend(self.beta_names.iter().cloned());
        n.extend((1..=self.spec.k).map(|j| format!("e_{j}")));
        if !self.spec.prior_phi.is_fixed() {
            n.push("phi".into());
        }
        n
    }

    fn log_posterior(&self, x: &[f64]) -> f64 {
        let pl = self.pl();
        let k = self.spec.k;
        let e = &x[1 + pl..1 + pl + k];
        let mut lp = self.spec.prior_intercept.ln_pdf(x[0]);
        lp += self.beta_priors.iter().zip(&x[1..=pl]).map(|(pr, &b)| pr.ln_pdf(b)).sum::<f64>();
        lp += e.iter().map(|&z| -0.5 * z * z).sum::<f64>();
        let phi = match self.spec.prior_phi {
            VariancePrior::Fixed(v) => v,
            VariancePrior::InverseGamma { .. } => x[1 + pl + k],
        };
        lp += self.spec.prior_phi.ln_pdf(phi);
        if self.spec.prior_only {
            return lp;
        }
        let mut coef = Vec::with_capacity(1 + pl + k);
        coef.extend_from_slice(&x[..=pl]);
        coef.extend(self.thetas(e));
        lp + self.stats.log_lik(&coef, phi)
    }

    fn initial_point(&self) -> Vec<f64> {
        self.init.clone()
    }

    fn blocks(&self) -> Vec<Vec<usize>> {
        let p = 1 + self.pl() + self.spec.k;
        let mut b = vec![(0..p).collect()];
        if !self.spec.prior_phi.is_fixed() {
            b.push(vec![p]);
        }
        b
    }

    fn transforms(&self) -> Vec<Transform> {
        let mut t = vec![Transform::Identity; 1 + self.pl() + self.spec.k];
        if !self.spec.prior_phi.is_fixed() {
            t.push(Transform::Log);
        }
        t
    }

    fn output_names(&self) -> Vec<String> {
        let k = self.spec.k;
        let mut n: Vec<String> = (0..=k).map(|j| format!("theta_{j}")).collect();
        n.extend(self.beta_names.iter().cloned());
        if !self.spec.prior_phi.is_fixed() {
            n.push("phi".into());
        }
        n.extend((1..=k).map(|j| format!("Psi_{j}")));
        n
    }

    fn output(&self, x: &[f64]) -> Vec<f64> {
        let pl = self.pl();
        let k = self.spec.k;
        let th = self.thetas(&x[1 + pl..1 + pl + k]);
        let mut out = vec![x[0]];
        out.extend_from_slice(&th);
        out.extend_from_slice(&x[1..=pl]);
        if !self.spec.prior_phi.is_fixed() {
            out.push(x[1 + pl + k]);
        }
        out.push(th[0]);
        out.extend((1..k).map(|j| th[j] - th[j - 1]));
        out
    }

    fn warnings(&self) -> Vec<String> {
        self.warnings.clone()
    }
}

#[derive(Clone, Debug)]
pub struct DoseFit {
    pub draws: DrawsMatrix,
    /// `Psi(1..=K)` as estimand draws.
    pub curve: Vec<EstimandDraws>,
}

pub fn fit_dose_ar1(data: &ObservedDataset, spec: &DoseModelSpec, cfg: &ChainConfig) -> Result<DoseFit> {
    let draws = run_chains(&DoseTarget::new(data, spec)?, cfg)?;
    let curve = (1..=spec.k)
        .map(|j| EstimandDraws::from_column(&draws, &format!("Psi_{j}"), EstimandKind::Difference))
        .collect::<Result<Vec<_>>>()?;
    Ok(DoseFit { draws, curve })
}

/// Per-dose least-squares effects `theta_1..theta_K` (dummy coding, dose 0
/// as reference, adjusting for the confounders).
pub fn dose_mle(data: &ObservedDataset, k: usize) -> Result<Vec<f64>> {
    let pl = data.p();
    let x = DMatrix::from_fn(data.n(), 1 + pl + k, |i, j| {
        if j == 0 {
            1.0
        } else if j <= pl {
            data.confounders[j - 1].values[i]
        } else {
            f64::from(u8::from(data.a[i] as usize == j - pl))
        }
    });
    let f = ols(&x, &DVector::from_column_slice(&data.y))?;
    Ok(f.coef.iter().skip(1 + pl).copied().collect())
}
