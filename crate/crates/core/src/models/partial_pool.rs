//! Logistic outcome model with stratum-specific treatment effects that are
//! partially pooled toward a common mean.
//!
//! `logit P(Y=1) = beta_w'(1, W) + beta_v[V] + effect_V * A`, with
//! `effect_1 = theta_0` and `effect_v = theta_0 + theta_{v-1}` for `v >= 2`.
//! The prior `theta_0 ~ N(mu, tau)`, `theta_j ~ N(mu - theta_0, tau)` makes
//! every stratum effect an independent `N(mu, tau)` draw, which is how it is
//! sampled: `effect_v = mu + tau * z_v`.

use nalgebra::DMatrix;

use super::{broadcast_priors, NormalPrior};
use crate::data::ObservedDataset;
use crate::error::{invalid, Error, Result};
use crate::linalg::logistic_mle;
use crate::mcmc::{run_chains, ChainConfig, DrawsMatrix, LogPosteriorTarget};
use crate::prob::log1p_exp;

#[derive(Clone, Debug, PartialEq)]
pub struct PartialPoolSpec {
    /// Number of non-reference strata; `V` takes values `1..=q+1`.
    pub q: usize,
    pub tau: f64,
    pub prior_mu: NormalPrior,
    /// Intercept first, then one per confounder; a single entry is broadcast.
    pub prior_beta_w: Vec<NormalPrior>,
    pub prior_beta_v: Vec<NormalPrior>,
    pub prior_only: bool,
}

impl PartialPoolSpec {
    pub fn new(q: usize, tau: f64) -> Self {
        Self {
            q,
            tau,
            prior_mu: NormalPrior::new(0.0, 1.0),
            prior_beta_w: vec![NormalPrior::new(0.0, 1.0)],
            prior_beta_v: vec![NormalPrior::new(0.0, 1.0)],
            prior_only: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.q < 1 {
            return Err(invalid("partial pooling needs q >= 1"));
        }
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(invalid("tau must be positive and finite"));
        }
        self.prior_mu.validate("mu")
    }
}

/// Per-subject design pieces shared by the likelihood and the
/// standardization step.
#[derive(Clone, Debug)]
struct Design {
    w: DMatrix<f64>,
    strata: Vec<usize>,
    a: Vec<f64>,
    y: Vec<f64>,
}

pub struct PartialPoolTarget {
    design: Design,
    spec: PartialPoolSpec,
    prior_w: Vec<NormalPrior>,
    prior_v: Vec<NormalPrior>,
    w_names: Vec<String>,
    init: Vec<f64>,
    warnings: Vec<String>,
}

fn check_strata(data: &ObservedDataset, q: usize) -> Result<Vec<usize>> {
    let v = data.v.as_ref().ok_or_else(|| Error::MissingColumn("V".into()))?;
    let mut counts = vec![0usize; q + 1];
    for &s in v {
        if s > q + 1 {
            return Err(Error::Schema(format!("stratum {s} outside 1..={}", q + 1)));
        }
        counts[s - 1] += 1;
    }
    if let Some(empty) = counts.iter().position(|&c| c == 0) {
        return Err(Error::MissingStratum(empty + 1));
    }
    Ok(v.iter().map(|s| s - 1).collect())
}

fn check_binary(xs: &[f64], what: &str) -> Result<()> {
    if xs.iter().any(|&x| x != 0.0 && x != 1.0) {
        return Err(Error::Schema(format!("{what} must be binary 0/1")));
    }
    Ok(())
}

fn w_design(data: &ObservedDataset) -> DMatrix<f64> {
    DMatrix::from_fn(data.n(), 1 + data.p(), |i, j| if j == 0 { 1.0 } else { data.confounders[j - 1].values[i] })
}

/// Logistic MLE of `Y ~ (1, W) + stratum dummies + stratum-specific A
/// effects`; returns the coefficient vector in the layout
/// `[beta_w.., beta_v_2.., effect_1..]`.
fn full_mle(data: &ObservedDataset, strata: &[usize], q: usize) -> Result<Vec<f64>> {
    let pw = 1 + data.p();
    let x = DMatrix::from_fn(data.n(), pw + 2 * q + 1, |i, j| {
        if j < pw {
            if j == 0 {
                1.0
            } else {
                data.confounders[j - 1].values[i]
            }
        } else if j < pw + q {
            f64::from(u8::from(strata[i] == j - pw + 1))
        } else {
            f64::from(u8::from(strata[i] == j - pw - q)) * data.a[i]
        }
    });
    Ok(logistic_mle(&x, &data.y)?.0.iter().copied().collect())
}

/// Per-stratum logistic MLE of the treatment coefficient in
/// `Y ~ 1 + W + A`, fitted separately within each stratum.
pub fn stratum_mle_effects(data: &ObservedDataset) -> Result<Vec<f64>> {
    let q1 = data.num_strata();
    let strata = check_strata(data, q1.saturating_sub(1))?;
    (0..q1)
        .map(|s| {
            let rows: Vec<usize> = (0..data.n()).filter(|&i| strata[i] == s).collect();
            let pw = 1 + data.p();
            let x = DMatrix::from_fn(rows.len(), pw + 1, |r, j| {
                let i = rows[r];
                match j {
                    0 => 1.0,
                    j if j < pw => data.confounders[j - 1].values[i],
                    _ => data.a[i],
                }
            });
            let y: Vec<f64> = rows.iter().map(|&i| data.y[i]).collect();
            Ok(logistic_mle(&x, &y)?.0[pw])
        })
        .collect()
}

/// Treatment coefficient of the pooled logistic model with a single common
/// effect, `Y ~ 1 + W + stratum dummies + A`.
pub fn pooled_mle_effect(data: &ObservedDataset) -> Result<f64> {
    let q = data.num_strata().saturating_sub(1);
    let strata = check_strata(data, q)?;
    let pw = 1 + data.p();
    let x = DMatrix::from_fn(data.n(), pw + q + 1, |i, j| {
        if j == 0 {
            1.0
        } else if j < pw {
            data.confounders[j - 1].values[i]
        } else if j < pw + q {
            f64::from(u8::from(strata[i] == j - pw + 1))
        } else {
            data.a[i]
        }
    });
    Ok(logistic_mle(&x, &data.y)?.0[pw + q])
}

impl PartialPoolTarget {
    pub fn new(data: &ObservedDataset, spec: &PartialPoolSpec) -> Result<Self> {
        spec.validate()?;
        check_binary(&data.y, "Y")?;
        check_binary(&data.a, "A")?;
        let q = spec.q;
        let strata = check_strata(data, q)?;
        let mut warnings = Vec::new();
        for s in 0..=q {
            let (mut n0, mut n1) = (0, 0);
            for i in (0..data.n()).filter(|&i| strata[i] == s) {
                if data.a[i] == 1.0 {
                    n1 += 1;
                } else {
                    n0 += 1;
                }
            }
            if n0 == 0 || n1 == 0 {
                warnings.push(format!("positivity: stratum {} has only one treatment arm", s + 1));
            }
        }
        let pw = 1 + data.p();
        let prior_w = broadcast_priors(&spec.prior_beta_w, pw, "beta_w")?;
        let prior_v = broadcast_priors(&spec.prior_beta_v, q, "beta_v")?;

        let mut init = vec![0.0; pw + q + 1 + q + 1];
        if !spec.prior_only {
            if let Ok(m) = full_mle(data, &strata, q) {
                if m.iter().all(|v| v.is_finite() && v.abs() < 20.0) {
                    init[..pw + q].copy_from_slice(&m[..pw + q]);
                    let eff = &m[pw + q..];
                    let mu = eff.iter().sum::<f64>() / eff.len() as f64;
                    init[pw + q] = mu;
                    for (v, e) in eff.iter().enumerate() {
                        init[pw + q + 1 + v] = ((e - mu) / spec.tau).clamp(-3.0, 3.0);
                    }
                }
            }
        }
        let mut w_names = vec!["beta_w_0".to_string()];
        w_names.extend(data.confounders.iter().map(|c| format!("beta_w_{}", c.name)));
        Ok(Self {
            design: Design { w: w_design(data), strata, a: data.a.clone(), y: data.y.clone() },
            spec: spec.clone(),
            prior_w,
            prior_v,
            w_names,
            init,
            warnings,
        })
    }

    fn pw(&self) -> usize {
        self.w_names.len()
    }

    fn effects(&self, x: &[f64]) -> Vec<f64> {
        let o = self.pw() + self.spec.q;
        let mu = x[o];
        x[o + 1..].iter().map(|z| mu + self.spec.tau * z).collect()
    }
}

impl LogPosteriorTarget for PartialPoolTarget {
    fn dim(&self) -> usize {
        self.init.len()
    }

    fn param_names(&self) -> Vec<String> {
        let mut n = self.w_names.clone();
        n.extend((2..=self.spec.q + 1).map(|v| format!("beta_v_{v}")));
        n.push("mu".into());
        n.extend((1..=self.spec.q + 1).map(|v| format!("z_{v}")));
        n
    }

    fn log_posterior(&self, x: &[f64]) -> f64 {
        let pw = self.pw();
        let q = self.spec.q;
        let mut lp: f64 = self.prior_w.iter().zip(&x[..pw]).map(|(p, &b)| p.ln_pdf(b)).sum();
        lp += self.prior_v.iter().zip(&x[pw..pw + q]).map(|(p, &b)| p.ln_pdf(b)).sum::<f64>();
        lp += self.spec.prior_mu.ln_pdf(x[pw + q]);
        lp += x[pw + q + 1..].iter().map(|z| -0.5 * z * z).sum::<f64>();
        if self.spec.prior_only {
            return lp;
        }
        let eff = self.effects(x);
        let d = &self.design;
        let mut ll = 0.0;
        for i in 0..d.y.len() {
            let s = d.strata[i];
            let mut eta: f64 = (0..pw).map(|j| d.w[(i, j)] * x[j]).sum();
            if s > 0 {
                eta += x[pw + s - 1];
            }
            eta += eff[s] * d.a[i];
            ll += d.y[i] * eta - log1p_exp(eta);
        }
        lp + ll
    }

    fn initial_point(&self) -> Vec<f64> {
        self.init.clone()
    }

    fn output_names(&self) -> Vec<String> {
        let q = self.spec.q;
        let mut n = self.w_names.clone();
        n.extend((2..=q + 1).map(|v| format!("beta_v_{v}")));
        n.push("mu".into());
        n.extend((0..=q).map(|j| format!("theta_{j}")));
        n.extend((1..=q + 1).map(|v| format!("effect_v{v}")));
        n
    }

    fn output(&self, x: &[f64]) -> Vec<f64> {
        let o = self.pw() + self.spec.q;
        let eff = self.effects(x);
        let theta0 = eff[0];
        let thetas: Vec<f64> = eff[1..].iter().map(|e| e - theta0).collect();
        let mut out = x[..=o].to_vec();
        out.push(theta0);
        out.extend_from_slice(&thetas);
        out.push(theta0);
        out.extend(thetas.iter().map(|t| theta0 + t));
        out
    }

    fn warnings(&self) -> Vec<String> {
        self.warnings.clone()
    }
}

pub fn fit_partial_pool(data: &ObservedDataset, spec: &PartialPoolSpec, cfg: &ChainConfig) -> Result<DrawsMatrix> {
    run_chains(&PartialPoolTarget::new(data, spec)?, cfg)
}

/// Column lookup that evaluates the fitted conditional mean
/// `P(Y=1 | A=a, W_i, V_i)` for a posterior draw of a partial-pooling fit.
#[derive(Clone, Debug)]
pub struct PartialPoolMean {
    beta_w: Vec<usize>,
    beta_v: Vec<usize>,
    effect: Vec<usize>,
}

impl PartialPoolMean {
    pub fn resolve(draws: &DrawsMatrix, data: &ObservedDataset) -> Result<Self> {
        let q1 = data.num_strata();
        let mut beta_w = vec![draws.require("beta_w_0")?];
        for c in &data.confounders {
            beta_w.push(draws.require(&format!("beta_w_{}", c.name))?);
        }
        let beta_v = (2..=q1).map(|v| draws.require(&format!("beta_v_{v}"))).collect::<Result<_>>()?;
        let effect = (1..=q1).map(|v| draws.require(&format!("effect_v{v}"))).collect::<Result<_>>()?;
        Ok(Self { beta_w, beta_v, effect })
    }

    /// Linear predictor for subject `i` (confounder values `w`, 1-based
    /// stratum `v`) under treatment `a`.
    pub fn eta(&self, row: &[f64], w: &[f64], v: usize, a: f64) -> f64 {
        let mut eta = row[self.beta_w[0]];
        for (j, &x) in w.iter().enumerate() {
            eta += row[self.beta_w[j + 1]] * x;
        }
        if v >= 2 {
            eta += row[self.beta_v[v - 2]];
        }
        eta + row[self.effect[v - 1]] * a
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Column;
    use crate::prob::{expit, RngHandle};

    /// Logistic data with per-stratum effects `eff` and `n_per` rows per stratum.
    fn strat_data(eff: &[f64], n_per: usize, seed: u64) -> ObservedDataset {
        let mut r = RngHandle::new(seed, 0);
        let (mut y, mut a, mut w, mut v) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for (s, &e) in eff.iter().enumerate() {
            for _ in 0..n_per {
                let wi = r.std_normal();
                let ai = f64::from(u8::from(r.uniform() < expit(0.3 * wi)));
                let yi = f64::from(u8::from(r.uniform() < expit(-0.5 + 0.5 * wi + 0.2 * s as f64 + e * ai)));
                y.push(yi);
                a.push(ai);
                w.push(wi);
                v.push(s + 1);
            }
        }
        ObservedDataset::new(y, a, vec![Column::new("W", w)]).unwrap().with_strata(v).unwrap()
    }

    fn post_mean(d: &DrawsMatrix, name: &str) -> f64 {
        let c = d.column(name).unwrap();
        c.iter().sum::<f64>() / c.len() as f64
    }

    #[test]
    fn effect_columns_are_exact_sums() {
        let data = strat_data(&[0.5, 1.0, -0.5], 60, 1);
        let d = fit_partial_pool(&data, &PartialPoolSpec::new(2, 0.5), &ChainConfig::new(2, 400, 200, 3)).unwrap();
        let (t0, t1, t2) = (d.require("theta_0").unwrap(), d.require("theta_1").unwrap(), d.require("theta_2").unwrap());
        let (e1, e2, e3) = (d.require("effect_v1").unwrap(), d.require("effect_v2").unwrap(), d.require("effect_v3").unwrap());
        for row in d.rows() {
            assert_eq!(row[e1], row[t0]);
            assert_eq!(row[e2], row[t0] + row[t1]);
            assert_eq!(row[e3], row[t0] + row[t2]);
        }
    }

    #[test]
    fn tiny_tau_fully_pools() {
        let data = strat_data(&[0.2, 1.5, -1.0], 80, 2);
        let d = fit_partial_pool(&data, &PartialPoolSpec::new(2, 1e-6), &ChainConfig::new(2, 1000, 500, 5)).unwrap();
        let mu = d.require("mu").unwrap();
        let cols: Vec<usize> = (1..=3).map(|v| d.require(&format!("effect_v{v}")).unwrap()).collect();
        for row in d.rows() {
            for &c in &cols {
                assert!((row[c] - row[mu]).abs() < 0.05);
            }
        }
    }

    #[test]
    fn huge_tau_matches_stratum_mles() {
        let data = strat_data(&[0.3, 1.0], 1500, 3);
        let mle = stratum_mle_effects(&data).unwrap();
        let mut spec = PartialPoolSpec::new(1, 1e3);
        spec.prior_beta_w = vec![NormalPrior::new(0.0, 10.0)];
        spec.prior_beta_v = vec![NormalPrior::new(0.0, 10.0)];
        let d = fit_partial_pool(&data, &spec, &ChainConfig::new(2, 3000, 1500, 7)).unwrap();
        for (v, m) in mle.iter().enumerate() {
            let pm = post_mean(&d, &format!("effect_v{}", v + 1));
            assert!((pm - m).abs() < 0.1, "stratum {}: {pm} vs {m}", v + 1);
        }
    }

    #[test]
    fn prior_only_matches_prior_moments() {
        let data = strat_data(&[0.0, 0.0], 30, 4);
        let mut spec = PartialPoolSpec::new(1, 0.5);
        spec.prior_only = true;
        let d = fit_partial_pool(&data, &spec, &ChainConfig::new(4, 5000, 1000, 9)).unwrap();
        // theta_1 = effect_2 - effect_1 has variance 2 tau^2; effect_v has 1 + tau^2.
        for (name, var) in [("theta_1", 0.5), ("effect_v2", 1.25), ("mu", 1.0)] {
            let c = d.column(name).unwrap();
            let ess = crate::mcmc::effective_sample_size(&d, name).unwrap();
            let m = c.iter().sum::<f64>() / c.len() as f64;
            let v = c.iter().map(|x| (x - m).powi(2)).sum::<f64>() / c.len() as f64;
            assert!(m.abs() < 4.0 * (var / ess).sqrt(), "{name} mean {m}");
            assert!((v - var).abs() < 4.0 * var * (2.0 / ess).sqrt(), "{name} var {v}");
        }
    }

    #[test]
    fn empty_stratum_and_one_arm() {
        let mut data = strat_data(&[0.0, 0.0], 20, 5);
        let err = PartialPoolTarget::new(&data, &PartialPoolSpec::new(2, 0.5)).err().unwrap();
        assert!(matches!(err, Error::MissingStratum(3)));
        for i in 20..40 {
            data.a[i] = 1.0;
        }
        let t = PartialPoolTarget::new(&data, &PartialPoolSpec::new(1, 0.5)).unwrap();
        assert!(t.warnings().iter().any(|w| w.contains("stratum 2")));
    }

    #[test]
    fn mean_lookup_matches_likelihood_predictor() {
        let data = strat_data(&[0.4, -0.2], 40, 6);
        let d = fit_partial_pool(&data, &PartialPoolSpec::new(1, 0.5), &ChainConfig::new(1, 200, 100, 1)).unwrap();
        let look = PartialPoolMean::resolve(&d, &data).unwrap();
        let row = d.row(0);
        let g = |n: &str| row[d.require(n).unwrap()];
        let eta = look.eta(row, &[0.7], 2, 1.0);
        let expect = g("beta_w_0") + 0.7 * g("beta_w_W") + g("beta_v_2") + g("effect_v2");
        assert!((eta - expect).abs() < 1e-12);
    }
}
