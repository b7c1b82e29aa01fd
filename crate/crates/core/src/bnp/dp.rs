//! Dirichlet-process mixture of local linear regressions with local
//! covariate models, sampled with Neal's Algorithm 8.
//!
//! Each cluster carries `(beta, phi)` for `Y | X ~ N((1, x)'beta, phi)` and
//! one parameter set per covariate column. The regression function at `x`
//! weighs every cluster by its size times the covariate density at `x`,
//! plus a fresh base-measure draw weighted by `alpha`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use statrs::function::gamma::ln_gamma;

use super::Predictions;
use crate::error::{invalid, Error, Result};
use crate::linalg::ols;
use crate::mcmc::{ChainConfig, DrawsMatrix};
use crate::parallel;
use crate::prob::{normal_ln_pdf, sample_log_categorical, RngHandle};

const DP_DOMAIN: u64 = 0xD9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CovariateKind {
    Gaussian,
    Bernoulli,
    Poisson,
}

impl CovariateKind {
    /// Binary columns are Bernoulli, non-negative integer columns with more
    /// than two levels are Poisson, everything else is Gaussian.
    pub fn infer(values: &[f64]) -> Self {
        if values.iter().all(|&v| v == 0.0 || v == 1.0) {
            CovariateKind::Bernoulli
        } else if values.iter().all(|&v| v >= 0.0 && v.fract() == 0.0) {
            CovariateKind::Poisson
        } else {
            CovariateKind::Gaussian
        }
    }
}

impl std::str::FromStr for CovariateKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "gaussian" | "normal" => Ok(CovariateKind::Gaussian),
            "bernoulli" | "binary" => Ok(CovariateKind::Bernoulli),
            "poisson" | "count" => Ok(CovariateKind::Poisson),
            o => Err(Error::Schema(format!("unknown covariate kind `{o}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AlphaPrior {
    Fixed(f64),
    /// Gamma with shape and rate, updated by the Escobar-West auxiliary
    /// variable step.
    Gamma { shape: f64, rate: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct DpConfig {
    pub alpha: AlphaPrior,
    /// Auxiliary components per reassignment.
    pub aux_m: usize,
    /// Clusters in the random initial partition.
    pub init_k: usize,
    /// One kind per covariate column, in `(A, L..)` order.
    pub kinds: Vec<CovariateKind>,
}

impl DpConfig {
    pub fn new(kinds: Vec<CovariateKind>) -> Self {
        Self { alpha: AlphaPrior::Gamma { shape: 1.0, rate: 1.0 }, aux_m: 3, init_k: 10, kinds }
    }

    fn validate(&self, p: usize) -> Result<()> {
        if self.kinds.len() != p {
            return Err(Error::Schema(format!("{} covariate kinds for {p} covariate columns", self.kinds.len())));
        }
        if self.aux_m == 0 || self.init_k == 0 {
            return Err(invalid("aux_m and init_k must be positive"));
        }
        match self.alpha {
            AlphaPrior::Fixed(a) if !(a >= 0.0 && a.is_finite()) => Err(invalid("alpha must be finite and >= 0")),
            AlphaPrior::Gamma { shape, rate } if !(shape > 0.0 && rate > 0.0) => Err(invalid("alpha prior needs positive shape and rate")),
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CovParam {
    Gaussian { mean: f64, var: f64 },
    Bernoulli { p: f64 },
    Poisson { lambda: f64 },
}

impl CovParam {
    pub fn ln_pdf(&self, x: f64) -> f64 {
        match *self {
            CovParam::Gaussian { mean, var } => normal_ln_pdf(x, mean, var.sqrt()),
            CovParam::Bernoulli { p } => {
                if x == 1.0 {
                    p.ln()
                } else if x == 0.0 {
                    (1.0 - p).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            CovParam::Poisson { lambda } => x * lambda.ln() - lambda - ln_gamma(x + 1.0),
        }
    }
}

/// Prior for one covariate column's local parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CovBase {
    /// `mean ~ N(m0, s0^2)`, `var ~ IG(a, b)`.
    Gaussian { m0: f64, s0: f64, a: f64, b: f64 },
    Bernoulli { a: f64, b: f64 },
    /// Gamma with shape and rate.
    Poisson { shape: f64, rate: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cluster {
    pub beta: Vec<f64>,
    pub phi: f64,
    pub cov: Vec<CovParam>,
}

impl Cluster {
    pub fn mean(&self, x: &[f64]) -> f64 {
        self.beta[0] + self.beta[1..].iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
    }

    pub fn cov_ln_pdf(&self, x: &[f64]) -> f64 {
        self.cov.iter().zip(x).map(|(c, &v)| c.ln_pdf(v)).sum()
    }

    fn ln_lik(&self, y: f64, x: &[f64]) -> f64 {
        normal_ln_pdf(y, self.mean(x), self.phi.sqrt()) + self.cov_ln_pdf(x)
    }
}

/// Empirical-Bayes base measure `G0`.
#[derive(Clone, Debug, PartialEq)]
pub struct BaseMeasure {
    pub beta_mean: DVector<f64>,
    pub beta_cov: DMatrix<f64>,
    pub phi_a: f64,
    pub phi_b: f64,
    pub cov: Vec<CovBase>,
    beta_prec: DMatrix<f64>,
    beta_chol_l: DMatrix<f64>,
}

impl BaseMeasure {
    /// `beta ~ N(b_ols, n * Cov(b_ols))`, `phi ~ IG(2, s2_ols)`, and
    /// covariate priors centred on the column moments.
    pub fn empirical(y: &[f64], x: &[Vec<f64>], kinds: &[CovariateKind]) -> Result<Self> {
        let n = y.len();
        let p = kinds.len();
        let design = DMatrix::from_fn(n, p + 1, |i, j| if j == 0 { 1.0 } else { x[i][j - 1] });
        let fit = ols(&design, &DVector::from_column_slice(y))?;
        let beta_cov = &fit.cov * n as f64;
        let cov = kinds
            .iter()
            .enumerate()
            .map(|(j, kind)| {
                let col: Vec<f64> = x.iter().map(|r| r[j]).collect();
                let mean = col.iter().sum::<f64>() / n as f64;
                let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0).max(1.0);
                match kind {
                    CovariateKind::Gaussian => {
                        let s2 = var.max(1e-8);
                        CovBase::Gaussian { m0: mean, s0: s2.sqrt(), a: 2.0, b: s2 }
                    }
                    CovariateKind::Bernoulli => {
                        let pb = mean.clamp(0.05, 0.95);
                        CovBase::Bernoulli { a: 2.0 * pb, b: 2.0 * (1.0 - pb) }
                    }
                    CovariateKind::Poisson => CovBase::Poisson { shape: mean.max(0.1), rate: 1.0 },
                }
            })
            .collect();
        Self::new(fit.coef, beta_cov, 2.0, fit.sigma2.max(1e-8), cov)
    }

    pub fn new(beta_mean: DVector<f64>, beta_cov: DMatrix<f64>, phi_a: f64, phi_b: f64, cov: Vec<CovBase>) -> Result<Self> {
        let chol = beta_cov.clone().cholesky().ok_or_else(|| Error::SingularModel("base coefficient covariance is not positive definite".into()))?;
        Ok(Self { beta_prec: chol.inverse(), beta_chol_l: chol.l(), beta_mean, beta_cov, phi_a, phi_b, cov })
    }

    pub fn draw(&self, rng: &mut RngHandle) -> Cluster {
        let k = self.beta_mean.len();
        let z = DVector::from_iterator(k, (0..k).map(|_| rng.std_normal()));
        let beta = (&self.beta_mean + &self.beta_chol_l * z).iter().copied().collect();
        let phi = self.phi_b / rng.gamma(self.phi_a, 1.0);
        let cov = self
            .cov
            .iter()
            .map(|c| match *c {
                CovBase::Gaussian { m0, s0, a, b } => CovParam::Gaussian { mean: rng.normal(m0, s0), var: b / rng.gamma(a, 1.0) },
                CovBase::Bernoulli { a, b } => CovParam::Bernoulli { p: beta_draw(a, b, rng) },
                CovBase::Poisson { shape, rate } => CovParam::Poisson { lambda: rng.gamma(shape, rate) },
            })
            .collect();
        Cluster { beta, phi, cov }
    }
}

fn beta_draw(a: f64, b: f64, rng: &mut RngHandle) -> f64 {
    let x = rng.gamma(a, 1.0);
    let y = rng.gamma(b, 1.0);
    (x / (x + y)).clamp(1e-12, 1.0 - 1e-12)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DpState {
    /// Cluster index of every subject.
    pub assignments: Vec<usize>,
    pub clusters: Vec<Cluster>,
    pub alpha: f64,
}

impl DpState {
    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.clusters.len()];
        for &c in &self.assignments {
            s[c] += 1;
        }
        s
    }
}

/// Normalized weights over `[clusters.., base draw]` at covariate row `x`.
pub fn dp_weights(state: &DpState, prior: &Cluster, x: &[f64]) -> Vec<f64> {
    let sizes = state.sizes();
    let mut logw: Vec<f64> = state
        .clusters
        .iter()
        .zip(&sizes)
        .map(|(c, &n)| if n == 0 { f64::NEG_INFINITY } else { (n as f64).ln() + c.cov_ln_pdf(x) })
        .collect();
    logw.push(if state.alpha > 0.0 { state.alpha.ln() + prior.cov_ln_pdf(x) } else { f64::NEG_INFINITY });
    let m = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        // Every component assigns zero density: fall back to cluster sizes.
        let total: f64 = sizes.iter().map(|&n| n as f64).sum::<f64>() + state.alpha;
        let mut w: Vec<f64> = sizes.iter().map(|&n| n as f64 / total).collect();
        w.push(state.alpha / total);
        return w;
    }
    let w: Vec<f64> = logw.iter().map(|l| (l - m).exp()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// Regression function `E[Y | x]` under one posterior state.
pub fn dp_regression(state: &DpState, prior: &Cluster, x: &[f64]) -> f64 {
    let w = dp_weights(state, prior, x);
    let k = state.clusters.len();
    let mut out = w[k] * prior.mean(x);
    for (c, wc) in state.clusters.iter().zip(&w[..k]) {
        if *wc > 0.0 {
            out += wc * c.mean(x);
        }
    }
    out
}

pub struct DpFit {
    pub states: Vec<DpState>,
    /// Base-measure draw paired with each retained state.
    pub prior_draws: Vec<Cluster>,
    pub chain: Vec<usize>,
    pub iter: Vec<usize>,
    pub base: BaseMeasure,
    /// `alpha` and `n_clusters` per retained state.
    pub draws: DrawsMatrix,
}

impl DpFit {
    pub fn predict(&self, rows: &[Vec<f64>]) -> Predictions {
        let values = parallel::install(|| {
            self.states
                .par_iter()
                .zip(&self.prior_draws)
                .map(|(s, p)| rows.iter().map(|x| dp_regression(s, p, x)).collect())
                .collect()
        });
        Predictions { chain: self.chain.clone(), iter: self.iter.clone(), values }
    }
}

struct Sampler<'a> {
    y: &'a [f64],
    x: &'a [Vec<f64>],
    base: &'a BaseMeasure,
    cfg: &'a DpConfig,
}

impl Sampler<'_> {
    fn update_params(&self, members: &[usize], old: &Cluster, rng: &mut RngHandle) -> Cluster {
        let k = self.base.beta_mean.len();
        // beta | phi
        let mut prec = self.base.beta_prec.clone();
        let mut rhs = &self.base.beta_prec * &self.base.beta_mean;
        for &i in members {
            let xt: Vec<f64> = std::iter::once(1.0).chain(self.x[i].iter().copied()).collect();
            for a in 0..k {
                rhs[a] += xt[a] * self.y[i] / old.phi;
                for b in 0..k {
                    prec[(a, b)] += xt[a] * xt[b] / old.phi;
                }
            }
        }
        let beta = match prec.cholesky() {
            Some(chol) => {
                let mean = chol.solve(&rhs);
                let z = DVector::from_iterator(k, (0..k).map(|_| rng.std_normal()));
                let dev = chol.l().transpose().solve_upper_triangular(&z).unwrap_or_else(|| DVector::zeros(k));
                (mean + dev).iter().copied().collect()
            }
            None => old.beta.clone(),
        };
        let mut c = Cluster { beta, phi: old.phi, cov: old.cov.clone() };
        // phi | beta
        let rss: f64 = members.iter().map(|&i| (self.y[i] - c.mean(&self.x[i])).powi(2)).sum();
        c.phi = (self.base.phi_b + 0.5 * rss) / rng.gamma(self.base.phi_a + 0.5 * members.len() as f64, 1.0);
        // covariate parameters
        let nc = members.len() as f64;
        for (j, cb) in self.base.cov.iter().enumerate() {
            let xs = members.iter().map(|&i| self.x[i][j]);
            c.cov[j] = match (*cb, old.cov[j]) {
                (CovBase::Gaussian { m0, s0, a, b }, CovParam::Gaussian { var, .. }) => {
                    let sum: f64 = xs.clone().sum();
                    let pv = 1.0 / (1.0 / (s0 * s0) + nc / var);
                    let mean = rng.normal(pv * (m0 / (s0 * s0) + sum / var), pv.sqrt());
                    let ss: f64 = xs.map(|v| (v - mean).powi(2)).sum();
                    CovParam::Gaussian { mean, var: (b + 0.5 * ss) / rng.gamma(a + 0.5 * nc, 1.0) }
                }
                (CovBase::Bernoulli { a, b }, _) => {
                    let s: f64 = xs.sum();
                    CovParam::Bernoulli { p: beta_draw(a + s, b + nc - s, rng) }
                }
                (CovBase::Poisson { shape, rate }, _) => CovParam::Poisson { lambda: rng.gamma(shape + xs.sum::<f64>(), rate + nc) },
                (_, other) => other,
            };
        }
        c
    }

    fn reassign(&self, st: &mut DpState, counts: &mut Vec<usize>, rng: &mut RngHandle) {
        let m = self.cfg.aux_m;
        for i in 0..self.y.len() {
            let ci = st.assignments[i];
            counts[ci] -= 1;
            let mut aux = Vec::with_capacity(m);
            if counts[ci] == 0 {
                // Singleton: its parameters become the first auxiliary component.
                let last = st.clusters.len() - 1;
                aux.push(st.clusters.swap_remove(ci));
                counts.swap_remove(ci);
                if ci != last {
                    for a in st.assignments.iter_mut() {
                        if *a == last {
                            *a = ci;
                        }
                    }
                }
            }
            while aux.len() < m {
                aux.push(self.base.draw(rng));
            }
            let (y, x) = (self.y[i], &self.x[i]);
            let mut logp: Vec<f64> = st.clusters.iter().zip(counts.iter()).map(|(c, &n)| (n as f64).ln() + c.ln_lik(y, x)).collect();
            let la = (st.alpha / m as f64).ln();
            logp.extend(aux.iter().map(|c| la + c.ln_lik(y, x)));
            let pick = sample_log_categorical(&logp, rng);
            if pick < st.clusters.len() {
                st.assignments[i] = pick;
                counts[pick] += 1;
            } else {
                st.clusters.push(aux.swap_remove(pick - st.clusters.len()));
                counts.push(1);
                st.assignments[i] = st.clusters.len() - 1;
            }
        }
    }

    fn refresh(&self, st: &mut DpState, rng: &mut RngHandle) {
        let mut members = vec![Vec::new(); st.clusters.len()];
        for (i, &c) in st.assignments.iter().enumerate() {
            members[c].push(i);
        }
        for (c, mem) in st.clusters.iter_mut().zip(&members) {
            *c = self.update_params(mem, c, rng);
        }
    }

    fn update_alpha(&self, st: &mut DpState, rng: &mut RngHandle) {
        if let AlphaPrior::Gamma { shape, rate } = self.cfg.alpha {
            let n = self.y.len() as f64;
            let k = st.clusters.len() as f64;
            let g1 = rng.gamma(st.alpha + 1.0, 1.0);
            let g2 = rng.gamma(n, 1.0);
            let eta = (g1 / (g1 + g2)).max(1e-300);
            let r = rate - eta.ln();
            let odds = (shape + k - 1.0) / (n * r);
            let pi = odds / (1.0 + odds);
            let a = if rng.uniform() < pi { shape + k } else { shape + k - 1.0 };
            st.alpha = rng.gamma(a.max(1e-8), r);
        }
    }

    fn init(&self, rng: &mut RngHandle) -> DpState {
        let n = self.y.len();
        let k = self.cfg.init_k.min(n);
        let mut assignments: Vec<usize> = (0..n).map(|_| rng.index(k)).collect();
        let mut used: Vec<usize> = assignments.clone();
        used.sort_unstable();
        used.dedup();
        for a in assignments.iter_mut() {
            *a = used.binary_search(a).expect("label present");
        }
        let alpha = match self.cfg.alpha {
            AlphaPrior::Fixed(a) => a,
            AlphaPrior::Gamma { shape, rate } => shape / rate,
        };
        let start = Cluster { phi: self.base.phi_b / self.base.phi_a.max(1.0), ..self.base.draw(rng) };
        let clusters = vec![start; used.len()];
        let mut st = DpState { assignments, clusters, alpha };
        for _ in 0..2 {
            self.refresh(&mut st, rng);
        }
        st
    }

    fn run_chain(&self, chain: usize, cc: &ChainConfig) -> Vec<(usize, DpState, Cluster)> {
        let mut rng = RngHandle::keyed(cc.seed, DP_DOMAIN, chain as u64);
        let mut st = self.init(&mut rng);
        let mut counts = st.sizes();
        let mut out = Vec::with_capacity(cc.retained_per_chain());
        for it in 0..cc.iter {
            self.reassign(&mut st, &mut counts, &mut rng);
            self.refresh(&mut st, &mut rng);
            self.update_alpha(&mut st, &mut rng);
            if cc.keeps(it) {
                let prior = self.base.draw(&mut rng);
                out.push((it, st.clone(), prior));
            }
        }
        out
    }
}

/// Fits the DP mixture to outcome `y` and covariate rows `x`.
pub fn dp_fit(y: &[f64], x: &[Vec<f64>], cfg: &DpConfig, chains: &ChainConfig) -> Result<DpFit> {
    chains.validate()?;
    let n = y.len();
    if n == 0 || x.len() != n {
        return Err(Error::Shape(format!("{n} outcomes for {} covariate rows", x.len())));
    }
    let p = x[0].len();
    if x.iter().any(|r| r.len() != p) {
        return Err(Error::Shape("covariate rows differ in length".into()));
    }
    cfg.validate(p)?;
    for (j, kind) in cfg.kinds.iter().enumerate() {
        let bad = x.iter().any(|r| match kind {
            CovariateKind::Gaussian => !r[j].is_finite(),
            CovariateKind::Bernoulli => r[j] != 0.0 && r[j] != 1.0,
            CovariateKind::Poisson => !(r[j] >= 0.0 && r[j].fract() == 0.0),
        });
        if bad {
            return Err(Error::Schema(format!("covariate column {j} does not match kind {kind:?}")));
        }
    }
    let base = BaseMeasure::empirical(y, x, &cfg.kinds)?;
    let sampler = Sampler { y, x, base: &base, cfg };
    let per_chain: Vec<Vec<(usize, DpState, Cluster)>> =
        parallel::install(|| (0..chains.n_chains).into_par_iter().map(|c| sampler.run_chain(c, chains)).collect());

    let (mut states, mut prior_draws, mut chain, mut iter, mut rows) = (vec![], vec![], vec![], vec![], vec![]);
    for (c, out) in per_chain.into_iter().enumerate() {
        for (it, st, pr) in out {
            rows.push(vec![st.alpha, st.clusters.len() as f64]);
            states.push(st);
            prior_draws.push(pr);
            chain.push(c);
            iter.push(it);
        }
    }
    let draws = DrawsMatrix::from_rows(vec!["alpha".into(), "n_clusters".into()], rows, chain.clone(), iter.clone())?;
    Ok(DpFit { states, prior_draws, chain, iter, base, draws })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian_cluster(y: f64, center: f64, g: f64) -> Cluster {
        Cluster { beta: vec![y, 0.0], phi: 1.0, cov: vec![CovParam::Gaussian { mean: center, var: g }] }
    }

    #[test]
    fn kernel_limit_is_nadaraya_watson() {
        let xs = [-1.3, -0.2, 0.4, 0.9, 2.0];
        let ys = [0.5, -1.0, 2.0, 0.3, 1.1];
        let g = 0.3;
        let state = DpState {
            assignments: (0..5).collect(),
            clusters: xs.iter().zip(&ys).map(|(&x, &y)| gaussian_cluster(y, x, g)).collect(),
            alpha: 0.0,
        };
        let prior = gaussian_cluster(100.0, 0.0, 1.0);
        for x in [-2.0, -0.5, 0.1, 0.7, 1.5] {
            let k: Vec<f64> = xs.iter().map(|xi| (-(x - xi) * (x - xi) / (2.0 * g)).exp()).collect();
            let nw = k.iter().zip(&ys).map(|(k, y)| k * y).sum::<f64>() / k.iter().sum::<f64>();
            assert!((dp_regression(&state, &prior, &[x]) - nw).abs() < 1e-10);
        }
    }

    #[test]
    fn weights_sum_to_one() {
        let state = DpState {
            assignments: vec![0, 0, 1],
            clusters: vec![gaussian_cluster(1.0, 0.0, 1.0), gaussian_cluster(2.0, 5.0, 0.5)],
            alpha: 0.7,
        };
        let prior = gaussian_cluster(0.0, 1.0, 2.0);
        for x in [-50.0, 0.0, 3.0, 400.0] {
            let w = dp_weights(&state, &prior, &[x]);
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(w.iter().all(|v| v.is_finite() && *v >= 0.0));
        }
    }

    #[test]
    fn kinds_are_inferred_and_checked() {
        assert_eq!(CovariateKind::infer(&[0.0, 1.0, 1.0]), CovariateKind::Bernoulli);
        assert_eq!(CovariateKind::infer(&[0.0, 3.0, 1.0]), CovariateKind::Poisson);
        assert_eq!(CovariateKind::infer(&[0.5, 1.0]), CovariateKind::Gaussian);
        let x = vec![vec![0.5], vec![1.0], vec![2.0]];
        let cfg = DpConfig::new(vec![CovariateKind::Bernoulli]);
        assert!(matches!(dp_fit(&[1.0, 2.0, 3.0], &x, &cfg, &ChainConfig::new(1, 10, 5, 1)), Err(Error::Schema(_))));
        let cfg = DpConfig::new(vec![]);
        assert!(matches!(dp_fit(&[1.0, 2.0, 3.0], &x, &cfg, &ChainConfig::new(1, 10, 5, 1)), Err(Error::Schema(_))));
    }

    #[test]
    fn two_regimes_are_separated() {
        let mut rng = RngHandle::new(4, 0);
        let n = 200;
        let x: Vec<Vec<f64>> = (0..n).map(|i| vec![if i < n / 2 { -3.0 } else { 3.0 } + 0.3 * rng.std_normal()]).collect();
        let y: Vec<f64> = x.iter().map(|r| if r[0] < 0.0 { 1.0 } else { 2.0 * r[0] } + 0.1 * rng.std_normal()).collect();
        let fit = dp_fit(&y, &x, &DpConfig::new(vec![CovariateKind::Gaussian]), &ChainConfig::new(1, 300, 150, 2)).unwrap();
        let pred = fit.predict(&[vec![-3.0], vec![3.0]]);
        let mean = |j: usize| pred.values.iter().map(|r| r[j]).sum::<f64>() / pred.n_draws() as f64;
        assert!((mean(0) - 1.0).abs() < 0.1, "{}", mean(0));
        assert!((mean(1) - 6.0).abs() < 0.2, "{}", mean(1));
        assert!(fit.states.iter().all(|s| s.sizes().iter().sum::<usize>() == n && s.sizes().iter().all(|&c| c > 0)));
    }
}
