//! Gaussian-process regression with a squared-exponential kernel,
//! `k(x, x') = eta exp(-rho |x - x'|^2) + 0.01 [same row]`, and Gaussian
//! noise. Hyperparameters get `alpha ~ N+(0, 1)` with `eta = alpha^2`,
//! `eps ~ IG(5, 5)` with `rho = 1 / (2 eps^2)`, and a half-normal noise sd.
//!
//! Function draws at test rows are exact: a joint prior draw over test and
//! training points is corrected by the training residual.

use std::f64::consts::LN_2;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::Predictions;
use crate::error::{invalid, Error, Result};
use crate::linalg::robust_cholesky;
use crate::mcmc::{run_chains, ChainConfig, DrawsMatrix, LogPosteriorTarget, Transform};
use crate::parallel;
use crate::prob::{inv_gamma_ln_pdf, normal_ln_pdf, RngHandle};

/// White-noise term added whenever two rows are the same subject's row.
pub const GP_JITTER: f64 = 0.01;
const GP_DOMAIN: u64 = 0x6B;
const JITTER_TRIES: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GpHyper {
    pub eta: f64,
    pub rho: f64,
    pub noise_sd: f64,
}

/// Smooth part of the kernel, without the row jitter.
pub fn gp_kernel(x1: &[f64], x2: &[f64], eta: f64, rho: f64) -> f64 {
    let d2: f64 = x1.iter().zip(x2).map(|(a, b)| (a - b) * (a - b)).sum();
    eta * (-rho * d2).exp()
}

/// Prior covariance of `f` over `rows`, jitter on the diagonal.
pub fn kernel_matrix(rows: &[Vec<f64>], eta: f64, rho: f64) -> DMatrix<f64> {
    let n = rows.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = eta + GP_JITTER;
        for j in 0..i {
            let v = gp_kernel(&rows[i], &rows[j], eta, rho);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// Test rows that coincide with a training subject's row; they share that
/// row's jitter term. Matches require bitwise-equal covariates.
pub fn matching_rows(train: &[Vec<f64>], test: &[Vec<f64>]) -> Vec<Option<usize>> {
    let n = train.len();
    test.iter().enumerate().map(|(t, r)| if n > 0 && train[t % n] == *r { Some(t % n) } else { None }).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct GpConfig {
    /// Fixed values; `None` samples the hyperparameter under its prior.
    pub eta: Option<f64>,
    pub rho: Option<f64>,
    pub noise_sd: Option<f64>,
    /// Hyperparameter draws turned into function draws, evenly spaced.
    pub pred_draws: usize,
}

impl Default for GpConfig {
    fn default() -> Self {
        Self { eta: None, rho: None, noise_sd: None, pred_draws: 200 }
    }
}

impl GpConfig {
    pub fn fixed(h: GpHyper) -> Self {
        Self { eta: Some(h.eta), rho: Some(h.rho), noise_sd: Some(h.noise_sd), ..Self::default() }
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [("eta", self.eta), ("rho", self.rho), ("noise_sd", self.noise_sd)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(invalid(format!("fixed {name} must be positive")));
                }
            }
        }
        if self.pred_draws == 0 {
            return Err(invalid("pred_draws must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Free {
    Alpha,
    Eps,
    Noise,
}

struct GpTarget<'a> {
    x: &'a [Vec<f64>],
    y: DVector<f64>,
    cfg: &'a GpConfig,
    free: Vec<Free>,
    d2: DMatrix<f64>,
}

impl GpTarget<'_> {
    fn hyper(&self, v: &[f64]) -> GpHyper {
        let mut h = GpHyper { eta: self.cfg.eta.unwrap_or(1.0), rho: self.cfg.rho.unwrap_or(1.0), noise_sd: self.cfg.noise_sd.unwrap_or(1.0) };
        for (f, &val) in self.free.iter().zip(v) {
            match f {
                Free::Alpha => h.eta = val * val,
                Free::Eps => h.rho = 1.0 / (2.0 * val * val),
                Free::Noise => h.noise_sd = val,
            }
        }
        h
    }

    fn marginal_cov(&self, h: &GpHyper) -> DMatrix<f64> {
        let n = self.x.len();
        DMatrix::from_fn(n, n, |i, j| {
            let base = h.eta * (-h.rho * self.d2[(i, j)]).exp();
            if i == j {
                base + GP_JITTER + h.noise_sd * h.noise_sd
            } else {
                base
            }
        })
    }
}

impl LogPosteriorTarget for GpTarget<'_> {
    fn dim(&self) -> usize {
        self.free.len()
    }

    fn param_names(&self) -> Vec<String> {
        self.free
            .iter()
            .map(|f| match f {
                Free::Alpha => "alpha",
                Free::Eps => "eps",
                Free::Noise => "noise_sd",
            })
            .map(String::from)
            .collect()
    }

    fn log_posterior(&self, v: &[f64]) -> f64 {
        let mut lp = 0.0;
        for (f, &val) in self.free.iter().zip(v) {
            if !(val > 0.0) {
                return f64::NEG_INFINITY;
            }
            lp += match f {
                Free::Alpha | Free::Noise => LN_2 + normal_ln_pdf(val, 0.0, 1.0),
                Free::Eps => inv_gamma_ln_pdf(val, 5.0, 5.0),
            };
        }
        let h = self.hyper(v);
        let Some(chol) = self.marginal_cov(&h).cholesky() else {
            return f64::NEG_INFINITY;
        };
        let alpha = chol.solve(&self.y);
        let logdet: f64 = chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>() * 2.0;
        lp - 0.5 * self.y.dot(&alpha) - 0.5 * logdet
    }

    fn initial_point(&self) -> Vec<f64> {
        let var = self.y.norm_squared() / self.y.len() as f64;
        self.free
            .iter()
            .map(|f| match f {
                Free::Alpha => (0.5 * var).sqrt().clamp(0.1, 3.0),
                Free::Eps => 1.0,
                Free::Noise => (0.5 * var).sqrt().clamp(0.05, 3.0),
            })
            .collect()
    }

    fn transforms(&self) -> Vec<Transform> {
        vec![Transform::Log; self.free.len()]
    }

    fn output_names(&self) -> Vec<String> {
        vec!["eta".into(), "rho".into(), "noise_sd".into()]
    }

    fn output(&self, v: &[f64]) -> Vec<f64> {
        let h = self.hyper(v);
        vec![h.eta, h.rho, h.noise_sd]
    }
}

/// Everything needed to draw `f` at the test rows for one hyperparameter
/// setting.
struct Conditioner {
    chol_train: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    joint_l: DMatrix<f64>,
    cross: DMatrix<f64>,
    /// Position of every training row in the joint point set.
    train_pos: Vec<usize>,
    noise_sd: f64,
}

impl Conditioner {
    fn new(train: &[Vec<f64>], test: &[Vec<f64>], matches: &[Option<usize>], h: &GpHyper) -> Result<Self> {
        let n = train.len();
        let mut train_pos = vec![usize::MAX; n];
        for (t, m) in matches.iter().enumerate() {
            if let Some(j) = m {
                train_pos[*j] = t;
            }
        }
        let mut joint: Vec<Vec<f64>> = test.to_vec();
        for j in 0..n {
            if train_pos[j] == usize::MAX {
                train_pos[j] = joint.len();
                joint.push(train[j].clone());
            }
        }
        let mut kn = kernel_matrix(train, h.eta, h.rho);
        for i in 0..n {
            kn[(i, i)] += h.noise_sd * h.noise_sd;
        }
        let (chol_train, _) = robust_cholesky(&kn, JITTER_TRIES)?;
        let (chol_joint, _) = robust_cholesky(&kernel_matrix(&joint, h.eta, h.rho), JITTER_TRIES)?;
        let cross = DMatrix::from_fn(test.len(), n, |t, j| {
            gp_kernel(&test[t], &train[j], h.eta, h.rho) + if matches[t] == Some(j) { GP_JITTER } else { 0.0 }
        });
        Ok(Self { chol_train, joint_l: chol_joint.l(), cross, train_pos, noise_sd: h.noise_sd })
    }

    fn draw(&self, y: &DVector<f64>, rng: &mut RngHandle) -> Vec<f64> {
        let m = self.joint_l.nrows();
        let z = DVector::from_iterator(m, (0..m).map(|_| rng.std_normal()));
        let f = &self.joint_l * z;
        let r = DVector::from_iterator(y.len(), (0..y.len()).map(|j| y[j] - f[self.train_pos[j]] - self.noise_sd * rng.std_normal()));
        let corr = &self.cross * self.chol_train.solve(&r);
        (0..self.cross.nrows()).map(|t| f[t] + corr[t]).collect()
    }
}

/// Posterior mean and variance of `f` at `test` for fixed hyperparameters
/// (outcome already centred).
pub fn gp_posterior_moments(
    train: &[Vec<f64>],
    y: &[f64],
    test: &[Vec<f64>],
    matches: &[Option<usize>],
    h: &GpHyper,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = train.len();
    let mut kn = kernel_matrix(train, h.eta, h.rho);
    for i in 0..n {
        kn[(i, i)] += h.noise_sd * h.noise_sd;
    }
    let (chol, _) = robust_cholesky(&kn, JITTER_TRIES)?;
    let alpha = chol.solve(&DVector::from_column_slice(y));
    let mut mean = Vec::with_capacity(test.len());
    let mut var = Vec::with_capacity(test.len());
    for (t, x) in test.iter().enumerate() {
        let k = DVector::from_fn(n, |j, _| gp_kernel(x, &train[j], h.eta, h.rho) + if matches[t] == Some(j) { GP_JITTER } else { 0.0 });
        mean.push(k.dot(&alpha));
        let v = chol.l().solve_lower_triangular(&k).ok_or_else(|| Error::Cholesky("triangular solve failed".into()))?;
        var.push((h.eta + GP_JITTER - v.norm_squared()).max(0.0));
    }
    Ok((mean, var))
}

pub struct GpFit {
    /// `eta, rho, noise_sd` per retained draw.
    pub hyper: DrawsMatrix,
    pub predictions: Predictions,
}

/// Samples hyperparameters (unless all are fixed) and draws the regression
/// function at `test`. The outcome is centred before fitting and the mean
/// added back to the predictions.
pub fn gp_fit_predict(train: &[Vec<f64>], y: &[f64], test: &[Vec<f64>], cfg: &GpConfig, chains: &ChainConfig) -> Result<GpFit> {
    cfg.validate()?;
    chains.validate()?;
    let n = train.len();
    if n == 0 || y.len() != n {
        return Err(Error::Shape(format!("{} outcomes for {n} training rows", y.len())));
    }
    let p = train[0].len();
    if train.iter().chain(test).any(|r| r.len() != p) {
        return Err(Error::Shape("covariate rows differ in length".into()));
    }
    let ybar = y.iter().sum::<f64>() / n as f64;
    let yc = DVector::from_iterator(n, y.iter().map(|v| v - ybar));
    let matches = matching_rows(train, test);

    let mut free = Vec::new();
    if cfg.eta.is_none() {
        free.push(Free::Alpha);
    }
    if cfg.rho.is_none() {
        free.push(Free::Eps);
    }
    if cfg.noise_sd.is_none() {
        free.push(Free::Noise);
    }
    let hyper = if free.is_empty() {
        let per = chains.retained_per_chain();
        let (mut rows, mut ch, mut it) = (vec![], vec![], vec![]);
        for c in 0..chains.n_chains {
            for k in 0..per {
                rows.push(vec![cfg.eta.unwrap(), cfg.rho.unwrap(), cfg.noise_sd.unwrap()]);
                ch.push(c);
                it.push(chains.burnin + k * chains.thin);
            }
        }
        DrawsMatrix::from_rows(vec!["eta".into(), "rho".into(), "noise_sd".into()], rows, ch, it)?
    } else {
        let d2 = DMatrix::from_fn(n, n, |i, j| train[i].iter().zip(&train[j]).map(|(a, b)| (a - b) * (a - b)).sum());
        let target = GpTarget { x: train, y: yc.clone(), cfg, free, d2 };
        run_chains(&target, chains)?
    };

    let total = hyper.n_rows();
    let k = cfg.pred_draws.min(total);
    let picks: Vec<usize> = (0..k).map(|i| i * total / k).collect();
    let draw_one = |m: usize, cond: &Conditioner| -> Vec<f64> {
        let mut rng = RngHandle::keyed(chains.seed, GP_DOMAIN, m as u64);
        cond.draw(&yc, &mut rng).into_iter().map(|v| v + ybar).collect()
    };
    let hyper_at = |m: usize| {
        let r = hyper.row(m);
        GpHyper { eta: r[0], rho: r[1], noise_sd: r[2] }
    };
    let values: Vec<Vec<f64>> = if total > 0 && (0..total).all(|m| hyper.row(m) == hyper.row(0)) {
        let cond = Conditioner::new(train, test, &matches, &hyper_at(0))?;
        parallel::install(|| picks.par_iter().map(|&m| draw_one(m, &cond)).collect())
    } else {
        parallel::install(|| {
            picks
                .par_iter()
                .map(|&m| Conditioner::new(train, test, &matches, &hyper_at(m)).map(|c| draw_one(m, &c)))
                .collect::<Result<Vec<_>>>()
        })?
    };
    let predictions = Predictions {
        chain: picks.iter().map(|&m| hyper.chain_ids()[m]).collect(),
        iter: picks.iter().map(|&m| hyper.iterations()[m]).collect(),
        values,
    };
    Ok(GpFit { hyper, predictions })
}
