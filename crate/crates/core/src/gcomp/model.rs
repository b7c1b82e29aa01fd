//! Sequential Gaussian models for time-varying confounders and the outcome,
//! with priors that shrink coefficients harder the further back in time
//! their covariate lies.
//!
//! The model for `L_t` (`t = 1..=T`) regresses on `(1, L_0..L_{t-1},
//! A_0..A_{t-1})`; the outcome model regresses `Y` on the full history
//! `(1, L_0..L_T, A_0..A_T)`. A covariate from time `s` has lag `t - s` in
//! the model for `L_t` and lag `T + 1 - s` in the outcome model.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use super::ShrinkageSpec;
use crate::data::LongitudinalDataset;
use crate::error::{Error, Result};
use crate::linalg::ols;
use crate::mcmc::{run_chains, ChainConfig, DrawsMatrix, LogPosteriorTarget, Transform};
use crate::models::GaussianSuffStats;
use crate::prob::{inv_gamma_ln_pdf, normal_ln_pdf, RngHandle};

/// Prior sd of intercepts and of unshrunk treatment coefficients.
const WIDE_SD: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShrinkageFamily {
    Ridge,
    Horseshoe,
}

/// Column prefix of the model for `L_t`, or of the outcome model.
pub fn model_prefix(t: Option<usize>) -> String {
    match t {
        Some(t) => format!("L{t}"),
        None => "Y".into(),
    }
}

struct SeqModel {
    prefix: String,
    stats: GaussianSuffStats,
    /// Lag of each coefficient; `None` for coefficients with the wide prior.
    lags: Vec<Option<usize>>,
    coef_names: Vec<String>,
    max_lag: usize,
    /// Offsets of this model's coefficients, variance and scales in the
    /// parameter vector.
    coef_at: usize,
    sigma2_at: usize,
    scales_at: usize,
    init_coef: Vec<f64>,
    init_sigma2: f64,
}

#[derive(Clone, Copy, Debug)]
enum BlockKind {
    Coefs(usize),
    Variance(usize),
    Scales(usize),
}

pub struct SequentialTarget {
    spec: ShrinkageSpec,
    models: Vec<SeqModel>,
    block_kinds: Vec<BlockKind>,
    dim: usize,
}

fn half_cauchy_ln_pdf(x: f64, scale: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    (2.0 / (PI * scale)).ln() - (x / scale).powi(2).ln_1p()
}

impl SequentialTarget {
    pub fn new(data: &LongitudinalDataset, spec: &ShrinkageSpec) -> Result<Self> {
        spec.validate()?;
        let tp1 = data.time_points();
        if tp1 < 2 {
            return Err(Error::Redirect(
                "a single time point is a point-treatment problem; use the linear model with standardization".into(),
            ));
        }
        let big_t = tp1 - 1;
        let n = data.n();
        let mut models = Vec::with_capacity(tp1);
        let mut offset = 0;
        for t in (1..=big_t).map(Some).chain(std::iter::once(None)) {
            // History length: covariates from times 0..h.
            let (h, anchor) = match t {
                Some(t) => (t, t),
                None => (tp1, tp1),
            };
            let p = 1 + 2 * h;
            let x = DMatrix::from_fn(n, p, |i, j| match j {
                0 => 1.0,
                j if j <= h => data.l[j - 1][i],
                j => data.a[j - 1 - h][i],
            });
            let y = match t {
                Some(t) => DVector::from_column_slice(&data.l[t]),
                None => DVector::from_column_slice(&data.y),
            };
            let prefix = model_prefix(t);
            let mut lags = vec![None];
            let mut coef_names = vec![format!("{prefix}_int")];
            for s in 0..h {
                lags.push(Some(anchor - s));
                coef_names.push(format!("{prefix}_L{s}"));
            }
            for s in 0..h {
                lags.push(spec.shrink_treatment.then_some(anchor - s));
                coef_names.push(format!("{prefix}_A{s}"));
            }
            let (init_coef, init_sigma2) = if spec.prior_only {
                (vec![0.0; p], spec.variance_b / (spec.variance_a + 1.0))
            } else {
                let f = ols(&x, &y)?;
                (f.coef.iter().copied().collect(), f.sigma2.max(1e-8))
            };
            let coef_at = offset;
            let sigma2_at = coef_at + p;
            let scales_at = sigma2_at + 1;
            offset = scales_at + if spec.family == ShrinkageFamily::Horseshoe { h + 1 } else { 0 };
            models.push(SeqModel {
                prefix,
                stats: GaussianSuffStats::new(&x, &y),
                lags,
                coef_names,
                max_lag: h,
                coef_at,
                sigma2_at,
                scales_at,
                init_coef,
                init_sigma2,
            });
        }
        let mut block_kinds = Vec::new();
        for m in 0..models.len() {
            block_kinds.push(BlockKind::Coefs(m));
            block_kinds.push(BlockKind::Variance(m));
            if spec.family == ShrinkageFamily::Horseshoe {
                block_kinds.push(BlockKind::Scales(m));
            }
        }
        Ok(Self { spec: spec.clone(), models, block_kinds, dim: offset })
    }

    fn is_horseshoe(&self) -> bool {
        self.spec.family == ShrinkageFamily::Horseshoe
    }

    /// Prior sd of each coefficient of model `m` at parameter point `x`.
    fn prior_sds(&self, m: &SeqModel, x: &[f64]) -> Vec<f64> {
        let sigma = x[m.sigma2_at].sqrt();
        m.lags
            .iter()
            .map(|lag| match lag {
                None => WIDE_SD,
                Some(k) if self.is_horseshoe() => x[m.scales_at + k - 1] * x[m.scales_at + m.max_lag],
                Some(k) => self.spec.lambda.powi(-(*k as i32)) * sigma,
            })
            .collect()
    }

    fn model_log_density(&self, m: &SeqModel, x: &[f64]) -> f64 {
        let sigma2 = x[m.sigma2_at];
        let coef = &x[m.coef_at..m.coef_at + m.lags.len()];
        let sds = self.prior_sds(m, x);
        let mut lp: f64 = coef.iter().zip(&sds).map(|(&b, &sd)| normal_ln_pdf(b, 0.0, sd)).sum();
        lp += inv_gamma_ln_pdf(sigma2, self.spec.variance_a, self.spec.variance_b);
        if self.is_horseshoe() {
            for k in 1..=m.max_lag {
                lp += half_cauchy_ln_pdf(x[m.scales_at + k - 1], 2f64.powi(-(k as i32)));
            }
            lp += half_cauchy_ln_pdf(x[m.scales_at + m.max_lag], self.spec.nu);
        }
        if !self.spec.prior_only {
            lp += m.stats.log_lik(coef, sigma2);
        }
        lp
    }

    fn draw_coefs(&self, m: &SeqModel, x: &[f64], rng: &mut RngHandle) -> Option<Vec<f64>> {
        let p = m.lags.len();
        let sigma2 = x[m.sigma2_at];
        let sds = self.prior_sds(m, x);
        let mut prec = DMatrix::zeros(p, p);
        let mut rhs = DVector::zeros(p);
        if !self.spec.prior_only {
            prec += &m.stats.xtx / sigma2;
            rhs += &m.stats.xty / sigma2;
        }
        for (j, sd) in sds.iter().enumerate() {
            prec[(j, j)] += 1.0 / (sd * sd);
        }
        let chol = prec.cholesky()?;
        let mean = chol.solve(&rhs);
        let z = DVector::from_iterator(p, (0..p).map(|_| rng.std_normal()));
        let dev = chol.l().transpose().solve_upper_triangular(&z)?;
        Some((mean + dev).iter().copied().collect())
    }

    fn draw_variance(&self, m: &SeqModel, x: &[f64], rng: &mut RngHandle) -> Option<Vec<f64>> {
        let coef = &x[m.coef_at..m.coef_at + m.lags.len()];
        let mut shape = self.spec.variance_a;
        let mut scale = self.spec.variance_b;
        if !self.spec.prior_only {
            shape += m.stats.n as f64 / 2.0;
            scale += m.stats.rss(coef) / 2.0;
        }
        if !self.is_horseshoe() {
            // Ridge prior sds scale with sigma, so the shrunk coefficients
            // also inform the variance.
            for (b, lag) in coef.iter().zip(&m.lags) {
                if let Some(k) = lag {
                    shape += 0.5;
                    scale += 0.5 * (b * self.spec.lambda.powi(*k as i32)).powi(2);
                }
            }
        }
        let g = rng.gamma(shape, scale);
        (g > 0.0 && g.is_finite()).then(|| vec![1.0 / g])
    }
}

impl LogPosteriorTarget for SequentialTarget {
    fn dim(&self) -> usize {
        self.dim
    }

    fn param_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.dim);
        for m in &self.models {
            names.extend(m.coef_names.iter().cloned());
            names.push(format!("{}_sigma2", m.prefix));
            if self.is_horseshoe() {
                names.extend((1..=m.max_lag).map(|k| format!("{}_tau{k}", m.prefix)));
                names.push(format!("{}_phi", m.prefix));
            }
        }
        names
    }

    fn log_posterior(&self, x: &[f64]) -> f64 {
        self.models.iter().map(|m| self.model_log_density(m, x)).sum()
    }

    fn initial_point(&self) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.dim);
        for m in &self.models {
            x.extend_from_slice(&m.init_coef);
            x.push(m.init_sigma2);
            if self.is_horseshoe() {
                x.extend((1..=m.max_lag).map(|k| 2f64.powi(-(k as i32))));
                x.push(self.spec.nu);
            }
        }
        x
    }

    fn blocks(&self) -> Vec<Vec<usize>> {
        self.block_kinds
            .iter()
            .map(|kind| match *kind {
                BlockKind::Coefs(i) => {
                    let m = &self.models[i];
                    (m.coef_at..m.coef_at + m.lags.len()).collect()
                }
                BlockKind::Variance(i) => vec![self.models[i].sigma2_at],
                BlockKind::Scales(i) => {
                    let m = &self.models[i];
                    (m.scales_at..=m.scales_at + m.max_lag).collect()
                }
            })
            .collect()
    }

    fn transforms(&self) -> Vec<Transform> {
        let mut t = vec![Transform::Identity; self.dim];
        for m in &self.models {
            t[m.sigma2_at] = Transform::Log;
            if self.is_horseshoe() {
                t[m.scales_at..=m.scales_at + m.max_lag].fill(Transform::Log);
            }
        }
        t
    }

    fn conditional_draw(&self, block: usize, x: &[f64], rng: &mut RngHandle) -> Option<Vec<f64>> {
        match self.block_kinds[block] {
            BlockKind::Coefs(i) => self.draw_coefs(&self.models[i], x, rng),
            BlockKind::Variance(i) => self.draw_variance(&self.models[i], x, rng),
            BlockKind::Scales(_) => None,
        }
    }
}

/// Joint posterior of all confounder models and the outcome model.
pub fn fit_sequential(data: &LongitudinalDataset, spec: &ShrinkageSpec, cfg: &ChainConfig) -> Result<DrawsMatrix> {
    run_chains(&SequentialTarget::new(data, spec)?, cfg)
}
