//! Adaptive random-walk Metropolis within Gibbs blocks.
//!
//! Each block proposes `z' = z + s * L * eps` in unconstrained coordinates.
//! During burn-in `log s` follows a Robbins-Monro recursion toward the target
//! acceptance rate, and at the end of each adaptation window `L` is replaced
//! by the Cholesky factor of the window's empirical covariance. Everything is
//! frozen once burn-in ends.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::draws::{ChainStats, DrawsMatrix};
use super::target::{validate_blocks, LogPosteriorTarget, Transform};
use crate::error::{invalid, Error, Result};
use crate::parallel;
use crate::prob::RngHandle;

const SCALAR_TARGET: f64 = 0.44;
const BLOCK_TARGET: f64 = 0.234;
const FIRST_WINDOW: usize = 100;

#[derive(Clone, Debug, PartialEq)]
pub enum Init {
    /// The target's own initial point, jittered per chain.
    Default,
    /// The same point for every chain, no jitter.
    Point(Vec<f64>),
    PerChain(Vec<Vec<f64>>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChainConfig {
    pub n_chains: usize,
    pub iter: usize,
    pub burnin: usize,
    pub thin: usize,
    pub seed: u64,
    pub init: Init,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self { n_chains: 4, iter: 4000, burnin: 2000, thin: 1, seed: 1, init: Init::Default }
    }
}

impl ChainConfig {
    pub fn new(n_chains: usize, iter: usize, burnin: usize, seed: u64) -> Self {
        Self { n_chains, iter, burnin, thin: 1, seed, init: Init::Default }
    }

    pub fn with_thin(mut self, thin: usize) -> Self {
        self.thin = thin;
        self
    }

    pub fn with_init(mut self, init: Init) -> Self {
        self.init = init;
        self
    }

    pub fn retained_per_chain(&self) -> usize {
        (self.iter - self.burnin).div_ceil(self.thin)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_chains == 0 || self.iter == 0 || self.thin == 0 {
            return Err(invalid("chains, iterations and thinning must be positive"));
        }
        if self.burnin >= self.iter {
            return Err(invalid(format!("burn-in {} must be below iterations {}", self.burnin, self.iter)));
        }
        if let Init::PerChain(v) = &self.init {
            if v.len() != self.n_chains {
                return Err(invalid(format!("{} initial points for {} chains", v.len(), self.n_chains)));
            }
        }
        Ok(())
    }

    /// Whether iteration `it` is kept.
    pub fn keeps(&self, it: usize) -> bool {
        it >= self.burnin && (it - self.burnin) % self.thin == 0
    }
}

/// End points of the covariance-adaptation windows: 100, 200, 400, ...
/// iterations long, the last one stretched to the end of burn-in.
pub fn adaptation_windows(burnin: usize) -> Vec<usize> {
    let mut ends = Vec::new();
    let (mut start, mut size) = (0, FIRST_WINDOW);
    while start < burnin {
        let mut end = start + size;
        if end >= burnin || burnin - end < 2 * size {
            end = burnin;
        }
        ends.push(end);
        start = end;
        size *= 2;
    }
    ends
}

struct Evaluator<'a, T: ?Sized> {
    target: &'a T,
    transforms: Vec<Transform>,
}

impl<T: LogPosteriorTarget + ?Sized> Evaluator<'_, T> {
    fn to_x(&self, z: &[f64]) -> Vec<f64> {
        z.iter().zip(&self.transforms).map(|(&z, t)| t.forward(z)).collect()
    }

    fn to_z(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.transforms).map(|(&x, t)| t.inverse(x)).collect()
    }

    fn log_density(&self, z: &[f64]) -> f64 {
        let x = self.to_x(z);
        if x.iter().any(|v| !v.is_finite()) {
            return f64::NEG_INFINITY;
        }
        let lj: f64 = z.iter().zip(&self.transforms).map(|(&z, t)| t.log_jacobian(z)).sum();
        let lp = self.target.log_posterior(&x) + lj;
        if lp.is_nan() {
            f64::NEG_INFINITY
        } else {
            lp
        }
    }
}

/// Proposal covariance for a block from the finite-difference Hessian of the
/// log density at `z`, falling back to a diagonal guess.
fn initial_proposal<T: LogPosteriorTarget + ?Sized>(ev: &Evaluator<'_, T>, z: &[f64], idx: &[usize]) -> DMatrix<f64> {
    let d = idx.len();
    let f0 = ev.log_density(z);
    let h: Vec<f64> = idx.iter().map(|&i| 1e-4 * z[i].abs().max(1.0)).collect();
    let shifted = |moves: &[(usize, f64)]| {
        let mut zz = z.to_vec();
        for &(k, s) in moves {
            zz[idx[k]] += s * h[k];
        }
        ev.log_density(&zz)
    };
    let mut hess = DMatrix::zeros(d, d);
    for a in 0..d {
        hess[(a, a)] = (shifted(&[(a, 1.0)]) - 2.0 * f0 + shifted(&[(a, -1.0)])) / (h[a] * h[a]);
        for b in 0..a {
            let v = (shifted(&[(a, 1.0), (b, 1.0)]) - shifted(&[(a, 1.0), (b, -1.0)]) - shifted(&[(a, -1.0), (b, 1.0)])
                + shifted(&[(a, -1.0), (b, -1.0)]))
                / (4.0 * h[a] * h[b]);
            hess[(a, b)] = v;
            hess[(b, a)] = v;
        }
    }
    if hess.iter().all(|v| v.is_finite()) {
        if let Some(c) = (-&hess).cholesky() {
            let cov = c.inverse();
            if cov.iter().all(|v| v.is_finite()) {
                return cov;
            }
        }
    }
    DMatrix::from_diagonal(&DVector::from_iterator(
        d,
        (0..d).map(|a| {
            let hd = hess[(a, a)];
            if hd.is_finite() && hd < 0.0 {
                -1.0 / hd
            } else {
                0.01
            }
        }),
    ))
}

struct BlockState {
    idx: Vec<usize>,
    chol: DMatrix<f64>,
    log_scale: f64,
    rm_t: f64,
    target: f64,
    win_n: usize,
    win_ref: Vec<f64>,
    win_sum: Vec<f64>,
    win_outer: Vec<f64>,
    win_acc: usize,
    win_prop: usize,
    post_acc: usize,
    post_prop: usize,
    stuck_reported: bool,
}

impl BlockState {
    fn new(idx: Vec<usize>, cov: &DMatrix<f64>) -> Self {
        let d = idx.len();
        let chol = cov.clone().cholesky().map(|c| c.l()).unwrap_or_else(|| DMatrix::identity(d, d) * 0.1);
        Self {
            idx,
            chol,
            log_scale: (2.38 / (d as f64).sqrt()).ln(),
            rm_t: 0.0,
            target: if d == 1 { SCALAR_TARGET } else { BLOCK_TARGET },
            win_n: 0,
            win_ref: Vec::new(),
            win_sum: vec![0.0; d],
            win_outer: vec![0.0; d * d],
            win_acc: 0,
            win_prop: 0,
            post_acc: 0,
            post_prop: 0,
            stuck_reported: false,
        }
    }

    fn d(&self) -> usize {
        self.idx.len()
    }

    fn record(&mut self, z: &[f64]) {
        let d = self.d();
        if self.win_n == 0 {
            self.win_ref = self.idx.iter().map(|&i| z[i]).collect();
        }
        let c: Vec<f64> = self.idx.iter().zip(&self.win_ref).map(|(&i, r)| z[i] - r).collect();
        for a in 0..d {
            self.win_sum[a] += c[a];
            for b in 0..d {
                self.win_outer[a * d + b] += c[a] * c[b];
            }
        }
        self.win_n += 1;
    }

    fn end_window(&mut self) {
        let d = self.d();
        let n = self.win_n as f64;
        if self.win_n >= 10 && self.win_acc >= 5 {
            let mean: Vec<f64> = self.win_sum.iter().map(|s| s / n).collect();
            let mut cov = DMatrix::zeros(d, d);
            for a in 0..d {
                for b in 0..d {
                    cov[(a, b)] = (self.win_outer[a * d + b] - n * mean[a] * mean[b]) / (n - 1.0);
                }
            }
            let w = n / (n + 5.0);
            let mut reg = cov * w;
            for a in 0..d {
                reg[(a, a)] += (1.0 - w) * (1e-3 * reg[(a, a)].abs() + 1e-12);
            }
            if let Some(c) = reg.cholesky() {
                self.chol = c.l();
                self.log_scale = (2.38 / (d as f64).sqrt()).ln();
                self.rm_t = 0.0;
            }
        }
        self.win_n = 0;
        self.win_sum.iter_mut().for_each(|x| *x = 0.0);
        self.win_outer.iter_mut().for_each(|x| *x = 0.0);
    }
}

struct ChainOutput {
    rows: Vec<Vec<f64>>,
    iters: Vec<usize>,
    stats: ChainStats,
    warnings: Vec<String>,
}

/// Runs `cfg.n_chains` independent chains (in parallel) and returns the
/// retained draws on the constrained scale, in chain order.
pub fn run_chains<T: LogPosteriorTarget + ?Sized>(target: &T, cfg: &ChainConfig) -> Result<DrawsMatrix> {
    cfg.validate()?;
    let dim = target.dim();
    let blocks = target.blocks();
    validate_blocks(&blocks, dim).map_err(invalid)?;
    let transforms = target.transforms();
    if transforms.len() != dim {
        return Err(invalid("one transform per coordinate required"));
    }
    let ev = Evaluator { target, transforms };

    let base_x = match &cfg.init {
        Init::Default => target.initial_point(),
        Init::Point(p) => p.clone(),
        Init::PerChain(v) => v[0].clone(),
    };
    if base_x.len() != dim {
        return Err(Error::Init(format!("initial point has {} values for dimension {dim}", base_x.len())));
    }
    let base_z = ev.to_z(&base_x);
    if !ev.log_density(&base_z).is_finite() {
        return Err(Error::Init("log posterior is not finite at the initial point".into()));
    }
    let proposals: Vec<DMatrix<f64>> = blocks.iter().map(|b| initial_proposal(&ev, &base_z, b)).collect();

    let mut starts = Vec::with_capacity(cfg.n_chains);
    for c in 0..cfg.n_chains {
        let z = match &cfg.init {
            Init::Default => {
                let mut rng = RngHandle::keyed(cfg.seed, 0x1417, c as u64);
                let mut z = base_z.clone();
                for (b, cov) in blocks.iter().zip(&proposals) {
                    let l = cov.clone().cholesky().map(|c| c.l());
                    if let Some(l) = l {
                        let e = DVector::from_iterator(b.len(), (0..b.len()).map(|_| rng.std_normal()));
                        let step = l * e;
                        for (k, &i) in b.iter().enumerate() {
                            z[i] += step[k];
                        }
                    }
                }
                if ev.log_density(&z).is_finite() {
                    z
                } else {
                    base_z.clone()
                }
            }
            Init::Point(_) => base_z.clone(),
            Init::PerChain(v) => {
                if v[c].len() != dim {
                    return Err(Error::Init(format!("chain {c} initial point has wrong length")));
                }
                let z = ev.to_z(&v[c]);
                if !ev.log_density(&z).is_finite() {
                    return Err(Error::Init(format!("log posterior is not finite at chain {c}'s initial point")));
                }
                z
            }
        };
        starts.push(z);
    }

    let names = target.param_names();
    let outputs: Vec<Result<ChainOutput>> = parallel::install(|| {
        starts
            .into_par_iter()
            .enumerate()
            .map(|(c, z)| run_one(&ev, &blocks, &proposals, z, cfg, c, &names))
            .collect()
    });

    let mut rows = Vec::new();
    let mut chain = Vec::new();
    let mut iters = Vec::new();
    let mut stats = Vec::new();
    let mut warnings = target.warnings();
    for (c, out) in outputs.into_iter().enumerate() {
        let out = out?;
        chain.extend(std::iter::repeat_n(c, out.rows.len()));
        rows.extend(out.rows);
        iters.extend(out.iters);
        stats.push(out.stats);
        warnings.extend(out.warnings);
    }
    let mut draws = DrawsMatrix::from_rows(target.output_names(), rows, chain, iters)?;
    draws.warnings = warnings;
    draws.stats = stats;
    Ok(draws)
}

fn run_one<T: LogPosteriorTarget + ?Sized>(
    ev: &Evaluator<'_, T>,
    blocks: &[Vec<usize>],
    proposals: &[DMatrix<f64>],
    mut z: Vec<f64>,
    cfg: &ChainConfig,
    c: usize,
    names: &[String],
) -> Result<ChainOutput> {
    let mut rng = RngHandle::new(cfg.seed, c as u64);
    let mut states: Vec<BlockState> = blocks.iter().zip(proposals).map(|(b, p)| BlockState::new(b.clone(), p)).collect();
    let windows = adaptation_windows(cfg.burnin);
    let mut next_window = 0;
    let mut window_start = 0;
    let mut lp = ev.log_density(&z);
    let mut out = ChainOutput {
        rows: Vec::with_capacity(cfg.retained_per_chain()),
        iters: Vec::with_capacity(cfg.retained_per_chain()),
        stats: ChainStats { acceptance: vec![0.0; blocks.len()], frozen_scales: vec![Vec::new(); blocks.len()] },
        warnings: Vec::new(),
    };
    let mut proposal = z.clone();

    for it in 0..cfg.iter {
        let adapting = it < cfg.burnin;
        for (b, st) in states.iter_mut().enumerate() {
            if let Some(vals) = ev.target.conditional_draw(b, &ev.to_x(&z), &mut rng) {
                for (k, &i) in st.idx.iter().enumerate() {
                    z[i] = ev.transforms[i].inverse(vals[k]);
                }
                lp = ev.log_density(&z);
                st.win_acc += 1;
                st.win_prop += 1;
                if !adapting {
                    st.post_prop += 1;
                    st.post_acc += 1;
                }
                continue;
            }
            let d = st.d();
            let eps = DVector::from_iterator(d, (0..d).map(|_| rng.std_normal()));
            let step = &st.chol * eps * st.log_scale.exp();
            proposal.copy_from_slice(&z);
            for (k, &i) in st.idx.iter().enumerate() {
                proposal[i] += step[k];
            }
            let lp_new = ev.log_density(&proposal);
            let log_alpha = if lp_new.is_finite() { (lp_new - lp).min(0.0) } else { f64::NEG_INFINITY };
            let accept = log_alpha == 0.0 || rng.uniform_open().ln() < log_alpha;
            if accept {
                std::mem::swap(&mut z, &mut proposal);
                lp = lp_new;
                st.win_acc += 1;
            }
            st.win_prop += 1;
            if adapting {
                st.rm_t += 1.0;
                st.log_scale += st.rm_t.powf(-0.6) * (log_alpha.exp() - st.target);
                st.log_scale = st.log_scale.clamp(-40.0, 20.0);
                st.record(&z);
            } else {
                st.post_prop += 1;
                st.post_acc += usize::from(accept);
            }
        }

        let window_closed = if adapting && next_window < windows.len() && it + 1 == windows[next_window] {
            next_window += 1;
            true
        } else {
            !adapting && (it + 1 - cfg.burnin) % FIRST_WINDOW == 0
        };
        if window_closed {
            for (b, st) in states.iter_mut().enumerate() {
                if st.win_prop >= 20 && st.win_acc == 0 && !st.stuck_reported {
                    st.stuck_reported = true;
                    out.warnings.push(format!(
                        "chain {c}: block {b} (starting at {}) accepted no proposals in iterations {}..{}",
                        names[st.idx[0]],
                        window_start,
                        it + 1
                    ));
                }
                if adapting {
                    st.end_window();
                }
                st.win_acc = 0;
                st.win_prop = 0;
            }
            window_start = it + 1;
        }

        if !adapting {
            for (b, st) in states.iter().enumerate() {
                out.stats.frozen_scales[b].push(st.log_scale.exp());
            }
        }
        if cfg.keeps(it) {
            let x = ev.to_x(&z);
            let row = ev.target.output(&x);
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::Domain(format!("chain {c}, iteration {it}: output column {j} is not finite")));
            }
            out.rows.push(row);
            out.iters.push(it);
        }
    }
    for (b, st) in states.iter().enumerate() {
        out.stats.acceptance[b] = st.post_acc as f64 / st.post_prop.max(1) as f64;
    }
    Ok(out)
}
