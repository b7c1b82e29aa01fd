//! Bayesian additive regression trees with grow/prune moves.
//!
//! The outcome is rescaled to `[-0.5, 0.5]`. Leaf values get
//! `N(0, sigma_mu^2)` with `sigma_mu = 0.5 / (k sqrt(J))`, the residual
//! variance gets the usual calibrated inverse-gamma prior, and a node at
//! depth `d` splits with probability `base (1 + d)^-power`. Cutpoints are
//! observed covariate values (`x <= cut` goes left).

use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::Predictions;
use crate::error::{invalid, Error, Result};
use crate::linalg::ols;
use crate::mcmc::{ChainConfig, DrawsMatrix};
use crate::parallel;
use crate::prob::RngHandle;

const BART_DOMAIN: u64 = 0xBA27;

#[derive(Clone, Debug, PartialEq)]
pub struct BartConfig {
    pub trees: usize,
    pub base: f64,
    pub power: f64,
    pub k: f64,
    pub nu: f64,
    pub q: f64,
    /// Trees never grow beyond this depth; 0 keeps every tree a single leaf.
    pub max_depth: usize,
}

impl Default for BartConfig {
    fn default() -> Self {
        Self { trees: 200, base: 0.95, power: 2.0, k: 2.0, nu: 3.0, q: 0.9, max_depth: usize::MAX }
    }
}

impl BartConfig {
    fn validate(&self) -> Result<()> {
        if self.trees == 0 {
            return Err(invalid("need at least one tree"));
        }
        if !(self.base > 0.0 && self.base < 1.0 && self.power >= 0.0) {
            return Err(invalid("tree prior needs 0 < base < 1 and power >= 0"));
        }
        if !(self.k > 0.0 && self.nu > 0.0 && self.q > 0.0 && self.q < 1.0) {
            return Err(invalid("k, nu must be positive and q in (0, 1)"));
        }
        Ok(())
    }

    fn split_prob(&self, depth: usize) -> f64 {
        if depth >= self.max_depth {
            0.0
        } else {
            self.base * (1.0 + depth as f64).powf(-self.power)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Kind {
    Leaf { mu: f64 },
    Split { var: usize, cut: f64, left: usize, right: usize },
}

#[derive(Clone, Debug, PartialEq)]
struct Node {
    parent: Option<usize>,
    depth: usize,
    kind: Kind,
}

/// One tree in slot storage; freed slots are reused.
#[derive(Clone, Debug, PartialEq)]
pub struct Tree {
    nodes: Vec<Option<Node>>,
    free: Vec<usize>,
}

impl Tree {
    fn stump() -> Self {
        Self { nodes: vec![Some(Node { parent: None, depth: 0, kind: Kind::Leaf { mu: 0.0 } })], free: vec![] }
    }

    fn node(&self, i: usize) -> &Node {
        self.nodes[i].as_ref().expect("live node")
    }

    fn alloc(&mut self, n: Node) -> usize {
        match self.free.pop() {
            Some(i) => {
                self.nodes[i] = Some(n);
                i
            }
            None => {
                self.nodes.push(Some(n));
                self.nodes.len() - 1
            }
        }
    }

    fn live(&self) -> impl Iterator<Item = (usize, &Node)> {
        self.nodes.iter().enumerate().filter_map(|(i, n)| n.as_ref().map(|n| (i, n)))
    }

    fn leaves(&self) -> Vec<usize> {
        self.live().filter(|(_, n)| matches!(n.kind, Kind::Leaf { .. })).map(|(i, _)| i).collect()
    }

    /// Split nodes whose children are both leaves.
    fn nogs(&self) -> Vec<usize> {
        self.live()
            .filter(|(_, n)| match n.kind {
                Kind::Split { left, right, .. } => {
                    matches!(self.node(left).kind, Kind::Leaf { .. }) && matches!(self.node(right).kind, Kind::Leaf { .. })
                }
                Kind::Leaf { .. } => false,
            })
            .map(|(i, _)| i)
            .collect()
    }

    pub fn n_leaves(&self) -> usize {
        self.leaves().len()
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.node(i).kind {
                Kind::Leaf { mu } => return mu,
                Kind::Split { var, cut, left, right } => i = if x[var] <= cut { left } else { right },
            }
        }
    }
}

/// Distinct values of covariate `var` among `idx`, except the largest: the
/// cutpoints that leave both children non-empty.
fn valid_cuts(x: &[Vec<f64>], idx: &[usize], var: usize) -> Vec<f64> {
    let mut v: Vec<f64> = idx.iter().map(|&i| x[i][var]).collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v.pop();
    v
}

fn can_split(x: &[Vec<f64>], idx: &[usize]) -> bool {
    let p = x.first().map_or(0, Vec::len);
    (0..p).any(|j| {
        let first = idx.first().map(|&i| x[i][j]);
        idx.iter().any(|&i| Some(x[i][j]) != first)
    })
}

struct Model<'a> {
    x: &'a [Vec<f64>],
    cfg: &'a BartConfig,
    sigma_mu: f64,
}

struct LeafStats {
    n: f64,
    sum: f64,
}

impl Model<'_> {
    /// Log marginal likelihood of a leaf's residuals with `mu` integrated
    /// out, up to terms that cancel in grow/prune ratios.
    fn leaf_ml(&self, s: &LeafStats, sigma2: f64) -> f64 {
        let t2 = self.sigma_mu * self.sigma_mu;
        let denom = sigma2 + s.n * t2;
        -0.5 * (denom / sigma2).ln() + t2 * s.sum * s.sum / (2.0 * sigma2 * denom)
    }

    fn stats(r: &[f64], idx: &[usize]) -> LeafStats {
        LeafStats { n: idx.len() as f64, sum: idx.iter().map(|&i| r[i]).sum() }
    }

    /// Prior probability that a node stays a leaf.
    fn stop_prob(&self, idx: &[usize], depth: usize) -> f64 {
        if can_split(self.x, idx) {
            1.0 - self.cfg.split_prob(depth)
        } else {
            1.0
        }
    }

    fn growable(&self, tree: &Tree, members: &[Vec<usize>]) -> Vec<usize> {
        tree.leaves().into_iter().filter(|&l| self.cfg.split_prob(tree.node(l).depth) > 0.0 && can_split(self.x, &members[l])).collect()
    }

    fn members(tree: &Tree, leaf_of: &[usize]) -> Vec<Vec<usize>> {
        let mut m = vec![Vec::new(); tree.nodes.len()];
        for (i, &l) in leaf_of.iter().enumerate() {
            m[l].push(i);
        }
        m
    }

    fn step(&self, tree: &mut Tree, leaf_of: &mut [usize], r: &[f64], sigma2: f64, rng: &mut RngHandle) {
        let members = Self::members(tree, leaf_of);
        let nogs = tree.nogs();
        let p_grow = if nogs.is_empty() { 1.0 } else { 0.5 };
        if rng.uniform() < p_grow {
            self.grow(tree, leaf_of, &members, r, sigma2, p_grow, rng);
        } else {
            self.prune(tree, leaf_of, &members, &nogs, r, sigma2, rng);
        }
        self.draw_leaves(tree, leaf_of, r, sigma2, rng);
    }

    #[allow(clippy::too_many_arguments)]
    fn grow(&self, tree: &mut Tree, leaf_of: &mut [usize], members: &[Vec<usize>], r: &[f64], sigma2: f64, p_grow: f64, rng: &mut RngHandle) {
        let growable = self.growable(tree, members);
        if growable.is_empty() {
            return;
        }
        let leaf = growable[rng.index(growable.len())];
        let idx = &members[leaf];
        let p = self.x[0].len();
        let vars: Vec<usize> = (0..p).filter(|&j| !valid_cuts(self.x, idx, j).is_empty()).collect();
        let var = vars[rng.index(vars.len())];
        let cuts = valid_cuts(self.x, idx, var);
        let cut = cuts[rng.index(cuts.len())];
        let (li, ri): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| self.x[i][var] <= cut);
        let depth = tree.node(leaf).depth;

        // After the grow the new node is the only candidate nog unless its
        // parent was already one (in which case the parent stops being one).
        let mut nogs_after = tree.nogs().len() + 1;
        if let Some(par) = tree.node(leaf).parent {
            if tree.nogs().contains(&par) {
                nogs_after -= 1;
            }
        }
        let log_prior = self.cfg.split_prob(depth).ln() + self.stop_prob(&li, depth + 1).ln() + self.stop_prob(&ri, depth + 1).ln()
            - (1.0 - self.cfg.split_prob(depth)).ln();
        let log_prop = (0.5 / nogs_after as f64).ln() - (p_grow / growable.len() as f64).ln();
        let log_lik = self.leaf_ml(&Self::stats(r, &li), sigma2) + self.leaf_ml(&Self::stats(r, &ri), sigma2) - self.leaf_ml(&Self::stats(r, idx), sigma2);
        if rng.uniform().ln() < log_prior + log_prop + log_lik {
            let l = tree.alloc(Node { parent: Some(leaf), depth: depth + 1, kind: Kind::Leaf { mu: 0.0 } });
            let rr = tree.alloc(Node { parent: Some(leaf), depth: depth + 1, kind: Kind::Leaf { mu: 0.0 } });
            tree.nodes[leaf].as_mut().unwrap().kind = Kind::Split { var, cut, left: l, right: rr };
            for &i in &li {
                leaf_of[i] = l;
            }
            for &i in &ri {
                leaf_of[i] = rr;
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn prune(&self, tree: &mut Tree, leaf_of: &mut [usize], members: &[Vec<usize>], nogs: &[usize], r: &[f64], sigma2: f64, rng: &mut RngHandle) {
        let node = nogs[rng.index(nogs.len())];
        let Kind::Split { left, right, .. } = tree.node(node).kind else { unreachable!() };
        let depth = tree.node(node).depth;
        let (li, ri) = (&members[left], &members[right]);
        let idx: Vec<usize> = li.iter().chain(ri).copied().collect();

        // Tree after pruning: `node` becomes a leaf.
        let mut pruned = tree.clone();
        pruned.nodes[node].as_mut().unwrap().kind = Kind::Leaf { mu: 0.0 };
        pruned.nodes[left] = None;
        pruned.nodes[right] = None;
        let mut pm: Vec<Vec<usize>> = members.to_vec();
        pm[node] = idx.clone();
        pm[left].clear();
        pm[right].clear();
        let growable_after = self.growable(&pruned, &pm).len();
        let p_grow_after = if pruned.nogs().is_empty() { 1.0 } else { 0.5 };

        let log_prior = self.cfg.split_prob(depth).ln() + self.stop_prob(li, depth + 1).ln() + self.stop_prob(ri, depth + 1).ln()
            - (1.0 - self.cfg.split_prob(depth)).ln();
        let log_prop = (0.5 / nogs.len() as f64).ln() - (p_grow_after / growable_after as f64).ln();
        let log_lik = self.leaf_ml(&Self::stats(r, li), sigma2) + self.leaf_ml(&Self::stats(r, ri), sigma2) - self.leaf_ml(&Self::stats(r, &idx), sigma2);
        if rng.uniform().ln() < -(log_prior + log_prop + log_lik) {
            pruned.free.extend([left, right]);
            *tree = pruned;
            for &i in &idx {
                leaf_of[i] = node;
            }
        }
    }

    fn draw_leaves(&self, tree: &mut Tree, leaf_of: &[usize], r: &[f64], sigma2: f64, rng: &mut RngHandle) {
        let mut n = vec![0.0; tree.nodes.len()];
        let mut s = vec![0.0; tree.nodes.len()];
        for (i, &l) in leaf_of.iter().enumerate() {
            n[l] += 1.0;
            s[l] += r[i];
        }
        let t2 = self.sigma_mu * self.sigma_mu;
        for l in tree.leaves() {
            let v = 1.0 / (n[l] / sigma2 + 1.0 / t2);
            let mu = rng.normal(v * s[l] / sigma2, v.sqrt());
            tree.nodes[l].as_mut().unwrap().kind = Kind::Leaf { mu };
        }
    }
}

/// Draws of the sum-of-trees function at `test` on the original outcome
/// scale, plus `sigma` and the mean leaf count per retained draw.
pub struct BartFit {
    pub draws: DrawsMatrix,
    pub predictions: Predictions,
}

struct ChainOut {
    iters: Vec<usize>,
    preds: Vec<Vec<f64>>,
    rows: Vec<Vec<f64>>,
}

pub fn bart_fit_predict(x: &[Vec<f64>], y: &[f64], test: &[Vec<f64>], cfg: &BartConfig, chains: &ChainConfig) -> Result<BartFit> {
    cfg.validate()?;
    chains.validate()?;
    let n = y.len();
    if n < 2 || x.len() != n {
        return Err(Error::Shape(format!("{n} outcomes for {} covariate rows", x.len())));
    }
    let p = x[0].len();
    if p == 0 || x.iter().chain(test).any(|r| r.len() != p) {
        return Err(Error::Shape("covariate rows differ in length".into()));
    }
    let (lo, hi) = y.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if !(hi > lo) {
        return Err(Error::DegenerateVariance("Y".into()));
    }
    let scale = hi - lo;
    let ys: Vec<f64> = y.iter().map(|v| (v - lo) / scale - 0.5).collect();

    // sigma^2 ~ IG(nu/2, nu lambda/2) with P(sigma < sigma_ols) = q.
    let design = nalgebra::DMatrix::from_fn(n, p + 1, |i, j| if j == 0 { 1.0 } else { x[i][j - 1] });
    let s2_hat = ols(&design, &nalgebra::DVector::from_column_slice(&ys))
        .map(|f| f.sigma2)
        .unwrap_or_else(|_| {
            let m = ys.iter().sum::<f64>() / n as f64;
            ys.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64
        })
        .max(1e-10);
    let chi = ChiSquared::new(cfg.nu).map_err(|e| invalid(e.to_string()))?;
    let lambda = s2_hat * chi.inverse_cdf(1.0 - cfg.q) / cfg.nu;

    let model = Model { x, cfg, sigma_mu: 0.5 / (cfg.k * (cfg.trees as f64).sqrt()) };
    let run = |c: usize| -> ChainOut {
        let mut rng = RngHandle::keyed(chains.seed, BART_DOMAIN, c as u64);
        let mut trees = vec![Tree::stump(); cfg.trees];
        let mut leaf_of = vec![vec![0usize; n]; cfg.trees];
        let mut fits = vec![vec![0.0; n]; cfg.trees];
        let mut total = vec![0.0; n];
        let mut sigma2 = s2_hat;
        let mut r = vec![0.0; n];
        let mut out = ChainOut { iters: vec![], preds: vec![], rows: vec![] };
        for it in 0..chains.iter {
            for j in 0..cfg.trees {
                for i in 0..n {
                    r[i] = ys[i] - (total[i] - fits[j][i]);
                }
                model.step(&mut trees[j], &mut leaf_of[j], &r, sigma2, &mut rng);
                for i in 0..n {
                    let v = trees[j].node(leaf_of[j][i]).kind.leaf_mu();
                    total[i] += v - fits[j][i];
                    fits[j][i] = v;
                }
            }
            // Fixed-order recomputation keeps the stored total exact.
            for i in 0..n {
                total[i] = fits.iter().map(|f| f[i]).sum();
            }
            let rss: f64 = (0..n).map(|i| (ys[i] - total[i]).powi(2)).sum();
            sigma2 = (0.5 * cfg.nu * lambda + 0.5 * rss) / rng.gamma(0.5 * (cfg.nu + n as f64), 1.0);
            if chains.keeps(it) {
                out.iters.push(it);
                out.preds.push(test.iter().map(|t| (trees.iter().map(|tr| tr.predict(t)).sum::<f64>() + 0.5) * scale + lo).collect());
                let leaves = trees.iter().map(Tree::n_leaves).sum::<usize>() as f64 / cfg.trees as f64;
                out.rows.push(vec![sigma2.sqrt() * scale, leaves]);
            }
        }
        out
    };
    let outs: Vec<ChainOut> = parallel::install(|| (0..chains.n_chains).into_par_iter().map(run).collect());

    let (mut chain, mut iter, mut values, mut rows) = (vec![], vec![], vec![], vec![]);
    for (c, o) in outs.into_iter().enumerate() {
        chain.extend(std::iter::repeat_n(c, o.iters.len()));
        iter.extend(o.iters);
        values.extend(o.preds);
        rows.extend(o.rows);
    }
    let draws = DrawsMatrix::from_rows(vec!["sigma".into(), "mean_leaves".into()], rows, chain.clone(), iter.clone())?;
    Ok(BartFit { draws, predictions: Predictions { chain, iter, values } })
}

impl Kind {
    fn leaf_mu(&self) -> f64 {
        match self {
            Kind::Leaf { mu } => *mu,
            Kind::Split { .. } => unreachable!("observations sit in leaves"),
        }
    }
}
