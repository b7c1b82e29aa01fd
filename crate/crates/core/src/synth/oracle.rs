//! Monte Carlo ground truths from the known generative models.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{GcompConfig, ScenarioId, STRATUM_ETA};
use crate::error::{invalid, Result};
use crate::gcomp::Regime;
use crate::parallel;
use crate::prob::{expit, RngHandle};

const ORACLE_DOMAIN: u64 = 0x0AC1E;
const BLOCK: usize = 1 << 14;

#[derive(Clone, Debug, PartialEq)]
pub enum Estimand {
    /// `E[Y^1 - Y^0]`.
    Ate,
    /// `E[Y^k - Y^{k-1}]` in the dose scenario.
    DoseIncrement(usize),
    /// Marginal causal odds ratio within stratum `v` (1-based).
    StratumOddsRatio(usize),
    /// `E[Y^r - Y^d]` in a longitudinal scenario.
    Regimes(Regime, Regime),
    /// Confounding bias of the standardized contrast when `U` is omitted
    /// from the sensitivity scenario.
    OmittedBias,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub value: f64,
    pub mc_se: f64,
    pub n_mc: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Means and covariance of a vector-valued Monte Carlo average. Blocks run
/// in parallel on their own substreams and are reduced in block order, so
/// the result does not depend on the thread count.
fn mc_moments<const D: usize>(n_mc: usize, seed: u64, f: impl Fn(&mut RngHandle) -> [f64; D] + Sync) -> ([f64; D], [[f64; D]; D]) {
    let blocks = n_mc.div_ceil(BLOCK);
    let partial: Vec<([f64; D], [[f64; D]; D])> = parallel::install(|| {
        (0..blocks)
            .into_par_iter()
            .map(|b| {
                let mut rng = RngHandle::keyed(seed, ORACLE_DOMAIN, b as u64);
                let size = BLOCK.min(n_mc - b * BLOCK);
                let mut s = [0.0; D];
                let mut ss = [[0.0; D]; D];
                for _ in 0..size {
                    let x = f(&mut rng);
                    for i in 0..D {
                        s[i] += x[i];
                        for j in 0..D {
                            ss[i][j] += x[i] * x[j];
                        }
                    }
                }
                (s, ss)
            })
            .collect()
    });
    let mut s = [0.0; D];
    let mut ss = [[0.0; D]; D];
    for (ps, pss) in partial {
        for i in 0..D {
            s[i] += ps[i];
            for j in 0..D {
                ss[i][j] += pss[i][j];
            }
        }
    }
    let n = n_mc as f64;
    let mean = s.map(|v| v / n);
    let mut cov = [[0.0; D]; D];
    for i in 0..D {
        for j in 0..D {
            cov[i][j] = (ss[i][j] / n - mean[i] * mean[j]) * n / (n - 1.0).max(1.0);
        }
    }
    (mean, cov)
}

fn scalar(n_mc: usize, seed: u64, f: impl Fn(&mut RngHandle) -> f64 + Sync) -> (f64, f64) {
    let (m, c) = mc_moments::<1>(n_mc, seed, |r| [f(r)]);
    (m[0], (c[0][0].max(0.0) / n_mc as f64).sqrt())
}

/// `E_U[g(U)]` for `U ~ N(0, 1)` by a fine trapezoid rule on `[-9, 9]`.
fn normal_expectation(g: impl Fn(f64) -> f64) -> f64 {
    const STEPS: usize = 360;
    let h = 18.0 / STEPS as f64;
    let norm = (2.0 * std::f64::consts::PI).sqrt();
    (0..=STEPS)
        .map(|i| {
            let u = -9.0 + i as f64 * h;
            let w = if i == 0 || i == STEPS { 0.5 } else { 1.0 };
            w * g(u) * (-0.5 * u * u).exp() / norm
        })
        .sum::<f64>()
        * h
}

/// Bias term `delta(L) = -2 (E[U | A=1, L] - E[U | A=0, L])` of the
/// sensitivity scenario; it is the same under both treatment levels.
pub(crate) fn omitted_delta(l: f64) -> f64 {
    let p1 = normal_expectation(|u| expit(l + u));
    let u1 = normal_expectation(|u| u * expit(l + u)) / p1;
    let u0 = normal_expectation(|u| u * (1.0 - expit(l + u))) / (1.0 - p1);
    -2.0 * (u1 - u0)
}

fn simulate_regime(cfg: &GcompConfig, regime: &Regime, l: &mut [f64], a: &mut [f64], z: &[f64]) -> f64 {
    for t in 0..cfg.time_points {
        l[t] = if t == 0 { z[0] } else { cfg.confounder_mean(t, l, a) + z[t] };
        a[t] = regime.assign(t, l[t]);
    }
    cfg.outcome_mean(l, a)
}

/// Brute-force value of `estimand` under scenario `id`.
pub fn oracle_truth(id: ScenarioId, estimand: &Estimand, n_mc: usize, seed: u64) -> Result<OracleResult> {
    if n_mc < 2 {
        return Err(invalid("oracle needs n_mc >= 2"));
    }
    let (value, mc_se) = match (id, estimand) {
        (ScenarioId::Bnp, Estimand::Ate) => scalar(n_mc, seed, |r| {
            let l = r.std_normal();
            l + 0.5 * l * l
        }),
        // Potential outcomes share U and the noise, so each unit's
        // difference is the treatment coefficient.
        (ScenarioId::Sensitivity, Estimand::Ate) => scalar(n_mc, seed, |r| {
            let (l, u, e) = (r.std_normal(), r.std_normal(), r.std_normal());
            (1.0 - l - 2.0 * u + e) - (-l - 2.0 * u + e)
        }),
        (ScenarioId::Sensitivity, Estimand::OmittedBias) => scalar(n_mc, seed, |r| omitted_delta(r.std_normal())),
        (ScenarioId::Dose, Estimand::DoseIncrement(k)) if (1..=super::DOSE_K).contains(k) => {
            let k = *k;
            scalar(n_mc, seed, move |r| {
                let (l, e) = (r.std_normal(), 2.0 * r.std_normal());
                let y = |d: usize| super::dose_curve(d as f64) - 5.0 * l + e;
                y(k) - y(k - 1)
            })
        }
        (ScenarioId::PartialPool, Estimand::StratumOddsRatio(v)) if (1..=5).contains(v) => {
            let eta = STRATUM_ETA[v - 1];
            let (m, c) = mc_moments::<2>(n_mc, seed, |r| {
                let w = r.std_normal();
                [expit(-1.0 + w + 1.0 + eta), expit(-1.0 + w)]
            });
            let odds = |p: f64| p / (1.0 - p);
            let or = odds(m[0]) / odds(m[1]);
            // Delta method on log OR.
            let g = [1.0 / (m[0] * (1.0 - m[0])), -1.0 / (m[1] * (1.0 - m[1]))];
            let var = (0..2).flat_map(|i| (0..2).map(move |j| (i, j))).map(|(i, j)| g[i] * g[j] * c[i][j]).sum::<f64>();
            (or, or * (var.max(0.0) / n_mc as f64).sqrt())
        }
        (ScenarioId::Gcomp | ScenarioId::GcompMarkov, Estimand::Regimes(r, d)) => {
            let cfg = GcompConfig::for_id(id).expect("longitudinal id");
            let tp = cfg.time_points;
            for reg in [r, d] {
                if let Regime::Static(v) = reg {
                    if v.len() != tp {
                        return Err(invalid(format!("regime has {} entries for {tp} time points", v.len())));
                    }
                }
            }
            scalar(n_mc, seed, |rng| {
                let z: Vec<f64> = (0..tp).map(|_| rng.std_normal()).collect();
                let mut l = vec![0.0; tp];
                let mut a = vec![0.0; tp];
                let yr = simulate_regime(&cfg, r, &mut l, &mut a, &z);
                let yd = simulate_regime(&cfg, d, &mut l, &mut a, &z);
                yr - yd
            })
        }
        _ => return Err(invalid(format!("estimand {estimand:?} is not defined for scenario {id}"))),
    };
    let mut warnings = Vec::new();
    if mc_se > 5e-4 * value.abs().max(1.0) {
        warnings.push(format!("Monte Carlo SE {mc_se:.2e} is too large for three-digit precision; widen tolerances"));
    }
    Ok(OracleResult { value, mc_se, n_mc, seed, warnings })
}
