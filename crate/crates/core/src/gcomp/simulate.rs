//! Forward simulation of the fitted sequential models under two regimes.
//!
//! Within one posterior draw both regimes share the same bootstrap start
//! indices and the same standard-normal innovations (common random numbers),
//! so identical regimes give a contrast of exactly zero.

use rayon::prelude::*;

use super::{model_prefix, Regime};
use crate::data::LongitudinalDataset;
use crate::effects::{bb_weights, standardize_marginal, EstimandDraws, EstimandKind};
use crate::error::{invalid, Error, Result};
use crate::mcmc::DrawsMatrix;
use crate::parallel;
use crate::prob::{RngHandle, SimplexWeights};

const GCOMP_DOMAIN: u64 = 0x6C0;
const CHOOSE_B_DOMAIN: u64 = 0x6C1;
const MAX_B: usize = 1 << 20;

struct ModelCols {
    int: usize,
    l: Vec<usize>,
    a: Vec<usize>,
    sigma2: Option<usize>,
}

impl ModelCols {
    fn resolve(draws: &DrawsMatrix, t: Option<usize>, h: usize) -> Result<Self> {
        let p = model_prefix(t);
        let col = |s: String| draws.require(&s);
        Ok(Self {
            int: col(format!("{p}_int"))?,
            l: (0..h).map(|s| col(format!("{p}_L{s}"))).collect::<Result<_>>()?,
            a: (0..h).map(|s| col(format!("{p}_A{s}"))).collect::<Result<_>>()?,
            sigma2: t.map(|_| col(format!("{p}_sigma2"))).transpose()?,
        })
    }

    fn mean(&self, row: &[f64], l: &[f64], a: &[f64]) -> f64 {
        let mut m = row[self.int];
        for (c, x) in self.l.iter().zip(l) {
            m += row[*c] * x;
        }
        for (c, x) in self.a.iter().zip(a) {
            m += row[*c] * x;
        }
        m
    }
}

struct Layout {
    confounders: Vec<ModelCols>,
    outcome: ModelCols,
}

impl Layout {
    fn resolve(draws: &DrawsMatrix, time_points: usize) -> Result<Self> {
        let big_t = time_points - 1;
        Ok(Self {
            confounders: (1..=big_t).map(|t| ModelCols::resolve(draws, Some(t), t)).collect::<Result<_>>()?,
            outcome: ModelCols::resolve(draws, None, time_points)?,
        })
    }

    fn time_points(&self) -> usize {
        self.confounders.len() + 1
    }
}

/// Per-draw contrasts plus the per-regime means they were built from.
#[derive(Clone, Debug)]
pub struct GcompDraws {
    pub contrast: EstimandDraws,
    pub mean_r: Vec<f64>,
    pub mean_d: Vec<f64>,
}

impl GcompDraws {
    /// `mu(r) / mu(d)` per draw.
    pub fn ratio(&self) -> Result<EstimandDraws> {
        let v = self.mean_r.iter().zip(&self.mean_d).map(|(a, b)| a / b).collect();
        self.contrast.with_values(format!("{}_ratio", self.contrast.name), EstimandKind::Ratio, v)
    }
}

/// Inverse-CDF draw from the categorical distribution with weights `w`.
fn pick(cum: &[f64], u: f64) -> usize {
    cum.partition_point(|&c| c <= u).min(cum.len() - 1)
}

/// Mean outcome under each regime for one posterior draw, averaged over `b`
/// simulated trajectories.
fn simulate_draw(
    row: &[f64],
    layout: &Layout,
    l0: &[f64],
    w: &SimplexWeights,
    regimes: [&Regime; 2],
    b: usize,
    rng: &mut RngHandle,
) -> [f64; 2] {
    let tp1 = layout.time_points();
    let mut cum = Vec::with_capacity(w.len());
    let mut acc = 0.0;
    for &x in w.as_slice() {
        acc += x;
        cum.push(acc);
    }
    let starts: Vec<usize> = (0..b).map(|_| pick(&cum, rng.uniform() * acc)).collect();
    let noise: Vec<f64> = (0..b * (tp1 - 1)).map(|_| rng.std_normal()).collect();
    let sds: Vec<f64> = layout.confounders.iter().map(|m| row[m.sigma2.expect("confounder variance")].sqrt()).collect();

    let mut out = [0.0; 2];
    let mut l = vec![0.0; tp1];
    let mut a = vec![0.0; tp1];
    for (slot, regime) in out.iter_mut().zip(regimes) {
        let mut total = 0.0;
        for j in 0..b {
            l[0] = l0[starts[j]];
            a[0] = regime.assign(0, l[0]);
            for t in 1..tp1 {
                let m = &layout.confounders[t - 1];
                l[t] = m.mean(row, &l[..t], &a[..t]) + sds[t - 1] * noise[j * (tp1 - 1) + t - 1];
                a[t] = regime.assign(t, l[t]);
            }
            total += layout.outcome.mean(row, &l, &a);
        }
        *slot = total / b as f64;
    }
    out
}

/// Single time point: integrate the outcome model over the bootstrap
/// weights directly.
fn point_treatment(row: &[f64], layout: &Layout, l0: &[f64], w: &SimplexWeights, regimes: [&Regime; 2]) -> Result<(f64, [f64; 2])> {
    let mu = |r: &Regime| -> Vec<f64> { l0.iter().map(|&x| layout.outcome.mean(row, &[x], &[r.assign(0, x)])).collect() };
    let (mr, md) = (mu(regimes[0]), mu(regimes[1]));
    let psi = standardize_marginal(&mr, &md, w, EstimandKind::Difference)?;
    let avg = |v: &[f64]| v.iter().zip(w.as_slice()).map(|(a, b)| a * b).sum::<f64>();
    Ok((psi, [avg(&mr), avg(&md)]))
}

fn check_inputs(data: &LongitudinalDataset, r: &Regime, d: &Regime, b: usize) -> Result<()> {
    if b == 0 {
        return Err(invalid("B must be positive"));
    }
    r.check_len(data.time_points())?;
    d.check_len(data.time_points())
}

/// `mu(r) - mu(d)` for each posterior draw. `data` supplies the empirical
/// baseline confounder distribution.
pub fn gcomp_regimes(
    draws: &DrawsMatrix,
    data: &LongitudinalDataset,
    r: &Regime,
    d: &Regime,
    b: usize,
    seed: u64,
) -> Result<GcompDraws> {
    check_inputs(data, r, d, b)?;
    let layout = Layout::resolve(draws, data.time_points())?;
    let l0 = &data.l[0];
    let per: Vec<(f64, [f64; 2])> = parallel::install(|| {
        (0..draws.n_rows())
            .into_par_iter()
            .map(|m| {
                let mut rng = RngHandle::keyed(seed, GCOMP_DOMAIN, m as u64);
                let w = bb_weights(l0.len(), &mut rng)?;
                if layout.time_points() == 1 {
                    point_treatment(draws.row(m), &layout, l0, &w, [r, d])
                } else {
                    let means = simulate_draw(draws.row(m), &layout, l0, &w, [r, d], b, &mut rng);
                    Ok((means[0] - means[1], means))
                }
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let contrast = EstimandDraws::aligned("Psi", EstimandKind::Difference, per.iter().map(|p| p.0).collect(), draws)?;
    Ok(GcompDraws {
        contrast,
        mean_r: per.iter().map(|p| p.1[0]).collect(),
        mean_d: per.iter().map(|p| p.1[1]).collect(),
    })
}

pub fn gcomp_static(
    draws: &DrawsMatrix,
    data: &LongitudinalDataset,
    r: &Regime,
    d: &Regime,
    b: usize,
    seed: u64,
) -> Result<GcompDraws> {
    if !r.is_static() || !d.is_static() {
        return Err(invalid("gcomp_static needs two static regimes"));
    }
    gcomp_regimes(draws, data, r, d, b, seed)
}

pub fn gcomp_dynamic(
    draws: &DrawsMatrix,
    data: &LongitudinalDataset,
    r: &Regime,
    d: &Regime,
    b: usize,
    seed: u64,
) -> Result<GcompDraws> {
    if r.is_static() || d.is_static() {
        return Err(invalid("gcomp_dynamic needs two dynamic regimes"));
    }
    gcomp_regimes(draws, data, r, d, b, seed)
}

/// Smallest trajectory count `B = 100 * 2^k` whose contrast for posterior
/// draw `m` changes by at most `tol` (relative) when `B` is doubled.
pub fn choose_b(
    draws: &DrawsMatrix,
    m: usize,
    data: &LongitudinalDataset,
    r: &Regime,
    d: &Regime,
    tol: f64,
    seed: u64,
) -> Result<usize> {
    if m >= draws.n_rows() {
        return Err(invalid(format!("draw {m} out of range")));
    }
    if !(tol > 0.0) {
        return Err(invalid("tolerance must be positive"));
    }
    check_inputs(data, r, d, 1)?;
    let layout = Layout::resolve(draws, data.time_points())?;
    let l0 = &data.l[0];
    let row = draws.row(m);
    let psi_at = |k: usize, b: usize| -> Result<f64> {
        let mut rng = RngHandle::keyed(seed, CHOOSE_B_DOMAIN, k as u64);
        let w = bb_weights(l0.len(), &mut rng)?;
        if layout.time_points() == 1 {
            return Ok(point_treatment(row, &layout, l0, &w, [r, d])?.0);
        }
        let mu = simulate_draw(row, &layout, l0, &w, [r, d], b, &mut rng);
        Ok(mu[0] - mu[1])
    };
    let mut b = 100;
    let mut prev = psi_at(0, b)?;
    let mut k = 1;
    while 2 * b <= MAX_B {
        let next = psi_at(k, 2 * b)?;
        if (next - prev).abs() <= tol * next.abs().max(prev.abs()) {
            return Ok(b);
        }
        prev = next;
        b *= 2;
        k += 1;
    }
    Err(Error::ToleranceUnreachable(format!("contrast still moving at B = {b}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Draws for a two-time-point model with given coefficients.
    fn draws_t1(sigma2: f64, rows: usize) -> DrawsMatrix {
        let names = ["L1_int", "L1_L0", "L1_A0", "L1_sigma2", "Y_int", "Y_L0", "Y_L1", "Y_A0", "Y_A1"];
        let rows: Vec<Vec<f64>> =
            (0..rows).map(|m| vec![0.1, 0.5, -0.4 + 0.01 * m as f64, sigma2, 3.0, 0.2, 0.3, -0.5, -0.7]).collect();
        let n = rows.len();
        DrawsMatrix::from_rows(names.iter().map(|s| s.to_string()).collect(), rows, vec![0; n], (0..n).collect()).unwrap()
    }

    fn data(n: usize, tp1: usize, constant: bool) -> LongitudinalDataset {
        let mut r = RngHandle::new(9, 0);
        let l = (0..tp1).map(|_| (0..n).map(|_| if constant { 0.3 } else { r.std_normal() }).collect()).collect();
        let a = (0..tp1).map(|_| (0..n).map(|i| f64::from(u8::from(i % 2 == 0))).collect()).collect();
        LongitudinalDataset::new(vec![0.0; n], a, l).unwrap()
    }

    #[test]
    fn identical_regimes_are_exactly_zero() {
        let d = draws_t1(1.0, 20);
        let x = data(50, 2, false);
        for r in [Regime::Static(vec![1, 0]), Regime::Dynamic { kappa: 0.2 }] {
            let g = gcomp_regimes(&d, &x, &r, &r, 300, 4).unwrap();
            assert!(g.contrast.values().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn swap_negates() {
        let d = draws_t1(1.0, 10);
        let x = data(40, 2, false);
        let (a, b) = (Regime::always(2), Regime::never(2));
        let g1 = gcomp_static(&d, &x, &a, &b, 200, 1).unwrap();
        let g2 = gcomp_static(&d, &x, &b, &a, 200, 1).unwrap();
        for (u, v) in g1.contrast.values().iter().zip(g2.contrast.values()) {
            assert_eq!(*u, -*v);
        }
        let ratio = g1.ratio().unwrap();
        for (i, v) in ratio.values().iter().enumerate() {
            assert_eq!(*v, g1.mean_r[i] / g1.mean_d[i]);
        }
    }

    #[test]
    fn always_rule_equals_static_ones() {
        let d = draws_t1(0.7, 10);
        let x = data(40, 2, false);
        let s = gcomp_regimes(&d, &x, &Regime::always(2), &Regime::never(2), 250, 3).unwrap();
        let dy = gcomp_regimes(&d, &x, &Regime::Dynamic { kappa: f64::NEG_INFINITY }, &Regime::Dynamic { kappa: f64::INFINITY }, 250, 3)
            .unwrap();
        for (u, v) in s.contrast.values().iter().zip(dy.contrast.values()) {
            assert!((u - v).abs() <= 1e-12);
        }
    }

    #[test]
    fn closed_form_linear_contrast() {
        // With linear models the always-vs-never contrast is
        // Y_A0 + Y_A1 + Y_L1 * L1_A0, independent of the noise.
        let d = draws_t1(1.0, 5);
        let x = data(200, 2, false);
        let g = gcomp_static(&d, &x, &Regime::always(2), &Regime::never(2), 2000, 7).unwrap();
        for (m, v) in g.contrast.values().iter().enumerate() {
            let exact = -0.5 - 0.7 + 0.3 * (-0.4 + 0.01 * m as f64);
            assert!((v - exact).abs() < 1e-9, "{v} vs {exact}");
        }
    }

    #[test]
    fn single_time_point_matches_standardization() {
        let names = ["Y_int", "Y_L0", "Y_A0"];
        let rows = vec![vec![0.5, 1.2, 0.8], vec![0.1, -0.3, 1.1]];
        let d = DrawsMatrix::from_rows(names.iter().map(|s| s.to_string()).collect(), rows, vec![0, 0], vec![0, 1]).unwrap();
        let x = data(30, 1, false);
        let g = gcomp_static(&d, &x, &Regime::always(1), &Regime::never(1), 10, 5).unwrap();
        for m in 0..2 {
            let row = d.row(m);
            let mut rng = RngHandle::keyed(5, GCOMP_DOMAIN, m as u64);
            let w = bb_weights(30, &mut rng).unwrap();
            let mu1: Vec<f64> = x.l[0].iter().map(|l| row[0] + row[1] * l + row[2]).collect();
            let mu0: Vec<f64> = x.l[0].iter().map(|l| row[0] + row[1] * l).collect();
            assert_eq!(g.contrast.values()[m], standardize_marginal(&mu1, &mu0, &w, EstimandKind::Difference).unwrap());
        }
    }

    #[test]
    fn input_errors() {
        let d = draws_t1(1.0, 2);
        let x = data(10, 2, false);
        assert!(gcomp_static(&d, &x, &Regime::always(2), &Regime::never(2), 0, 1).is_err());
        assert!(matches!(gcomp_static(&d, &x, &Regime::always(3), &Regime::never(2), 10, 1), Err(Error::Shape(_))));
        assert!(gcomp_dynamic(&d, &x, &Regime::always(2), &Regime::never(2), 10, 1).is_err());
    }

    #[test]
    fn choose_b_trivial_cases() {
        let x = data(20, 2, true);
        let d = DrawsMatrix::from_rows(
            draws_t1(1.0, 1).names().to_vec(),
            vec![vec![0.1, 0.5, -0.4, 0.0, 1.0, 0.2, 0.3, -0.5, -0.7]],
            vec![0],
            vec![0],
        )
        .unwrap();
        assert_eq!(choose_b(&d, 0, &x, &Regime::always(2), &Regime::never(2), 0.01, 1).unwrap(), 100);
        let noisy = data(50, 2, false);
        let dn = draws_t1(1.0, 1);
        assert_eq!(choose_b(&dn, 0, &noisy, &Regime::Dynamic { kappa: 0.0 }, &Regime::never(2), 1.0, 1).unwrap(), 100);
    }

    #[test]
    fn mc_error_shrinks_with_b() {
        let d = draws_t1(1.0, 1);
        let x = data(100, 2, false);
        let (r, nv) = (Regime::Dynamic { kappa: 0.0 }, Regime::Dynamic { kappa: f64::INFINITY });
        let sd_at = |b: usize| {
            let v: Vec<f64> = (0..20).map(|s| gcomp_dynamic(&d, &x, &r, &nv, b, s).unwrap().contrast.values()[0]).collect();
            let m = v.iter().sum::<f64>() / 20.0;
            (v.iter().map(|y| (y - m).powi(2)).sum::<f64>() / 19.0).sqrt()
        };
        assert!(sd_at(800) <= 1.25 * sd_at(200));
    }
}
