//! Bayesian-bootstrap standardization of fitted conditional means.

use rayon::prelude::*;

use super::estimand::{EstimandDraws, EstimandKind};
use crate::data::ObservedDataset;
use crate::error::{invalid, Error, Result};
use crate::mcmc::DrawsMatrix;
use crate::models::partial_pool::PartialPoolMean;
use crate::parallel;
use crate::prob::{expit, sample_dirichlet, RngHandle, SimplexWeights};

/// Substream domain for per-draw bootstrap weights.
const BB_DOMAIN: u64 = 0xBB;
const CLAMP: f64 = 1e-12;

/// One draw from the Bayesian bootstrap over `n` units.
pub fn bb_weights(n: usize, rng: &mut RngHandle) -> Result<SimplexWeights> {
    if n == 0 {
        return Err(invalid("bootstrap needs n >= 1"));
    }
    sample_dirichlet(&vec![1.0; n], rng)
}

/// Per-draw bootstrap RNG for posterior draw `m` in a given stratum.
pub fn bb_stream(seed: u64, stratum: u64, m: usize) -> RngHandle {
    RngHandle::keyed(seed, BB_DOMAIN + (stratum << 8), m as u64)
}

fn weighted(x: &[f64], w: &[f64]) -> f64 {
    x.iter().zip(w).map(|(a, b)| a * b).sum()
}

fn odds(p: f64) -> f64 {
    p / (1.0 - p)
}

/// `sum_i w_i c_i`, returning the common value exactly when every contrast
/// is equal.
pub fn standardize_contrast(contrast: &[f64], w: &SimplexWeights) -> Result<f64> {
    if contrast.len() != w.len() {
        return Err(Error::Shape(format!("{} contrasts for {} weights", contrast.len(), w.len())));
    }
    if contrast.iter().all(|&c| c == contrast[0]) {
        return Ok(contrast[0]);
    }
    Ok(weighted(contrast, w.as_slice()))
}

/// One posterior draw of the marginal contrast from subject-level means
/// under treatment (`mu1`) and control (`mu0`).
pub fn standardize_marginal(mu1: &[f64], mu0: &[f64], w: &SimplexWeights, kind: EstimandKind) -> Result<f64> {
    if mu1.len() != w.len() || mu0.len() != w.len() {
        return Err(Error::Shape(format!("means of length {} and {} for {} weights", mu1.len(), mu0.len(), w.len())));
    }
    match kind {
        EstimandKind::Difference => {
            let c: Vec<f64> = mu1.iter().zip(mu0).map(|(a, b)| a - b).collect();
            standardize_contrast(&c, w)
        }
        EstimandKind::Ratio => {
            let (m1, m0) = (weighted(mu1, w.as_slice()), weighted(mu0, w.as_slice()));
            if m0 == 0.0 {
                return Err(Error::Domain("control mean is zero".into()));
            }
            Ok(m1 / m0)
        }
        EstimandKind::OddsRatio => {
            if mu1.iter().chain(mu0).any(|&p| !(p > 0.0 && p < 1.0)) {
                return Err(Error::Domain("odds-ratio needs means in (0, 1)".into()));
            }
            Ok(odds(weighted(mu1, w.as_slice())) / odds(weighted(mu0, w.as_slice())))
        }
    }
}

/// Average treatment effect draws from a linear-model fit. Each subject's
/// contrast is the treatment coefficient, so the standardized value equals
/// the `theta` draw exactly.
pub fn standardize_linear(draws: &DrawsMatrix, n: usize, seed: u64) -> Result<EstimandDraws> {
    let th = draws.require("theta")?;
    let values = (0..draws.n_rows())
        .map(|m| {
            let w = bb_weights(n, &mut bb_stream(seed, 0, m))?;
            standardize_contrast(&vec![draws.row(m)[th]; n], &w)
        })
        .collect::<Result<Vec<_>>>()?;
    EstimandDraws::aligned("ATE", EstimandKind::Difference, values, draws)
}

/// Marginal contrasts from per-draw subject-level mean vectors, with a fresh
/// bootstrap draw for each posterior draw.
pub fn standardize_predictions(
    name: &str,
    mu1: &[Vec<f64>],
    mu0: &[Vec<f64>],
    kind: EstimandKind,
    seed: u64,
) -> Result<Vec<f64>> {
    if mu1.len() != mu0.len() {
        return Err(Error::Shape(format!("{name}: {} vs {} prediction draws", mu1.len(), mu0.len())));
    }
    parallel::install(|| {
        (0..mu1.len())
            .into_par_iter()
            .map(|m| {
                let w = bb_weights(mu1[m].len(), &mut bb_stream(seed, 0, m))?;
                standardize_marginal(&mu1[m], &mu0[m], &w, kind)
            })
            .collect()
    })
}

/// Stratum-specific marginal odds ratios from a partial-pooling fit. For
/// every draw and stratum the confounder distribution within the stratum
/// gets its own bootstrap weights.
pub fn standardize_stratified_or(draws: &DrawsMatrix, data: &ObservedDataset, seed: u64) -> Result<Vec<EstimandDraws>> {
    let v = data.v.as_ref().ok_or_else(|| Error::MissingColumn("V".into()))?;
    let q1 = data.num_strata();
    let look = PartialPoolMean::resolve(draws, data)?;
    let rows: Vec<Vec<f64>> = (0..data.n()).map(|i| data.row(i)).collect();
    let mut out = Vec::with_capacity(q1);
    for s in 1..=q1 {
        let members: Vec<usize> = (0..data.n()).filter(|&i| v[i] == s).collect();
        if members.is_empty() {
            return Err(Error::MissingStratum(s));
        }
        let per_draw: Vec<(f64, bool)> = parallel::install(|| {
            (0..draws.n_rows())
                .into_par_iter()
                .map(|m| {
                    let row = draws.row(m);
                    let w = bb_weights(members.len(), &mut bb_stream(seed, s as u64, m))?;
                    let mut mu = [0.0; 2];
                    for (k, &i) in members.iter().enumerate() {
                        for (a, slot) in mu.iter_mut().enumerate() {
                            *slot += w.as_slice()[k] * expit(look.eta(row, &rows[i], s, a as f64));
                        }
                    }
                    let clamped = mu.iter().any(|&p| !(CLAMP..=1.0 - CLAMP).contains(&p));
                    let [m0, m1] = mu.map(|p| p.clamp(CLAMP, 1.0 - CLAMP));
                    Ok((odds(m1) / odds(m0), clamped))
                })
                .collect::<Result<Vec<_>>>()
        })?;
        let n_clamped = per_draw.iter().filter(|d| d.1).count();
        let mut e = EstimandDraws::aligned(
            format!("OR_v{s}"),
            EstimandKind::OddsRatio,
            per_draw.into_iter().map(|d| d.0).collect(),
            draws,
        )?;
        if n_clamped > 0 {
            e.warnings.push(format!("stratum {s}: {n_clamped} draws had a mean clamped away from 0 or 1"));
        }
        out.push(e);
    }
    Ok(out)
}
