//! Split R-hat and multi-chain effective sample size.

use serde::Serialize;

use super::draws::DrawsMatrix;
use crate::error::{invalid, Error, Result};

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn var(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0)
}

fn chains_of(draws: &DrawsMatrix, param: &str) -> Result<Vec<Vec<f64>>> {
    draws.column_by_chain(param).ok_or_else(|| Error::MissingColumn(param.to_string()))
}

/// Split-half potential scale reduction of `param`.
pub fn split_rhat(draws: &DrawsMatrix, param: &str) -> Result<f64> {
    split_rhat_chains(&chains_of(draws, param)?, param)
}

pub fn split_rhat_chains(chains: &[Vec<f64>], label: &str) -> Result<f64> {
    if chains.len() < 2 {
        return Err(invalid("split R-hat needs at least 2 chains"));
    }
    let n = chains.iter().map(Vec::len).min().unwrap_or(0);
    if n < 4 {
        return Err(invalid("split R-hat needs at least 4 draws per chain"));
    }
    let half = n / 2;
    let mut pieces: Vec<&[f64]> = Vec::with_capacity(2 * chains.len());
    for c in chains {
        pieces.push(&c[..half]);
        pieces.push(&c[n - half..n]);
    }
    let within: Vec<f64> = pieces.iter().map(|p| var(p)).collect();
    let w = mean(&within);
    let means: Vec<f64> = pieces.iter().map(|p| mean(p)).collect();
    let b_over_n = var(&means);
    if w == 0.0 {
        if b_over_n == 0.0 {
            return Err(Error::DegenerateVariance(label.to_string()));
        }
        return Ok(f64::INFINITY);
    }
    let nh = half as f64;
    let var_plus = (nh - 1.0) / nh * w + b_over_n;
    Ok((var_plus / w).sqrt().max(1.0))
}

/// Effective sample size with Geyer's initial positive sequence, pooled over
/// chains and capped at the total draw count.
pub fn effective_sample_size(draws: &DrawsMatrix, param: &str) -> Result<f64> {
    effective_sample_size_chains(&chains_of(draws, param)?, param)
}

pub fn effective_sample_size_chains(chains: &[Vec<f64>], label: &str) -> Result<f64> {
    let m = chains.len();
    let n = chains.iter().map(Vec::len).min().unwrap_or(0);
    if m * n < 100 {
        return Err(invalid("effective sample size needs at least 100 draws"));
    }
    let centered: Vec<Vec<f64>> = chains
        .iter()
        .map(|c| {
            let mu = mean(&c[..n]);
            c[..n].iter().map(|v| v - mu).collect()
        })
        .collect();
    let acov = |t: usize| -> f64 {
        centered.iter().map(|c| c[..n - t].iter().zip(&c[t..]).map(|(a, b)| a * b).sum::<f64>() / n as f64).sum::<f64>()
            / m as f64
    };
    let w = acov(0) * n as f64 / (n as f64 - 1.0);
    let b_over_n = if m > 1 { var(&chains.iter().map(|c| mean(&c[..n])).collect::<Vec<_>>()) } else { 0.0 };
    let var_plus = (n as f64 - 1.0) / n as f64 * w + b_over_n;
    if w == 0.0 || var_plus == 0.0 {
        return Err(Error::DegenerateVariance(label.to_string()));
    }
    let rho = |t: usize| 1.0 - (w - acov(t)) / var_plus;
    // Sum adjacent-lag pairs while positive, enforcing monotone decrease.
    let mut tau = -1.0;
    let mut prev_pair = f64::INFINITY;
    let mut t = 0;
    while t + 1 < n {
        let pair = rho(t) + rho(t + 1);
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(prev_pair);
        tau += 2.0 * pair;
        prev_pair = pair;
        t += 2;
    }
    let total = (m * n) as f64;
    Ok((total / tau.max(1e-12)).min(total))
}

#[derive(Clone, Debug, Serialize)]
pub struct ParamDiagnostics {
    pub name: String,
    pub rhat: Option<f64>,
    pub ess: Option<f64>,
    pub note: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct DiagnosticsReport {
    pub n_chains: usize,
    pub n_draws: usize,
    pub params: Vec<ParamDiagnostics>,
    pub acceptance: Vec<Vec<f64>>,
    pub warnings: Vec<String>,
}

impl DiagnosticsReport {
    pub fn max_rhat(&self) -> Option<f64> {
        self.params.iter().filter_map(|p| p.rhat).filter(|r| r.is_finite()).fold(None, |a, r| Some(a.map_or(r, |a: f64| a.max(r))))
    }

    pub fn any_rhat_above(&self, limit: f64) -> bool {
        self.params.iter().any(|p| p.rhat.is_some_and(|r| r > limit))
    }
}

pub fn diagnose(draws: &DrawsMatrix) -> DiagnosticsReport {
    let params = draws
        .names()
        .iter()
        .map(|name| {
            let chains = draws.column_by_chain(name).unwrap_or_default();
            let mut notes = Vec::new();
            let rhat = match split_rhat_chains(&chains, name) {
                Ok(r) => Some(r),
                Err(e) => {
                    notes.push(format!("rhat: {e}"));
                    None
                }
            };
            let ess = match effective_sample_size_chains(&chains, name) {
                Ok(e) => Some(e),
                Err(e) => {
                    notes.push(format!("ess: {e}"));
                    None
                }
            };
            ParamDiagnostics { name: name.clone(), rhat, ess, note: (!notes.is_empty()).then(|| notes.join("; ")) }
        })
        .collect();
    DiagnosticsReport {
        n_chains: draws.n_chains(),
        n_draws: draws.n_rows(),
        params,
        acceptance: draws.stats.iter().map(|s| s.acceptance.clone()).collect(),
        warnings: draws.warnings.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::RngHandle;

    fn iid(seed: u64, chains: usize, n: usize, shift: &[f64]) -> Vec<Vec<f64>> {
        (0..chains)
            .map(|c| {
                let mut r = RngHandle::new(seed, c as u64);
                (0..n).map(|_| r.std_normal() + shift.get(c).copied().unwrap_or(0.0)).collect()
            })
            .collect()
    }

    #[test]
    fn rhat_null_case() {
        let r = split_rhat_chains(&iid(1, 4, 1000, &[]), "x").unwrap();
        assert!((1.0..=1.05).contains(&r), "{r}");
    }

    #[test]
    fn rhat_detects_shifted_chain() {
        let r = split_rhat_chains(&iid(2, 4, 1000, &[0.0, 0.0, 0.0, 10.0]), "x").unwrap();
        assert!(r > 1.5, "{r}");
    }

    #[test]
    fn rhat_constant_chains_flagged() {
        let c = vec![vec![2.0; 50]; 4];
        assert!(matches!(split_rhat_chains(&c, "x"), Err(Error::DegenerateVariance(_))));
    }

    #[test]
    fn rhat_preconditions() {
        assert!(split_rhat_chains(&iid(1, 1, 100, &[]), "x").is_err());
        assert!(split_rhat_chains(&iid(1, 2, 3, &[]), "x").is_err());
    }

    #[test]
    fn ess_iid() {
        let c = iid(3, 4, 1000, &[]);
        let e = effective_sample_size_chains(&c, "x").unwrap();
        assert!((3200.0..=4800.0).contains(&e), "{e}");
    }

    #[test]
    fn ess_ar1() {
        let mut r = RngHandle::new(4, 0);
        let phi: f64 = 0.9;
        let n = 40_000;
        let mut x = 0.0;
        let s = (1.0 - phi * phi).sqrt();
        let c: Vec<f64> = (0..n)
            .map(|_| {
                x = phi * x + s * r.std_normal();
                x
            })
            .collect();
        let e = effective_sample_size_chains(&[c], "x").unwrap();
        let expected = n as f64 * (1.0 - phi) / (1.0 + phi);
        assert!((e / expected - 1.0).abs() < 0.3, "{e} vs {expected}");
    }

    #[test]
    fn ess_constant_flagged() {
        assert!(matches!(effective_sample_size_chains(&[vec![1.0; 200]], "x"), Err(Error::DegenerateVariance(_))));
    }

    #[test]
    fn ess_capped_at_total() {
        // Anti-correlated draws would otherwise give ESS above M.
        let c: Vec<f64> = (0..1000).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 } + (i as f64 * 1e-3).sin() * 0.01).collect();
        let e = effective_sample_size_chains(&[c], "x").unwrap();
        assert!(e <= 1000.0);
    }
}
