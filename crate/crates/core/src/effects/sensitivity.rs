//! Sensitivity analysis for unmeasured confounding: the confounding bias of
//! the standardized contrast, and posterior perturbation by a drawn bias.

use serde::{Deserialize, Serialize};

use super::estimand::{EstimandDraws, EstimandKind};
use crate::error::{Error, Result};
use crate::prob::{Distribution, RngHandle, SimplexWeights};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    #[default]
    AsIs,
    /// The prior is placed on `Delta* = -Delta`.
    Negated,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SensitivitySpec {
    pub prior: Distribution,
    pub direction: Direction,
}

impl SensitivitySpec {
    pub fn new(prior: Distribution, direction: Direction) -> Result<Self> {
        prior.validate()?;
        Ok(Self { prior, direction })
    }
}

/// Confounding bias `xi = sum_i w_i { delta0(L_i) e(L_i) + delta1(L_i) (1 - e(L_i)) }`.
pub fn bias_xi<D1, D0, E>(delta1: D1, delta0: D0, e: E, l_sample: &[Vec<f64>], w: &SimplexWeights) -> Result<f64>
where
    D1: Fn(&[f64]) -> f64,
    D0: Fn(&[f64]) -> f64,
    E: Fn(&[f64]) -> f64,
{
    if l_sample.len() != w.len() {
        return Err(Error::Shape(format!("{} rows for {} weights", l_sample.len(), w.len())));
    }
    let mut xi = 0.0;
    for (l, &wi) in l_sample.iter().zip(w.as_slice()) {
        let p = e(l);
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Domain(format!("propensity {p} outside [0, 1]")));
        }
        xi += wi * (delta0(l) * p + delta1(l) * (1.0 - p));
    }
    Ok(xi)
}

/// `Psi_s = Psi - Delta` per draw, with `Delta` drawn from the prior in draw
/// order.
pub fn sensitivity_perturb(psi: &EstimandDraws, spec: &SensitivitySpec, rng: &mut RngHandle) -> Result<EstimandDraws> {
    if psi.kind != EstimandKind::Difference {
        return Err(Error::UnsupportedKind(format!("{}: perturbation is additive and needs a difference", psi.name)));
    }
    spec.prior.validate()?;
    let values = psi
        .values()
        .iter()
        .map(|&p| {
            let d = spec.prior.sample(rng)?;
            let delta = match spec.direction {
                Direction::AsIs => d,
                Direction::Negated => -d,
            };
            Ok(p - delta)
        })
        .collect::<Result<Vec<_>>>()?;
    psi.with_values(format!("{}_s", psi.name), EstimandKind::Difference, values)
}
