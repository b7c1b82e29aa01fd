//! Time-varying treatments: sequential confounder and outcome models with
//! time-decaying shrinkage, and Monte Carlo g-computation under static and
//! dynamic regimes.

mod model;
mod simulate;

use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};

pub use model::{fit_sequential, model_prefix, SequentialTarget, ShrinkageFamily};
pub use simulate::{choose_b, gcomp_dynamic, gcomp_regimes, gcomp_static, GcompDraws};

#[derive(Clone, Debug, PartialEq)]
pub struct ShrinkageSpec {
    pub family: ShrinkageFamily,
    /// Ridge decay: the prior sd of a lag-`k` coefficient is
    /// `lambda^-k * sigma`.
    pub lambda: f64,
    /// Horseshoe global scale.
    pub nu: f64,
    /// Apply the lag prior to treatment coefficients too; otherwise they
    /// get a wide `N(0, 10^2)`.
    pub shrink_treatment: bool,
    /// Inverse-gamma `(a, b)` prior on every model variance.
    pub variance_a: f64,
    pub variance_b: f64,
    pub prior_only: bool,
}

impl ShrinkageSpec {
    pub fn ridge(lambda: f64) -> Self {
        Self {
            family: ShrinkageFamily::Ridge,
            lambda,
            nu: 1.0,
            shrink_treatment: true,
            variance_a: 3.0,
            variance_b: 2.0,
            prior_only: false,
        }
    }

    pub fn horseshoe(nu: f64) -> Self {
        Self { family: ShrinkageFamily::Horseshoe, nu, ..Self::ridge(2.0) }
    }

    pub fn validate(&self) -> Result<()> {
        if self.family == ShrinkageFamily::Ridge && !(self.lambda > 1.0 && self.lambda.is_finite()) {
            return Err(invalid("ridge decay lambda must exceed 1"));
        }
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return Err(invalid("horseshoe scale nu must be positive"));
        }
        if !(self.variance_a > 0.0 && self.variance_b > 0.0) {
            return Err(invalid("variance prior parameters must be positive"));
        }
        Ok(())
    }
}

/// A treatment strategy over time points `0..=T`.
#[derive(Clone, Debug, PartialEq)]
pub enum Regime {
    Static(Vec<u8>),
    /// `a_t = 1[L_t > kappa]` at every time point; `kappa = -inf` always
    /// treats and `+inf` never does.
    Dynamic { kappa: f64 },
}

impl Regime {
    pub fn always(time_points: usize) -> Self {
        Regime::Static(vec![1; time_points])
    }

    pub fn never(time_points: usize) -> Self {
        Regime::Static(vec![0; time_points])
    }

    pub fn is_static(&self) -> bool {
        matches!(self, Regime::Static(_))
    }

    /// Treatment at time `t` given the current confounder value.
    pub fn assign(&self, t: usize, l_t: f64) -> f64 {
        match self {
            Regime::Static(v) => f64::from(v[t]),
            Regime::Dynamic { kappa } => f64::from(u8::from(l_t > *kappa)),
        }
    }

    fn check_len(&self, time_points: usize) -> Result<()> {
        match self {
            Regime::Static(v) if v.len() != time_points => {
                Err(Error::Shape(format!("static regime has {} entries for {time_points} time points", v.len())))
            }
            _ => Ok(()),
        }
    }
}

fn parse_kappa(s: &str) -> Result<f64> {
    match s.trim() {
        "inf" | "+inf" | "Inf" => Ok(f64::INFINITY),
        "-inf" | "-Inf" => Ok(f64::NEG_INFINITY),
        v => v.parse::<f64>().map_err(|_| invalid(format!("bad kappa `{v}`"))).and_then(|k| {
            if k.is_nan() {
                Err(invalid("kappa is NaN"))
            } else {
                Ok(k)
            }
        }),
    }
}

/// Parses the flat `key=value` regime format:
/// `kind=static` with `vec=1,1,0`, or `kind=dynamic` with `kappa=0.5`.
impl FromStr for Regime {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut kind = None;
        let mut vec = None;
        let mut kappa = None;
        for line in text.lines().flat_map(|l| l.split(';')) {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| invalid(format!("expected key=value, got `{line}`")))?;
            match k.trim() {
                "kind" => kind = Some(v.trim().to_string()),
                "vec" => {
                    let parsed = v
                        .split(',')
                        .map(|x| match x.trim() {
                            "0" => Ok(0u8),
                            "1" => Ok(1u8),
                            o => Err(invalid(format!("regime entries must be 0 or 1, got `{o}`"))),
                        })
                        .collect::<Result<Vec<_>>>()?;
                    vec = Some(parsed);
                }
                "kappa" => kappa = Some(parse_kappa(v)?),
                other => return Err(invalid(format!("unknown regime key `{other}`"))),
            }
        }
        match kind.as_deref() {
            Some("static") => Ok(Regime::Static(vec.ok_or_else(|| invalid("static regime needs vec="))?)),
            Some("dynamic") => Ok(Regime::Dynamic { kappa: kappa.ok_or_else(|| invalid("dynamic regime needs kappa="))? }),
            Some(k) => Err(invalid(format!("unknown regime kind `{k}`"))),
            None => Err(invalid("regime needs kind=static|dynamic")),
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Regime::Static(v) => {
                let s: Vec<String> = v.iter().map(u8::to_string).collect();
                write!(f, "kind=static\nvec={}", s.join(","))
            }
            Regime::Dynamic { kappa } => write!(f, "kind=dynamic\nkappa={kappa}"),
        }
    }
}
