//! Seeded generators for the simulation scenarios, and brute-force Monte
//! Carlo ground truths for their causal estimands.

mod oracle;

use std::fmt;
use std::str::FromStr;

use crate::data::{Column, LongitudinalDataset, ObservedDataset};
use crate::error::{invalid, Error, Result};
use crate::prob::{expit, sample_categorical, std_normal_cdf, RngHandle};

pub use oracle::{oracle_truth, Estimand, OracleResult};

/// Largest dose level of the dose scenario.
pub const DOSE_K: usize = 10;
/// Stratum probabilities of the partial-pooling scenario.
pub const STRATUM_P: [f64; 5] = [0.3, 0.3, 0.2, 0.1, 0.1];
/// Stratum shifts in treatment assignment.
pub const STRATUM_GAMMA: [f64; 5] = [0.0, -0.5, 0.5, 0.5, -0.5];
/// Stratum modifications of the treatment log-odds ratio (stratum 1 is 0).
pub const STRATUM_ETA: [f64; 5] = [0.0, -0.5, 0.0, 0.5, 0.6];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScenarioId {
    Dose,
    PartialPool,
    Sensitivity,
    Gcomp,
    /// Same as `Gcomp` but every dependence reaches back one period only.
    GcompMarkov,
    Bnp,
}

impl ScenarioId {
    pub const ALL: [ScenarioId; 6] =
        [Self::Dose, Self::PartialPool, Self::Sensitivity, Self::Gcomp, Self::GcompMarkov, Self::Bnp];

    pub fn default_n(self) -> usize {
        match self {
            Self::Dose | Self::Sensitivity => 100,
            Self::PartialPool | Self::Bnp => 500,
            Self::Gcomp | Self::GcompMarkov => 1000,
        }
    }

    pub fn is_longitudinal(self) -> bool {
        matches!(self, Self::Gcomp | Self::GcompMarkov)
    }
}

impl FromStr for ScenarioId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "dose" => Self::Dose,
            "partialpool" => Self::PartialPool,
            "sensitivity" => Self::Sensitivity,
            "gcomp" => Self::Gcomp,
            "gcomp-markov" => Self::GcompMarkov,
            "bnp" => Self::Bnp,
            _ => return Err(invalid(format!("unknown scenario `{s}`"))),
        })
    }
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Dose => "dose",
            Self::PartialPool => "partialpool",
            Self::Sensitivity => "sensitivity",
            Self::Gcomp => "gcomp",
            Self::GcompMarkov => "gcomp-markov",
            Self::Bnp => "bnp",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Scenario {
    pub id: ScenarioId,
    pub n: usize,
    pub seed: u64,
}

impl Scenario {
    pub fn new(id: ScenarioId, n: usize, seed: u64) -> Self {
        Self { id, n, seed }
    }

    pub fn with_default_n(id: ScenarioId, seed: u64) -> Self {
        Self::new(id, id.default_n(), seed)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Generated {
    Observed(ObservedDataset),
    Longitudinal(LongitudinalDataset),
}

impl Generated {
    pub fn observed(self) -> Result<ObservedDataset> {
        match self {
            Generated::Observed(d) => Ok(d),
            Generated::Longitudinal(_) => Err(invalid("scenario is longitudinal")),
        }
    }

    pub fn longitudinal(self) -> Result<LongitudinalDataset> {
        match self {
            Generated::Longitudinal(d) => Ok(d),
            Generated::Observed(_) => Err(invalid("scenario is a point-treatment scenario")),
        }
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        match self {
            Generated::Observed(d) => d.write_csv(w),
            Generated::Longitudinal(d) => d.write_csv(w),
        }
    }
}

/// Coefficients of the longitudinal scenario. Confounders:
/// `L_t ~ N(ar L_{t-1} + long L_1 1[t >= long_from] + a_effect A_{t-1}, 1)`;
/// treatment: `A_0 ~ Bern(expit(a0_slope L_0))`,
/// `A_t ~ Bern(expit(a_int + a_l L_t + a_prev A_{t-1}))`; outcome
/// `Y ~ N(y[0] + y[1] L_T + y[2] L_{T-1} + y[3] A_T + y[4] A_{T-1}, 1)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GcompConfig {
    pub time_points: usize,
    pub ar: f64,
    pub long: f64,
    pub long_from: usize,
    pub a_effect: f64,
    pub a0_slope: f64,
    pub a_int: f64,
    pub a_l: f64,
    pub a_prev: f64,
    pub y: [f64; 5],
}

impl GcompConfig {
    pub const PINNED: GcompConfig = GcompConfig {
        time_points: 10,
        ar: 0.6,
        long: 0.3,
        long_from: 3,
        a_effect: -0.4,
        a0_slope: 0.5,
        a_int: -0.5,
        a_l: 0.5,
        a_prev: 1.0,
        y: [0.5, 0.3, 0.2, -0.5, -0.3],
    };

    pub const MARKOV: GcompConfig = GcompConfig { long: 0.0, y: [0.5, 0.3, 0.0, -0.5, 0.0], ..Self::PINNED };

    pub fn for_id(id: ScenarioId) -> Option<Self> {
        match id {
            ScenarioId::Gcomp => Some(Self::PINNED),
            ScenarioId::GcompMarkov => Some(Self::MARKOV),
            _ => None,
        }
    }

    /// Conditional mean of `L_t`, `t >= 1`, given the history so far.
    pub fn confounder_mean(&self, t: usize, l: &[f64], a: &[f64]) -> f64 {
        let long = if t >= self.long_from { self.long * l[1] } else { 0.0 };
        self.ar * l[t - 1] + long + self.a_effect * a[t - 1]
    }

    pub fn treat_prob(&self, t: usize, l: &[f64], a: &[f64]) -> f64 {
        if t == 0 {
            expit(self.a0_slope * l[0])
        } else {
            expit(self.a_int + self.a_l * l[t] + self.a_prev * a[t - 1])
        }
    }

    pub fn outcome_mean(&self, l: &[f64], a: &[f64]) -> f64 {
        let t = self.time_points - 1;
        let y = &self.y;
        y[0] + y[1] * l[t] + y[2] * l[t - 1] + y[3] * a[t] + y[4] * a[t - 1]
    }
}

fn bern(p: f64, rng: &mut RngHandle) -> f64 {
    f64::from(u8::from(rng.uniform() < p))
}

/// Mean outcome of the dose scenario at dose `k` with `L = 0`.
pub fn dose_curve(k: f64) -> f64 {
    5.0 * std_normal_cdf(k - 5.0)
}

/// True incremental dose effect `Psi(k)`.
pub fn dose_increment(k: usize) -> f64 {
    dose_curve(k as f64) - dose_curve(k as f64 - 1.0)
}

fn gen_dose(n: usize, rng: &mut RngHandle) -> Result<ObservedDataset> {
    let (mut y, mut a, mut l) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    let mut p = [0.0; DOSE_K + 1];
    for _ in 0..n {
        let li = rng.std_normal();
        for (k, pk) in p.iter_mut().enumerate() {
            let k = k as f64;
            *pk = expit(1.0 - 2.0 / 9.0 * k + li - 0.5 * k * li);
        }
        let ai = sample_categorical(&p, rng) as f64;
        y.push(rng.normal(dose_curve(ai) - 5.0 * li, 2.0));
        a.push(ai);
        l.push(li);
    }
    ObservedDataset::new(y, a, vec![Column::new("L", l)])
}

fn gen_partial_pool(n: usize, rng: &mut RngHandle) -> Result<ObservedDataset> {
    let (mut y, mut a, mut w, mut v) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for _ in 0..n {
        let wi = rng.std_normal();
        let s = sample_categorical(&STRATUM_P, rng);
        let ai = bern(expit(wi + STRATUM_GAMMA[s]), rng);
        let yi = bern(expit(-1.0 + wi + (1.0 + STRATUM_ETA[s]) * ai), rng);
        y.push(yi);
        a.push(ai);
        w.push(wi);
        v.push(s + 1);
    }
    ObservedDataset::new(y, a, vec![Column::new("W", w)])?.with_strata(v)
}

fn gen_sensitivity(n: usize, rng: &mut RngHandle) -> Result<ObservedDataset> {
    let (mut y, mut a, mut l, mut u) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for _ in 0..n {
        let li = rng.std_normal();
        let ui = rng.std_normal();
        let ai = bern(expit(li + ui), rng);
        y.push(rng.normal(ai - li - 2.0 * ui, 1.0));
        a.push(ai);
        l.push(li);
        u.push(ui);
    }
    ObservedDataset::new(y, a, vec![Column::new("L", l), Column::new("U", u)])
}

fn gen_bnp(n: usize, rng: &mut RngHandle) -> Result<ObservedDataset> {
    let (mut y, mut a, mut l) = (Vec::new(), Vec::new(), Vec::new());
    let sd = 0.2f64.sqrt();
    for _ in 0..n {
        let li = rng.std_normal();
        let ai = bern(expit(1.0 - 0.5 * li), rng);
        y.push(rng.normal((li + 0.5 * li * li) * ai, sd));
        a.push(ai);
        l.push(li);
    }
    ObservedDataset::new(y, a, vec![Column::new("L", l)])
}

fn gen_gcomp(cfg: &GcompConfig, n: usize, rng: &mut RngHandle) -> Result<LongitudinalDataset> {
    let tp = cfg.time_points;
    let mut l = vec![vec![0.0; n]; tp];
    let mut a = vec![vec![0.0; n]; tp];
    let mut y = vec![0.0; n];
    let mut li = vec![0.0; tp];
    let mut ai = vec![0.0; tp];
    for i in 0..n {
        for t in 0..tp {
            li[t] = if t == 0 { rng.std_normal() } else { cfg.confounder_mean(t, &li, &ai) + rng.std_normal() };
            ai[t] = bern(cfg.treat_prob(t, &li, &ai), rng);
            l[t][i] = li[t];
            a[t][i] = ai[t];
        }
        y[i] = cfg.outcome_mean(&li, &ai) + rng.std_normal();
    }
    LongitudinalDataset::new(y, a, l)
}

/// Draws a dataset for `s`; the stream depends only on `(seed, id)`.
pub fn generate(s: &Scenario) -> Result<Generated> {
    if s.n == 0 {
        return Err(invalid("scenario needs n >= 1"));
    }
    let mut rng = RngHandle::keyed(s.seed, 0x5C, s.id as u64);
    Ok(match s.id {
        ScenarioId::Dose => Generated::Observed(gen_dose(s.n, &mut rng)?),
        ScenarioId::PartialPool => Generated::Observed(gen_partial_pool(s.n, &mut rng)?),
        ScenarioId::Sensitivity => Generated::Observed(gen_sensitivity(s.n, &mut rng)?),
        ScenarioId::Bnp => Generated::Observed(gen_bnp(s.n, &mut rng)?),
        ScenarioId::Gcomp | ScenarioId::GcompMarkov => {
            let cfg = GcompConfig::for_id(s.id).expect("longitudinal id");
            Generated::Longitudinal(gen_gcomp(&cfg, s.n, &mut rng)?)
        }
    })
}
