//! Random streams, scalar distributions and the special functions shared by
//! every model.

use std::f64::consts::{LN_2, PI};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Exp1, StandardNormal};
use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

use crate::error::{invalid, Error, Result};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// A reproducible random stream identified by `(seed, stream_id)`.
///
/// Backed by ChaCha8 with the stream id mapped onto the cipher's stream
/// selector, so streams never overlap and can be created in any order.
#[derive(Clone, Debug)]
pub struct RngHandle {
    seed: u64,
    stream_id: u64,
    inner: ChaCha8Rng,
}

impl RngHandle {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        Self { seed, stream_id, inner }
    }

    /// Stream for item `index` of a named sub-computation. Different domains
    /// with the same seed land on unrelated keys.
    pub fn keyed(seed: u64, domain: u64, index: u64) -> Self {
        Self::new(splitmix64(seed ^ splitmix64(domain)), index)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// Uniform on the open interval (0, 1).
    pub fn uniform_open(&mut self) -> f64 {
        loop {
            let u = self.inner.random::<f64>();
            if u > 0.0 {
                return u;
            }
        }
    }

    pub fn std_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    pub fn normal(&mut self, mean: f64, sd: f64) -> f64 {
        mean + sd * self.std_normal()
    }

    pub fn exp1(&mut self) -> f64 {
        Exp1.sample(&mut self.inner)
    }

    /// Gamma with shape `a` and rate `b`.
    pub fn gamma(&mut self, a: f64, b: f64) -> f64 {
        let g = rand_distr::Gamma::new(a, 1.0 / b).expect("gamma parameters checked by caller");
        g.sample(&mut self.inner)
    }

    pub fn index(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }
}

impl RngCore for RngHandle {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Weights on the probability simplex.
#[derive(Clone, Debug, PartialEq)]
pub struct SimplexWeights(Vec<f64>);

impl SimplexWeights {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(invalid("simplex weights must be non-empty"));
        }
        if w.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
            return Err(invalid("simplex weights must be finite and non-negative"));
        }
        let s: f64 = w.iter().sum();
        if (s - 1.0).abs() > 1e-12 {
            return Err(invalid(format!("simplex weights sum to {s}, not 1")));
        }
        Ok(Self(w))
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(invalid("n must be at least 1"));
        }
        Ok(Self(vec![1.0 / n as f64; n]))
    }

    /// All mass on subject `j`.
    pub fn point_mass(n: usize, j: usize) -> Result<Self> {
        if j >= n {
            return Err(invalid(format!("index {j} out of range for {n} weights")));
        }
        let mut w = vec![0.0; n];
        w[j] = 1.0;
        Ok(Self(w))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

pub fn sample_dirichlet(alpha: &[f64], rng: &mut RngHandle) -> Result<SimplexWeights> {
    if alpha.is_empty() {
        return Err(invalid("dirichlet concentration must be non-empty"));
    }
    if alpha.iter().any(|&a| !(a > 0.0) || !a.is_finite()) {
        return Err(invalid("dirichlet concentrations must be positive and finite"));
    }
    if alpha.len() == 1 {
        return Ok(SimplexWeights(vec![1.0]));
    }
    let mut g: Vec<f64> = alpha
        .iter()
        .map(|&a| {
            let x = if a == 1.0 { rng.exp1() } else { rng.gamma(a, 1.0) };
            x.max(f64::MIN_POSITIVE)
        })
        .collect();
    let s: f64 = g.iter().sum();
    g.iter_mut().for_each(|x| *x /= s);
    Ok(SimplexWeights(g))
}

/// Scalar distributions. Scales are standard deviations, `Gamma` uses a
/// rate, `InverseGamma` a scale.
#[derive(Clone, Debug, PartialEq)]
pub enum Distribution {
    Normal { mean: f64, sd: f64 },
    Gamma { shape: f64, rate: f64 },
    InverseGamma { shape: f64, scale: f64 },
    Bernoulli { p: f64 },
    Poisson { lambda: f64 },
    HalfCauchy { scale: f64 },
    HalfNormal { scale: f64 },
    Beta { a: f64, b: f64 },
    Categorical { p: Vec<f64> },
    PointMass { value: f64 },
}

impl Distribution {
    pub fn validate(&self) -> Result<()> {
        use Distribution::*;
        let ok = match self {
            Normal { mean, sd } => mean.is_finite() && *sd >= 0.0 && sd.is_finite(),
            Gamma { shape, rate } => pos(*shape) && pos(*rate),
            InverseGamma { shape, scale } => pos(*shape) && pos(*scale),
            Bernoulli { p } => (0.0..=1.0).contains(p),
            Poisson { lambda } => *lambda >= 0.0 && lambda.is_finite(),
            HalfCauchy { scale } | HalfNormal { scale } => pos(*scale),
            Beta { a, b } => pos(*a) && pos(*b),
            Categorical { p } => {
                !p.is_empty()
                    && p.iter().all(|&x| x >= 0.0 && x.is_finite())
                    && (p.iter().sum::<f64>() - 1.0).abs() < 1e-9
            }
            PointMass { value } => value.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(invalid(format!("illegal parameters for {self}")))
        }
    }

    pub fn sample(&self, rng: &mut RngHandle) -> Result<f64> {
        self.validate()?;
        Ok(self.sample_unchecked(rng))
    }

    fn sample_unchecked(&self, rng: &mut RngHandle) -> f64 {
        use Distribution::*;
        match self {
            Normal { mean, sd } => mean + sd * rng.std_normal(),
            Gamma { shape, rate } => rng.gamma(*shape, *rate),
            InverseGamma { shape, scale } => 1.0 / rng.gamma(*shape, *scale),
            Bernoulli { p } => f64::from(u8::from(rng.uniform() < *p)),
            Poisson { lambda } => {
                if *lambda == 0.0 {
                    0.0
                } else {
                    rand_distr::Poisson::new(*lambda).expect("validated").sample(rng)
                }
            }
            HalfCauchy { scale } => (scale * (PI * (rng.uniform_open() - 0.5)).tan()).abs(),
            HalfNormal { scale } => (scale * rng.std_normal()).abs(),
            Beta { a, b } => rand_distr::Beta::new(*a, *b).expect("validated").sample(rng),
            Categorical { p } => sample_categorical(p, rng) as f64,
            PointMass { value } => *value,
        }
    }

    pub fn log_density(&self, x: f64) -> Result<f64> {
        self.validate()?;
        use Distribution::*;
        let lp = match self {
            Normal { mean, sd } => {
                if *sd == 0.0 {
                    if x == *mean {
                        f64::INFINITY
                    } else {
                        f64::NEG_INFINITY
                    }
                } else {
                    normal_ln_pdf(x, *mean, *sd)
                }
            }
            Gamma { shape, rate } => {
                if x <= 0.0 {
                    f64::NEG_INFINITY
                } else {
                    shape * rate.ln() - ln_gamma(*shape) + (shape - 1.0) * x.ln() - rate * x
                }
            }
            InverseGamma { shape, scale } => {
                if x <= 0.0 {
                    f64::NEG_INFINITY
                } else {
                    inv_gamma_ln_pdf(x, *shape, *scale)
                }
            }
            Bernoulli { p } => {
                if x == 1.0 {
                    p.ln()
                } else if x == 0.0 {
                    (1.0 - p).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            Poisson { lambda } => {
                if x < 0.0 || x.fract() != 0.0 {
                    f64::NEG_INFINITY
                } else if *lambda == 0.0 {
                    if x == 0.0 { 0.0 } else { f64::NEG_INFINITY }
                } else {
                    x * lambda.ln() - lambda - ln_gamma(x + 1.0)
                }
            }
            HalfCauchy { scale } => {
                if x < 0.0 {
                    f64::NEG_INFINITY
                } else {
                    LN_2 - (PI * scale).ln() - (x / scale).powi(2).ln_1p()
                }
            }
            HalfNormal { scale } => {
                if x < 0.0 {
                    f64::NEG_INFINITY
                } else {
                    LN_2 + normal_ln_pdf(x, 0.0, *scale)
                }
            }
            Beta { a, b } => {
                if x <= 0.0 || x >= 1.0 {
                    f64::NEG_INFINITY
                } else {
                    ln_gamma(a + b) - ln_gamma(*a) - ln_gamma(*b)
                        + (a - 1.0) * x.ln()
                        + (b - 1.0) * (-x).ln_1p()
                }
            }
            Categorical { p } => {
                if x < 0.0 || x.fract() != 0.0 || x as usize >= p.len() {
                    f64::NEG_INFINITY
                } else {
                    p[x as usize].ln()
                }
            }
            PointMass { value } => {
                if x == *value {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
        };
        Ok(lp)
    }

    /// Analytic mean; `None` when it does not exist.
    pub fn mean(&self) -> Option<f64> {
        use Distribution::*;
        match self {
            Normal { mean, .. } => Some(*mean),
            Gamma { shape, rate } => Some(shape / rate),
            InverseGamma { shape, scale } => (*shape > 1.0).then(|| scale / (shape - 1.0)),
            Bernoulli { p } => Some(*p),
            Poisson { lambda } => Some(*lambda),
            HalfCauchy { .. } => None,
            HalfNormal { scale } => Some(scale * (2.0 / PI).sqrt()),
            Beta { a, b } => Some(a / (a + b)),
            Categorical { p } => Some(p.iter().enumerate().map(|(i, w)| i as f64 * w).sum()),
            PointMass { value } => Some(*value),
        }
    }

    /// Analytic variance; `None` when it does not exist.
    pub fn variance(&self) -> Option<f64> {
        use Distribution::*;
        match self {
            Normal { sd, .. } => Some(sd * sd),
            Gamma { shape, rate } => Some(shape / (rate * rate)),
            InverseGamma { shape, scale } => {
                (*shape > 2.0).then(|| scale * scale / ((shape - 1.0).powi(2) * (shape - 2.0)))
            }
            Bernoulli { p } => Some(p * (1.0 - p)),
            Poisson { lambda } => Some(*lambda),
            HalfCauchy { .. } => None,
            HalfNormal { scale } => Some(scale * scale * (1.0 - 2.0 / PI)),
            Beta { a, b } => Some(a * b / ((a + b).powi(2) * (a + b + 1.0))),
            Categorical { p } => {
                let m: f64 = p.iter().enumerate().map(|(i, w)| i as f64 * w).sum();
                Some(p.iter().enumerate().map(|(i, w)| w * (i as f64 - m).powi(2)).sum())
            }
            PointMass { .. } => Some(0.0),
        }
    }
}

fn pos(x: f64) -> bool {
    x > 0.0 && x.is_finite()
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Distribution::*;
        match self {
            Normal { mean, sd } => write!(f, "normal:{mean},{sd}"),
            Gamma { shape, rate } => write!(f, "gamma:{shape},{rate}"),
            InverseGamma { shape, scale } => write!(f, "invgamma:{shape},{scale}"),
            Bernoulli { p } => write!(f, "bernoulli:{p}"),
            Poisson { lambda } => write!(f, "poisson:{lambda}"),
            HalfCauchy { scale } => write!(f, "halfcauchy:{scale}"),
            HalfNormal { scale } => write!(f, "halfnormal:{scale}"),
            Beta { a, b } => write!(f, "beta:{a},{b}"),
            Categorical { p } => {
                let parts: Vec<String> = p.iter().map(|x| x.to_string()).collect();
                write!(f, "categorical:{}", parts.join(","))
            }
            PointMass { value } => write!(f, "pointmass:{value}"),
        }
    }
}

impl FromStr for Distribution {
    type Err = Error;

    /// Parses `family:p1,p2,...`, e.g. `normal:0,0.577` or `gamma:1,3`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (family, rest) = s.split_once(':').unwrap_or((s, ""));
        let params: Vec<f64> = if rest.trim().is_empty() {
            Vec::new()
        } else {
            rest.split(',')
                .map(|p| {
                    p.trim()
                        .parse::<f64>()
                        .map_err(|_| invalid(format!("bad number `{p}` in distribution `{s}`")))
                })
                .collect::<Result<_>>()?
        };
        let want = |k: usize| -> Result<()> {
            if params.len() == k {
                Ok(())
            } else {
                Err(invalid(format!("`{family}` takes {k} parameter(s), got {}", params.len())))
            }
        };
        let d = match family.to_ascii_lowercase().as_str() {
            "normal" => {
                want(2)?;
                Distribution::Normal { mean: params[0], sd: params[1] }
            }
            "gamma" => {
                want(2)?;
                Distribution::Gamma { shape: params[0], rate: params[1] }
            }
            "invgamma" | "inversegamma" => {
                want(2)?;
                Distribution::InverseGamma { shape: params[0], scale: params[1] }
            }
            "bernoulli" => {
                want(1)?;
                Distribution::Bernoulli { p: params[0] }
            }
            "poisson" => {
                want(1)?;
                Distribution::Poisson { lambda: params[0] }
            }
            "halfcauchy" => {
                want(1)?;
                Distribution::HalfCauchy { scale: params[0] }
            }
            "halfnormal" => {
                want(1)?;
                Distribution::HalfNormal { scale: params[0] }
            }
            "beta" => {
                want(2)?;
                Distribution::Beta { a: params[0], b: params[1] }
            }
            "categorical" => Distribution::Categorical { p: params },
            "pointmass" => {
                want(1)?;
                Distribution::PointMass { value: params[0] }
            }
            other => return Err(invalid(format!("unknown distribution family `{other}`"))),
        };
        d.validate()?;
        Ok(d)
    }
}

pub fn sample_scalar(dist: &Distribution, rng: &mut RngHandle) -> Result<f64> {
    dist.sample(rng)
}

pub fn log_density(dist: &Distribution, x: f64) -> Result<f64> {
    dist.log_density(x)
}

/// Index drawn with probabilities proportional to `p`.
pub fn sample_categorical(p: &[f64], rng: &mut RngHandle) -> usize {
    let total: f64 = p.iter().sum();
    let mut u = rng.uniform() * total;
    for (i, &w) in p.iter().enumerate() {
        if u < w {
            return i;
        }
        u -= w;
    }
    p.iter().rposition(|&w| w > 0.0).unwrap_or(p.len() - 1)
}

/// Index drawn with probabilities proportional to `exp(logp)`.
pub fn sample_log_categorical(logp: &[f64], rng: &mut RngHandle) -> usize {
    let m = logp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logp.iter().map(|&l| (l - m).exp()).collect();
    sample_categorical(&w, rng)
}

pub fn normal_ln_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -LN_SQRT_2PI - sd.ln() - 0.5 * z * z
}

pub fn inv_gamma_ln_pdf(x: f64, shape: f64, scale: f64) -> f64 {
    shape * scale.ln() - ln_gamma(shape) - (shape + 1.0) * x.ln() - scale / x
}

pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Inverse logit, evaluated on the side that cannot overflow.
pub fn expit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// `log(1 + exp(x))` without overflow.
pub fn log1p_exp(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|&x| (x - m).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::RngCore;

    fn moments(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, v)
    }

    #[test]
    fn same_stream_replays() {
        let mut a = RngHandle::new(7, 3);
        let mut b = RngHandle::new(7, 3);
        let xa: Vec<u64> = (0..100).map(|_| a.next_u64()).collect();
        let xb: Vec<u64> = (0..100).map(|_| b.next_u64()).collect();
        assert_eq!(xa, xb);
        let mut c = RngHandle::new(7, 4);
        let xc: Vec<u64> = (0..100).map(|_| c.next_u64()).collect();
        assert_ne!(xa, xc);
    }

    #[test]
    fn distinct_streams_are_uncorrelated() {
        let mut a = RngHandle::new(11, 0);
        let mut b = RngHandle::new(11, 1);
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| a.std_normal()).collect();
        let ys: Vec<f64> = (0..n).map(|_| b.std_normal()).collect();
        let r = xs.iter().zip(&ys).map(|(x, y)| x * y).sum::<f64>() / n as f64;
        assert!(r.abs() < 4.0 / (n as f64).sqrt(), "correlation {r}");
    }

    #[test]
    fn dirichlet_single_component() {
        let mut rng = RngHandle::new(1, 0);
        let w = sample_dirichlet(&[1.0], &mut rng).unwrap();
        assert_eq!(w.as_slice(), &[1.0]);
    }

    #[test]
    fn dirichlet_rejects_bad_alpha() {
        let mut rng = RngHandle::new(1, 0);
        assert!(sample_dirichlet(&[], &mut rng).is_err());
        assert!(sample_dirichlet(&[1.0, 0.0], &mut rng).is_err());
        assert!(sample_dirichlet(&[1.0, -2.0], &mut rng).is_err());
    }

    #[test]
    fn dirichlet_moments_n3() {
        let mut rng = RngHandle::new(42, 0);
        let n = 3;
        let draws = 100_000;
        let mut cols = vec![Vec::with_capacity(draws); n];
        for _ in 0..draws {
            let w = sample_dirichlet(&vec![1.0; n], &mut rng).unwrap();
            assert!(w.as_slice().iter().all(|&x| x > 0.0));
            assert!((w.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for (c, &x) in cols.iter_mut().zip(w.as_slice()) {
                c.push(x);
            }
        }
        let target_var = (n as f64 - 1.0) / ((n * n) as f64 * (n as f64 + 1.0));
        assert_abs_diff_eq!(target_var, 1.0 / 18.0, epsilon = 1e-15);
        for c in &cols {
            let (m, v) = moments(c);
            let se_m = (v / draws as f64).sqrt();
            assert!((m - 1.0 / 3.0).abs() < 3.0 * se_m, "mean {m}");
            let m4 = c.iter().map(|x| (x - m).powi(4)).sum::<f64>() / draws as f64;
            let se_v = ((m4 - v * v) / draws as f64).sqrt();
            assert!((v - target_var).abs() < 3.0 * se_v, "var {v}");
        }
    }

    #[test]
    fn degenerate_normal_and_bernoulli() {
        let mut rng = RngHandle::new(3, 0);
        let d = Distribution::Normal { mean: 0.0, sd: 0.0 };
        assert_eq!(d.sample(&mut rng).unwrap(), 0.0);
        let b = Distribution::Bernoulli { p: 1.0 };
        for _ in 0..100 {
            assert_eq!(b.sample(&mut rng).unwrap(), 1.0);
        }
    }

    #[test]
    fn rejects_out_of_domain() {
        let mut rng = RngHandle::new(3, 0);
        assert!(Distribution::Normal { mean: 0.0, sd: -1.0 }.sample(&mut rng).is_err());
        assert!(Distribution::Gamma { shape: 1.0, rate: 0.0 }.sample(&mut rng).is_err());
        assert!(Distribution::Bernoulli { p: 1.5 }.log_density(1.0).is_err());
    }

    #[test]
    fn gamma_rate_mean() {
        let mut rng = RngHandle::new(5, 0);
        let d = Distribution::Gamma { shape: 1.0, rate: 3.0 };
        let xs: Vec<f64> = (0..100_000).map(|_| d.sample(&mut rng).unwrap()).collect();
        let (m, v) = moments(&xs);
        assert!((m - 1.0 / 3.0).abs() < 3.0 * (v / xs.len() as f64).sqrt());
    }

    #[test]
    fn moment_checks_all_families() {
        let dists = vec![
            Distribution::Normal { mean: 1.5, sd: 2.0 },
            Distribution::Gamma { shape: 2.5, rate: 0.5 },
            Distribution::InverseGamma { shape: 6.0, scale: 3.0 },
            Distribution::Bernoulli { p: 0.3 },
            Distribution::Poisson { lambda: 4.0 },
            Distribution::HalfNormal { scale: 1.5 },
            Distribution::Beta { a: 2.0, b: 5.0 },
            Distribution::Categorical { p: vec![0.2, 0.5, 0.3] },
        ];
        let n = 100_000;
        for (i, d) in dists.iter().enumerate() {
            let mut rng = RngHandle::new(99, i as u64);
            let xs: Vec<f64> = (0..n).map(|_| d.sample(&mut rng).unwrap()).collect();
            let (m, v) = moments(&xs);
            let mu = d.mean().unwrap();
            let var = d.variance().unwrap();
            assert!((m - mu).abs() < 4.0 * (var / n as f64).sqrt(), "{d}: mean {m} vs {mu}");
            let m4 = xs.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n as f64;
            let se_v = ((m4 - v * v) / n as f64).sqrt();
            assert!((v - var).abs() < 4.0 * se_v, "{d}: var {v} vs {var}");
        }
    }

    #[test]
    fn half_cauchy_median_is_scale() {
        let mut rng = RngHandle::new(8, 0);
        let d = Distribution::HalfCauchy { scale: 2.0 };
        let n = 100_000;
        let below = (0..n).filter(|_| d.sample(&mut rng).unwrap() < 2.0).count() as f64 / n as f64;
        assert!((below - 0.5).abs() < 4.0 * (0.25 / n as f64).sqrt());
    }

    #[test]
    fn log_density_reference_values() {
        let n = Distribution::Normal { mean: 0.0, sd: 1.0 };
        assert_abs_diff_eq!(n.log_density(0.0).unwrap(), -0.918_938_5, epsilon = 1e-7);
        let b = Distribution::Bernoulli { p: 0.5 };
        assert_eq!(b.log_density(1.0).unwrap(), 0.5f64.ln());
        let p = Distribution::Poisson { lambda: 2.0 };
        assert_eq!(p.log_density(-1.0).unwrap(), f64::NEG_INFINITY);
        assert_abs_diff_eq!(p.log_density(3.0).unwrap(), (8.0f64 / 6.0 * (-2.0f64).exp()).ln(), epsilon = 1e-12);
    }

    fn trapezoid(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
        let h = (hi - lo) / n as f64;
        let mut s = 0.5 * (f(lo) + f(hi));
        for i in 1..n {
            s += f(lo + i as f64 * h);
        }
        s * h
    }

    #[test]
    fn continuous_densities_integrate_to_one() {
        let dists = vec![
            Distribution::Normal { mean: -1.0, sd: 0.7 },
            Distribution::Gamma { shape: 3.0, rate: 2.0 },
            Distribution::InverseGamma { shape: 5.0, scale: 4.0 },
            Distribution::HalfNormal { scale: 2.0 },
            Distribution::Beta { a: 2.0, b: 3.0 },
        ];
        for d in dists {
            let m = d.mean().unwrap();
            let sd = d.variance().unwrap().sqrt();
            let lo = (m - 10.0 * sd).max(match d {
                Distribution::Normal { .. } => f64::NEG_INFINITY,
                _ => 0.0,
            });
            let hi = match d {
                Distribution::Beta { .. } => 1.0,
                _ => m + 10.0 * sd,
            };
            let total = trapezoid(|x| d.log_density(x).unwrap().exp(), lo, hi, 200_000);
            assert!((total - 1.0).abs() < 1e-3, "{d}: {total}");
        }
        let hc = Distribution::HalfCauchy { scale: 1.0 };
        let total = trapezoid(|x| hc.log_density(x).unwrap().exp(), 0.0, 1e4, 2_000_000);
        assert!((total - (1.0 - 2.0 / PI * (1e-4f64).atan())).abs() < 1e-3);
    }

    #[test]
    fn phi_reference_values() {
        assert_eq!(std_normal_cdf(0.0), 0.5);
        assert_abs_diff_eq!(std_normal_cdf(1.959964), 0.975, epsilon = 1e-6);
        let table = [
            (-3.0, 0.001_349_898_031_630_094_6),
            (-1.0, 0.158_655_253_931_457_05),
            (0.5, 0.691_462_461_274_013_1),
            (2.5, 0.993_790_334_674_223_8),
        ];
        for (x, p) in table {
            assert_abs_diff_eq!(std_normal_cdf(x), p, epsilon = 1e-10);
        }
    }

    #[test]
    fn expit_values() {
        assert_eq!(expit(0.0), 0.5);
        assert_abs_diff_eq!(expit(1.0), 0.731_058_6, epsilon = 1e-7);
        assert!(expit(700.0).is_finite() && expit(-700.0) > 0.0);
        assert_eq!(expit(-745.0).is_nan(), false);
    }

    #[test]
    fn parse_round_trip() {
        for s in ["normal:0,0.577", "gamma:1,3", "pointmass:0", "halfcauchy:2"] {
            let d: Distribution = s.parse().unwrap();
            assert_eq!(d.to_string(), s);
        }
        assert!("normal:0".parse::<Distribution>().is_err());
        assert!("wobble:1".parse::<Distribution>().is_err());
        assert!("gamma:-1,1".parse::<Distribution>().is_err());
    }

    proptest! {
        #[test]
        fn phi_symmetry(x in -8.0f64..8.0) {
            prop_assert!((std_normal_cdf(-x) - (1.0 - std_normal_cdf(x))).abs() < 1e-15);
        }

        #[test]
        fn phi_monotone(x in -8.0f64..8.0, d in 1e-6f64..1.0) {
            prop_assert!(std_normal_cdf(x + d) >= std_normal_cdf(x));
        }

        #[test]
        fn expit_symmetry(x in -700.0f64..700.0) {
            prop_assert!((expit(-x) - (1.0 - expit(x))).abs() < 1e-15);
        }

        #[test]
        fn dirichlet_on_simplex(n in 1usize..60, seed in any::<u64>()) {
            let mut rng = RngHandle::new(seed, 0);
            let w = sample_dirichlet(&vec![1.0; n], &mut rng).unwrap();
            prop_assert_eq!(w.len(), n);
            prop_assert!(w.as_slice().iter().all(|&x| x > 0.0));
            prop_assert!((w.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn log_sum_exp_matches_direct(xs in proptest::collection::vec(-30.0f64..30.0, 1..20)) {
            let direct = xs.iter().map(|x| x.exp()).sum::<f64>().ln();
            prop_assert!((log_sum_exp(&xs) - direct).abs() < 1e-10);
        }
    }
}
