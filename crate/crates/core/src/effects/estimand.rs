use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::fmt_num;
use crate::error::{invalid, Error, Result};
use crate::mcmc::DrawsMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimandKind {
    Difference,
    Ratio,
    OddsRatio,
}

impl EstimandKind {
    pub fn is_multiplicative(self) -> bool {
        !matches!(self, EstimandKind::Difference)
    }
}

impl std::str::FromStr for EstimandKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "difference" | "diff" => Ok(Self::Difference),
            "ratio" => Ok(Self::Ratio),
            "odds-ratio" | "or" => Ok(Self::OddsRatio),
            _ => Err(invalid(format!("unknown estimand kind `{s}`"))),
        }
    }
}

/// Posterior draws of one causal estimand, paired with the (chain, iter) of
/// the parameter draw each value came from.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimandDraws {
    pub name: String,
    pub kind: EstimandKind,
    values: Vec<f64>,
    chain: Vec<usize>,
    iter: Vec<usize>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub sd: f64,
    pub q025: f64,
    pub q50: f64,
    pub q975: f64,
}

/// Linear-interpolation quantile of already sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        let mut s = values.to_vec();
        s.sort_by(f64::total_cmp);
        Some(Self {
            mean,
            sd,
            q025: quantile_sorted(&s, 0.025),
            q50: quantile_sorted(&s, 0.5),
            q975: quantile_sorted(&s, 0.975),
        })
    }

    pub fn covers(&self, x: f64) -> bool {
        self.q025 <= x && x <= self.q975
    }
}

impl EstimandDraws {
    pub fn new(name: impl Into<String>, kind: EstimandKind, values: Vec<f64>, chain: Vec<usize>, iter: Vec<usize>) -> Result<Self> {
        let name = name.into();
        if chain.len() != values.len() || iter.len() != values.len() {
            return Err(Error::Shape("estimand labels do not match the draw count".into()));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("{name}: non-finite draw {bad}")));
        }
        if kind.is_multiplicative() && values.iter().any(|&v| v <= 0.0) {
            return Err(Error::Domain(format!("{name}: ratio draws must be positive")));
        }
        Ok(Self { name, kind, values, chain, iter, warnings: Vec::new() })
    }

    /// Values labelled with the (chain, iter) rows of `draws`.
    pub fn aligned(name: impl Into<String>, kind: EstimandKind, values: Vec<f64>, draws: &DrawsMatrix) -> Result<Self> {
        Self::new(name, kind, values, draws.chain_ids().to_vec(), draws.iterations().to_vec())
    }

    pub fn from_column(draws: &DrawsMatrix, column: &str, kind: EstimandKind) -> Result<Self> {
        let v = draws.column(column).ok_or_else(|| Error::MissingColumn(column.to_string()))?;
        Self::aligned(column, kind, v, draws)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn chain_ids(&self) -> &[usize] {
        &self.chain
    }

    pub fn iterations(&self) -> &[usize] {
        &self.iter
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn summary(&self) -> Option<Summary> {
        Summary::of(&self.values)
    }

    /// Same labels, new values.
    pub fn with_values(&self, name: impl Into<String>, kind: EstimandKind, values: Vec<f64>) -> Result<Self> {
        let mut out = Self::new(name, kind, values, self.chain.clone(), self.iter.clone())?;
        out.warnings = self.warnings.clone();
        Ok(out)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["chain", "iter", "value"])?;
        for i in 0..self.values.len() {
            w.write_record([self.chain[i].to_string(), self.iter[i].to_string(), fmt_num(self.values[i])])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_csv_path(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    /// Reads the `chain, iter, value` layout written by [`Self::write_csv`].
    pub fn read_csv<R: std::io::Read>(reader: R, name: impl Into<String>, kind: EstimandKind) -> Result<Self> {
        let (header, rows) = crate::data::read_table(reader)?;
        if header != ["chain", "iter", "value"] {
            return Err(Error::Schema(format!("estimand draws need columns chain,iter,value, got {}", header.join(","))));
        }
        Self::new(
            name,
            kind,
            rows.iter().map(|r| r[2]).collect(),
            rows.iter().map(|r| r[0] as usize).collect(),
            rows.iter().map(|r| r[1] as usize).collect(),
        )
    }

    pub fn read_csv_path(path: impl AsRef<Path>, name: impl Into<String>, kind: EstimandKind) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?, name, kind)
    }
}
