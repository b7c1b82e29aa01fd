//! Nonparametric outcome regressions and the shared standardization step
//! that turns their predictions into average treatment effect draws.
//!
//! All three models use the covariate row `x = (A, L_1, .., L_p)`. The test
//! set for standardization stacks every subject twice: first with `A = 1`,
//! then with `A = 0`.

pub mod bart;
pub mod dp;
pub mod gp;

use std::io::Write;
use std::path::Path;

use crate::data::{fmt_num, ObservedDataset};
use crate::effects::{standardize_predictions, EstimandDraws, EstimandKind};
use crate::error::{invalid, Error, Result};

pub use bart::{bart_fit_predict, BartConfig};
pub use dp::{dp_fit, dp_regression, dp_weights, AlphaPrior, CovariateKind, DpConfig, DpFit, DpState};
pub use gp::{gp_fit_predict, gp_kernel, kernel_matrix, GpConfig, GpFit, GpHyper};

/// Training covariate rows `(A, L..)`.
pub fn covariate_rows(data: &ObservedDataset) -> Vec<Vec<f64>> {
    (0..data.n())
        .map(|i| {
            let mut r = vec![data.a[i]];
            r.extend(data.confounders.iter().map(|c| c.values[i]));
            r
        })
        .collect()
}

/// The `2n` stacked rows: every subject with `A = 1`, then with `A = 0`.
pub fn stacked_test_rows(data: &ObservedDataset) -> Vec<Vec<f64>> {
    let base = covariate_rows(data);
    let mut out = Vec::with_capacity(2 * base.len());
    for a in [1.0, 0.0] {
        out.extend(base.iter().map(|r| {
            let mut r = r.clone();
            r[0] = a;
            r
        }));
    }
    out
}

/// Per-draw regression function values at a fixed set of test rows.
#[derive(Clone, Debug, PartialEq)]
pub struct Predictions {
    pub chain: Vec<usize>,
    pub iter: Vec<usize>,
    pub values: Vec<Vec<f64>>,
}

impl Predictions {
    pub fn n_draws(&self) -> usize {
        self.values.len()
    }

    /// `M x (2n)` CSV with columns `chain, iter, mu_0 .. mu_{2n-1}`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let width = self.values.first().map_or(0, Vec::len);
        let mut header = vec!["chain".to_string(), "iter".to_string()];
        header.extend((0..width).map(|j| format!("mu_{j}")));
        w.write_record(&header)?;
        for (m, row) in self.values.iter().enumerate() {
            let mut rec = vec![self.chain[m].to_string(), self.iter[m].to_string()];
            rec.extend(row.iter().map(|&v| fmt_num(v)));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_csv_path(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn read_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let (header, rows) = crate::data::read_table(std::fs::File::open(path)?)?;
        if header.len() < 3 || header[0] != "chain" || header[1] != "iter" {
            return Err(Error::Schema("predictions need columns chain, iter, mu_0..".into()));
        }
        Ok(Self {
            chain: rows.iter().map(|r| r[0] as usize).collect(),
            iter: rows.iter().map(|r| r[1] as usize).collect(),
            values: rows.into_iter().map(|r| r[2..].to_vec()).collect(),
        })
    }
}

/// ATE draws from stacked predictions, with fresh bootstrap weights per
/// draw: `Psi(m) = sum_i p_i (mu(1, L_i) - mu(0, L_i))`.
pub fn bnp_ate(pred: &Predictions, seed: u64) -> Result<EstimandDraws> {
    let mut mu1 = Vec::with_capacity(pred.n_draws());
    let mut mu0 = Vec::with_capacity(pred.n_draws());
    for row in &pred.values {
        if row.is_empty() || row.len() % 2 != 0 {
            return Err(Error::Shape(format!("stacked predictions need an even, positive width, got {}", row.len())));
        }
        let n = row.len() / 2;
        mu1.push(row[..n].to_vec());
        mu0.push(row[n..].to_vec());
    }
    if mu1.is_empty() {
        return Err(invalid("no prediction draws"));
    }
    let v = standardize_predictions("ATE", &mu1, &mu0, EstimandKind::Difference, seed)?;
    EstimandDraws::new("ATE", EstimandKind::Difference, v, pred.chain.clone(), pred.iter.clone())
}
