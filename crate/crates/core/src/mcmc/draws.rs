use std::io::{Read, Write};
use std::path::Path;

use serde::Serialize;

use crate::data::{fmt_num, read_table};
use crate::error::{Error, Result};

/// Sampler bookkeeping for one chain.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ChainStats {
    /// Post-burn-in acceptance rate per block.
    pub acceptance: Vec<f64>,
    /// Proposal scale of every block at each post-burn-in iteration.
    #[serde(skip)]
    pub frozen_scales: Vec<Vec<f64>>,
}

/// Retained draws, one row per draw, tagged with chain and iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct DrawsMatrix {
    names: Vec<String>,
    values: Vec<f64>,
    chain: Vec<usize>,
    iter: Vec<usize>,
    pub warnings: Vec<String>,
    pub stats: Vec<ChainStats>,
}

impl DrawsMatrix {
    pub fn from_rows(names: Vec<String>, rows: Vec<Vec<f64>>, chain: Vec<usize>, iter: Vec<usize>) -> Result<Self> {
        if rows.len() != chain.len() || rows.len() != iter.len() {
            return Err(Error::Shape("row, chain and iteration counts differ".into()));
        }
        let d = names.len();
        let mut values = Vec::with_capacity(rows.len() * d);
        for (i, r) in rows.into_iter().enumerate() {
            if r.len() != d {
                return Err(Error::Shape(format!("row {i} has {} values for {d} names", r.len())));
            }
            if let Some(j) = r.iter().position(|x| !x.is_finite()) {
                return Err(Error::Domain(format!("non-finite value in column {} of row {i}", names[j])));
            }
            values.extend(r);
        }
        Ok(Self { names, values, chain, iter, warnings: Vec::new(), stats: Vec::new() })
    }

    /// Single-chain matrix with iterations numbered from 0.
    pub fn from_columns(columns: Vec<(String, Vec<f64>)>) -> Result<Self> {
        let m = columns.first().map_or(0, |c| c.1.len());
        let names = columns.iter().map(|c| c.0.clone()).collect();
        let rows = (0..m).map(|i| columns.iter().map(|c| c.1[i]).collect()).collect();
        Self::from_rows(names, rows, vec![0; m], (0..m).collect())
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn n_rows(&self) -> usize {
        self.chain.len()
    }

    pub fn n_cols(&self) -> usize {
        self.names.len()
    }

    pub fn chain_ids(&self) -> &[usize] {
        &self.chain
    }

    pub fn iterations(&self) -> &[usize] {
        &self.iter
    }

    pub fn n_chains(&self) -> usize {
        let mut ids: Vec<usize> = self.chain.clone();
        ids.sort_unstable();
        ids.dedup();
        ids.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.n_cols();
        &self.values[i * d..(i + 1) * d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        let d = self.n_cols().max(1);
        self.values.chunks(d).take(self.n_rows())
    }

    pub fn col_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn require(&self, name: &str) -> Result<usize> {
        self.col_index(name).ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        self.col_index(name).map(|j| self.column_at(j))
    }

    pub fn column_at(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    /// Column split by chain, chains in ascending id order.
    pub fn column_by_chain(&self, name: &str) -> Option<Vec<Vec<f64>>> {
        let j = self.col_index(name)?;
        let mut ids: Vec<usize> = self.chain.clone();
        ids.sort_unstable();
        ids.dedup();
        Some(
            ids.iter()
                .map(|&c| self.rows().zip(&self.chain).filter(|(_, &ch)| ch == c).map(|(r, _)| r[j]).collect())
                .collect(),
        )
    }

    /// Appends the columns of `other`, which must carry the same row tags.
    pub fn hstack(mut self, other: &DrawsMatrix) -> Result<Self> {
        if self.chain != other.chain || self.iter != other.iter {
            return Err(Error::Shape("cannot join draws with different chain/iteration tags".into()));
        }
        let (d1, d2) = (self.n_cols(), other.n_cols());
        let mut values = Vec::with_capacity(self.n_rows() * (d1 + d2));
        for i in 0..self.n_rows() {
            values.extend_from_slice(&self.values[i * d1..(i + 1) * d1]);
            values.extend_from_slice(other.row(i));
        }
        self.values = values;
        self.names.extend(other.names.iter().cloned());
        self.warnings.extend(other.warnings.iter().cloned());
        Ok(self)
    }

    /// Keeps only the rows of the given chains.
    pub fn filter_chains(&self, keep: impl Fn(usize) -> bool) -> Self {
        let d = self.n_cols();
        let mut out = Self { values: Vec::new(), chain: Vec::new(), iter: Vec::new(), ..self.clone() };
        for i in 0..self.n_rows() {
            if keep(self.chain[i]) {
                out.values.extend_from_slice(&self.values[i * d..(i + 1) * d]);
                out.chain.push(self.chain[i]);
                out.iter.push(self.iter[i]);
            }
        }
        out
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["chain".to_string(), "iter".to_string()];
        header.extend(self.names.iter().cloned());
        w.write_record(&header)?;
        for (i, r) in self.rows().enumerate() {
            let mut rec = vec![self.chain[i].to_string(), self.iter[i].to_string()];
            rec.extend(r.iter().map(|&x| fmt_num(x)));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_csv_path(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::io::BufWriter::new(std::fs::File::create(path)?))
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let (header, rows) = read_table(reader)?;
        if header.len() < 2 || header[0] != "chain" || header[1] != "iter" {
            return Err(Error::Schema("draws CSV must start with columns chain,iter".into()));
        }
        let chain = rows.iter().map(|r| r[0] as usize).collect();
        let iter = rows.iter().map(|r| r[1] as usize).collect();
        let values = rows.into_iter().map(|r| r[2..].to_vec()).collect();
        Self::from_rows(header[2..].to_vec(), values, chain, iter)
    }

    pub fn read_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}
