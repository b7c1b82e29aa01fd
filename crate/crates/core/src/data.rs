//! Point-treatment and longitudinal datasets with their CSV schemas.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Rows of outcome `y`, treatment `a` and named confounder columns, plus an
/// optional stratum label `v` (1-based).
#[derive(Clone, Debug, PartialEq)]
pub struct ObservedDataset {
    pub y: Vec<f64>,
    pub a: Vec<f64>,
    pub confounders: Vec<Column>,
    pub v: Option<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Column {
    pub name: String,
    pub values: Vec<f64>,
}

impl Column {
    pub fn new(name: impl Into<String>, values: Vec<f64>) -> Self {
        Self { name: name.into(), values }
    }
}

impl ObservedDataset {
    pub fn new(y: Vec<f64>, a: Vec<f64>, confounders: Vec<Column>) -> Result<Self> {
        let ds = Self { y, a, confounders, v: None };
        ds.check()?;
        Ok(ds)
    }

    pub fn with_strata(mut self, v: Vec<usize>) -> Result<Self> {
        self.v = Some(v);
        self.check()?;
        Ok(self)
    }

    fn check(&self) -> Result<()> {
        let n = self.y.len();
        if self.a.len() != n {
            return Err(Error::Shape(format!("A has {} rows, Y has {n}", self.a.len())));
        }
        for c in &self.confounders {
            if c.values.len() != n {
                return Err(Error::Shape(format!("{} has {} rows, Y has {n}", c.name, c.values.len())));
            }
        }
        if let Some(v) = &self.v {
            if v.len() != n {
                return Err(Error::Shape(format!("V has {} rows, Y has {n}", v.len())));
            }
            if v.iter().any(|&s| s == 0) {
                return Err(Error::Schema("stratum labels in V start at 1".into()));
            }
        }
        let finite = self.y.iter().chain(&self.a).chain(self.confounders.iter().flat_map(|c| &c.values));
        if finite.into_iter().any(|x| !x.is_finite()) {
            return Err(Error::Schema("non-finite value in dataset".into()));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.confounders.len()
    }

    pub fn confounder(&self, name: &str) -> Option<&Column> {
        self.confounders.iter().find(|c| c.name == name)
    }

    /// Confounder values of subject `i`.
    pub fn row(&self, i: usize) -> Vec<f64> {
        self.confounders.iter().map(|c| c.values[i]).collect()
    }

    /// Keeps only the named confounders, in the given order.
    pub fn select_confounders(&self, names: &[&str]) -> Result<Self> {
        let confounders = names
            .iter()
            .map(|n| self.confounder(n).cloned().ok_or_else(|| Error::MissingColumn(n.to_string())))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { confounders, ..self.clone() })
    }

    pub fn num_strata(&self) -> usize {
        self.v.as_ref().and_then(|v| v.iter().max().copied()).unwrap_or(0)
    }

    pub fn read_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }

    /// Header must contain `Y` and `A`; `V` is the optional stratum label and
    /// every other column is a confounder.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let (header, rows) = read_table(reader)?;
        let find = |name: &str| header.iter().position(|h| h == name);
        let yi = find("Y").ok_or_else(|| Error::MissingColumn("Y".into()))?;
        let ai = find("A").ok_or_else(|| Error::MissingColumn("A".into()))?;
        let vi = find("V");
        let col = |j: usize| rows.iter().map(|r| r[j]).collect::<Vec<f64>>();
        let confounders = header
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != yi && *j != ai && Some(*j) != vi)
            .map(|(j, h)| Column::new(h.clone(), col(j)))
            .collect();
        let mut ds = Self { y: col(yi), a: col(ai), confounders, v: None };
        if let Some(vi) = vi {
            let v = col(vi)
                .into_iter()
                .map(|x| {
                    if x >= 1.0 && x.fract() == 0.0 {
                        Ok(x as usize)
                    } else {
                        Err(Error::Schema(format!("stratum label {x} is not a positive integer")))
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            ds.v = Some(v);
        }
        ds.check()?;
        Ok(ds)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["Y".to_string(), "A".to_string()];
        header.extend(self.confounders.iter().map(|c| c.name.clone()));
        if self.v.is_some() {
            header.push("V".into());
        }
        w.write_record(&header)?;
        for i in 0..self.n() {
            let mut rec = vec![fmt_num(self.y[i]), fmt_num(self.a[i])];
            rec.extend(self.confounders.iter().map(|c| fmt_num(c.values[i])));
            if let Some(v) = &self.v {
                rec.push(v[i].to_string());
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Longitudinal data: `a[t][i]`, `l[t][i]` for t = 0..=T, and final outcome.
#[derive(Clone, Debug, PartialEq)]
pub struct LongitudinalDataset {
    pub y: Vec<f64>,
    pub a: Vec<Vec<f64>>,
    pub l: Vec<Vec<f64>>,
}

impl LongitudinalDataset {
    pub fn new(y: Vec<f64>, a: Vec<Vec<f64>>, l: Vec<Vec<f64>>) -> Result<Self> {
        let n = y.len();
        if a.len() != l.len() || a.is_empty() {
            return Err(Error::Shape(format!("{} treatment and {} confounder time points", a.len(), l.len())));
        }
        if a.iter().chain(&l).any(|c| c.len() != n) {
            return Err(Error::Shape("every time-point column must have one value per subject".into()));
        }
        if a.iter().flatten().any(|&x| x != 0.0 && x != 1.0) {
            return Err(Error::Schema("treatments must be 0 or 1".into()));
        }
        Ok(Self { y, a, l })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn time_points(&self) -> usize {
        self.l.len()
    }

    pub fn read_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }

    /// Columns `Y, A_0..A_T, L_0..L_T`.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let (header, rows) = read_table(reader)?;
        let find = |name: &str| header.iter().position(|h| h == name);
        let yi = find("Y").ok_or_else(|| Error::MissingColumn("Y".into()))?;
        let tp = header.iter().filter(|h| h.starts_with("L_")).count();
        if tp == 0 {
            return Err(Error::MissingColumn("L_0".into()));
        }
        let col = |j: usize| rows.iter().map(|r| r[j]).collect::<Vec<f64>>();
        let mut a = Vec::with_capacity(tp);
        let mut l = Vec::with_capacity(tp);
        for t in 0..tp {
            let an = format!("A_{t}");
            let ln = format!("L_{t}");
            a.push(col(find(&an).ok_or(Error::MissingColumn(an))?));
            l.push(col(find(&ln).ok_or(Error::MissingColumn(ln))?));
        }
        Self::new(col(yi), a, l)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let tp = self.time_points();
        let mut header = vec!["Y".to_string()];
        header.extend((0..tp).map(|t| format!("A_{t}")));
        header.extend((0..tp).map(|t| format!("L_{t}")));
        w.write_record(&header)?;
        for i in 0..self.n() {
            let mut rec = vec![fmt_num(self.y[i])];
            rec.extend(self.a.iter().map(|c| fmt_num(c[i])));
            rec.extend(self.l.iter().map(|c| fmt_num(c[i])));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Shortest representation that parses back to the same `f64`.
pub fn fmt_num(x: f64) -> String {
    format!("{x}")
}

pub(crate) fn read_table<R: Read>(reader: R) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header.is_empty() || header.iter().all(|h| h.is_empty()) {
        return Err(Error::Schema("missing header row".into()));
    }
    let mut rows = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .zip(&header)
            .map(|(s, h)| {
                s.parse::<f64>()
                    .map_err(|_| Error::Schema(format!("row {}: column {h}: `{s}` is not a number", line + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}
