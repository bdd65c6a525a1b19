use std::io::{Read, Write};

use nalgebra::DMatrix;

use super::{shape_err, NetError, Result};
use crate::io::fmt_f64;

/// Inputs (`n × p`) with targets (`n × k`).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub inputs: DMatrix<f64>,
    pub targets: DMatrix<f64>,
    pub classification: bool,
}

impl Dataset {
    pub fn new(inputs: DMatrix<f64>, targets: DMatrix<f64>, classification: bool) -> Result<Self> {
        if inputs.nrows() != targets.nrows() {
            return Err(shape_err("dataset rows", inputs.nrows(), targets.nrows()));
        }
        if inputs.iter().chain(targets.iter()).any(|v| !v.is_finite()) {
            return Err(NetError::Data("non-finite entries".into()));
        }
        if classification {
            for (i, row) in targets.row_iter().enumerate() {
                let ok = row.iter().all(|&v| v == 0.0 || v == 1.0) && row.sum() == 1.0;
                if !ok {
                    return Err(NetError::Data(format!("row {i} is not one-hot")));
                }
            }
        }
        Ok(Self { inputs, targets, classification })
    }

    /// Classification data from integer labels.
    pub fn from_labels(inputs: DMatrix<f64>, labels: &[usize], k: usize) -> Result<Self> {
        if labels.iter().any(|&l| l >= k) {
            return Err(NetError::Data(format!("label outside 0..{k}")));
        }
        Self::new(inputs, one_hot(labels, k), true)
    }

    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn class_count(&self) -> usize {
        self.targets.ncols()
    }

    /// Argmax of each target row (lowest index wins ties).
    pub fn labels(&self) -> Vec<usize> {
        argmax_rows(&self.targets)
    }

    pub fn select(&self, idx: &[usize]) -> Self {
        Self {
            inputs: self.inputs.select_rows(idx),
            targets: self.targets.select_rows(idx),
            classification: self.classification,
        }
    }

    /// Targets flattened example-major into a length `n·k` vector.
    pub fn flat_targets(&self) -> nalgebra::DVector<f64> {
        flatten_rows(&self.targets)
    }

    pub fn with_labels(&self, labels: &[usize]) -> Result<Self> {
        Self::from_labels(self.inputs.clone(), labels, self.class_count())
    }

    /// Write as CSV with header `x0..x{p-1},y0..y{k-1}`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let p = self.input_dim();
        let k = self.class_count();
        let header: Vec<String> = (0..p).map(|i| format!("x{i}")).chain((0..k).map(|j| format!("y{j}"))).collect();
        writeln!(w, "{}", header.join(","))?;
        for i in 0..self.len() {
            let row: Vec<String> = self
                .inputs
                .row(i)
                .iter()
                .chain(self.targets.row(i).iter())
                .map(|v| fmt_f64(*v))
                .collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R, classification: bool) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
        let headers = rdr.headers()?.clone();
        let mut xcols = Vec::new();
        let mut ycols = Vec::new();
        for (c, h) in headers.iter().enumerate() {
            let h = h.trim();
            if let Some(i) = h.strip_prefix('x').and_then(|s| s.parse::<usize>().ok()) {
                xcols.push((i, c));
            } else if let Some(j) = h.strip_prefix('y').and_then(|s| s.parse::<usize>().ok()) {
                ycols.push((j, c));
            } else {
                return Err(NetError::Data(format!("unexpected column '{h}'")));
            }
        }
        xcols.sort();
        ycols.sort();
        if xcols.iter().enumerate().any(|(e, (i, _))| e != *i) || ycols.iter().enumerate().any(|(e, (j, _))| e != *j) {
            return Err(NetError::Data("columns must be x0..x{p-1}, y0..y{k-1}".into()));
        }
        let (p, k) = (xcols.len(), ycols.len());
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            for &(_, c) in &xcols {
                xs.push(parse_field(&rec, c)?);
            }
            for &(_, c) in &ycols {
                ys.push(parse_field(&rec, c)?);
            }
        }
        let n = if p > 0 { xs.len() / p } else if k > 0 { ys.len() / k } else { 0 };
        Self::new(DMatrix::from_row_slice(n, p, &xs), DMatrix::from_row_slice(n, k, &ys), classification)
    }
}

fn parse_field(rec: &csv::StringRecord, c: usize) -> Result<f64> {
    let s = rec.get(c).unwrap_or("").trim();
    s.parse::<f64>().map_err(|_| NetError::Data(format!("cannot parse '{s}' as a number")))
}

pub fn one_hot(labels: &[usize], k: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(labels.len(), k);
    for (i, &l) in labels.iter().enumerate() {
        m[(i, l)] = 1.0;
    }
    m
}

pub fn argmax_rows(m: &DMatrix<f64>) -> Vec<usize> {
    m.row_iter()
        .map(|row| {
            let mut best = 0;
            for (j, v) in row.iter().enumerate() {
                if *v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

pub fn flatten_rows(m: &DMatrix<f64>) -> nalgebra::DVector<f64> {
    nalgebra::DVector::from_iterator(m.len(), m.row_iter().flat_map(|r| r.iter().copied().collect::<Vec<_>>()))
}

pub fn unflatten_rows(v: &nalgebra::DVector<f64>, k: usize) -> DMatrix<f64> {
    DMatrix::from_row_slice(v.len() / k, k, v.as_slice())
}
