//! Shared data model: datasets, standardized designs, estimates and ground truth.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Response vector plus raw design matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    y: Array1<f64>,
    x: Array2<f64>,
    feature_names: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(x: Array2<f64>, y: Array1<f64>) -> Result<Self> {
        Self::with_names(x, y, None)
    }

    pub fn with_names(
        x: Array2<f64>,
        y: Array1<f64>,
        feature_names: Option<Vec<String>>,
    ) -> Result<Self> {
        let (n, p) = x.dim();
        if y.len() != n {
            return Err(Error::LengthMismatch { expected: n, got: y.len() });
        }
        if n < 2 {
            return Err(Error::Shape(format!("need at least 2 observations, got {n}")));
        }
        if p < 1 {
            return Err(Error::Shape("design has no columns".into()));
        }
        if let Some(names) = &feature_names {
            if names.len() != p {
                return Err(Error::LengthMismatch { expected: p, got: names.len() });
            }
        }
        for (row, v) in y.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite { row, col: usize::MAX });
            }
        }
        for ((row, col), v) in x.indexed_iter() {
            if !v.is_finite() {
                return Err(Error::NonFinite { row, col });
            }
        }
        Ok(Self { y, x, feature_names })
    }

    pub fn y(&self) -> ArrayView1<'_, f64> {
        self.y.view()
    }

    pub fn x(&self) -> ArrayView2<'_, f64> {
        self.x.view()
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    /// Reads the CSV layout: header row, a column named `y` holds the
    /// response and every other column is a predictor in header order.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let y_col = headers
            .iter()
            .position(|h| h == "y")
            .ok_or_else(|| Error::Shape("CSV has no column named `y`".into()))?;
        let names: Vec<String> = headers
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != y_col)
            .map(|(_, h)| h.to_string())
            .collect();
        let p = names.len();
        let mut y = Vec::new();
        let mut x = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() != headers.len() {
                return Err(Error::Shape(format!(
                    "row {row} has {} fields, header has {}",
                    rec.len(),
                    headers.len()
                )));
            }
            for (i, field) in rec.iter().enumerate() {
                let v: f64 = field
                    .trim()
                    .parse()
                    .map_err(|_| Error::NonFinite { row, col: i })?;
                if !v.is_finite() {
                    return Err(Error::NonFinite { row, col: i });
                }
                if i == y_col {
                    y.push(v);
                } else {
                    x.push(v);
                }
            }
        }
        let n = y.len();
        let x = Array2::from_shape_vec((n, p), x).map_err(|e| Error::Shape(e.to_string()))?;
        Self::with_names(x, Array1::from(y), Some(names))
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }

    /// Writes the response first, then predictors. Values use Rust's
    /// shortest round-trip float formatting.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["y".to_string()];
        match &self.feature_names {
            Some(names) => header.extend(names.iter().cloned()),
            None => header.extend((1..=self.p()).map(|j| format!("x{j}"))),
        }
        w.write_record(&header)?;
        for (i, row) in self.x.axis_iter(Axis(0)).enumerate() {
            let mut rec = Vec::with_capacity(self.p() + 1);
            rec.push(self.y[i].to_string());
            rec.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

/// Denominator used for the column standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SdDenominator {
    #[default]
    NMinusOne,
    N,
}

/// Column-centred, unit-sd design together with the statistics needed to undo it.
#[derive(Debug, Clone)]
pub struct StandardizedDesign {
    pub z: Array2<f64>,
    pub col_means: Array1<f64>,
    /// Strictly positive; constant columns record 1.
    pub col_scales: Array1<f64>,
    pub y_centered: Array1<f64>,
    pub y_mean: f64,
    /// Indices of zero-variance columns, which are stored as all zeros.
    pub constant_cols: Vec<usize>,
}

impl StandardizedDesign {
    pub fn n(&self) -> usize {
        self.z.nrows()
    }

    pub fn p(&self) -> usize {
        self.z.ncols()
    }

    /// Restricts to the listed columns, keeping the response.
    pub fn subset(&self, cols: &[usize]) -> StandardizedDesign {
        StandardizedDesign {
            z: self.z.select(Axis(1), cols),
            col_means: self.col_means.select(Axis(0), cols),
            col_scales: self.col_scales.select(Axis(0), cols),
            y_centered: self.y_centered.clone(),
            y_mean: self.y_mean,
            constant_cols: cols
                .iter()
                .enumerate()
                .filter(|(_, c)| self.constant_cols.contains(c))
                .map(|(i, _)| i)
                .collect(),
        }
    }

    /// Same columns, different (already centred) response.
    pub fn with_response(&self, y: Array1<f64>) -> StandardizedDesign {
        StandardizedDesign {
            z: self.z.clone(),
            col_means: self.col_means.clone(),
            col_scales: self.col_scales.clone(),
            y_mean: 0.0,
            y_centered: y,
            constant_cols: self.constant_cols.clone(),
        }
    }

    /// Applies the stored centring and scaling to new raw rows.
    pub fn transform(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.p() {
            return Err(Error::LengthMismatch { expected: self.p(), got: x.ncols() });
        }
        let mut out = x.to_owned();
        for (j, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
            if self.constant_cols.contains(&j) {
                col.fill(0.0);
            } else {
                col.mapv_inplace(|v| (v - self.col_means[j]) / self.col_scales[j]);
            }
        }
        Ok(out)
    }

    /// Rebuilds the raw design `Z diag(scales) + 1 meansᵀ`.
    pub fn reconstruct(&self) -> Array2<f64> {
        let mut out = self.z.clone();
        for (j, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
            let (m, s) = (self.col_means[j], self.col_scales[j]);
            col.mapv_inplace(|v| v * s + m);
        }
        out
    }
}

pub fn standardize(d: &Dataset) -> StandardizedDesign {
    standardize_with(d, SdDenominator::NMinusOne)
}

pub fn standardize_with(d: &Dataset, denom: SdDenominator) -> StandardizedDesign {
    let n = d.n();
    let nf = n as f64;
    let div = match denom {
        SdDenominator::NMinusOne => nf - 1.0,
        SdDenominator::N => nf,
    };
    let mut z = d.x.to_owned();
    let p = z.ncols();
    let mut col_means = Array1::zeros(p);
    let mut col_scales = Array1::ones(p);
    let mut constant_cols = Vec::new();
    for (j, mut col) in z.axis_iter_mut(Axis(1)).enumerate() {
        let mean = col.sum() / nf;
        col.mapv_inplace(|v| v - mean);
        let ss: f64 = col.iter().map(|v| v * v).sum();
        let sd = (ss / div).sqrt();
        col_means[j] = mean;
        // Relative check so columns like (5, 5, 5) with rounding residue count as constant.
        if sd <= 1e-12 * mean.abs().max(1.0) {
            col.fill(0.0);
            constant_cols.push(j);
        } else {
            col.mapv_inplace(|v| v / sd);
            col_scales[j] = sd;
        }
    }
    let y_mean = d.y.sum() / nf;
    let y_centered = d.y.mapv(|v| v - y_mean);
    StandardizedDesign { z, col_means, col_scales, y_centered, y_mean, constant_cols }
}

/// Least-squares coefficients of `y` on the columns of `z_sub` (no intercept).
pub fn ols_fit(z_sub: ArrayView2<f64>, y: ArrayView1<f64>) -> Result<Array1<f64>> {
    linalg::lstsq_qr(z_sub, y)
}

/// Sparse coefficient vector with its support and fit diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEstimate {
    pub beta: Vec<f64>,
    /// Sorted indices with nonzero coefficient.
    pub support: Vec<usize>,
    pub objective: f64,
    pub iterations: usize,
    /// False when an iteration cap was hit before the tolerance was met.
    pub converged: bool,
}

impl ModelEstimate {
    pub fn from_beta(beta: Array1<f64>, objective: f64, iterations: usize, converged: bool) -> Self {
        let support = beta
            .iter()
            .enumerate()
            .filter(|(_, b)| b.abs() > 0.0)
            .map(|(j, _)| j)
            .collect();
        Self { beta: beta.to_vec(), support, objective, iterations, converged }
    }

    pub fn beta(&self) -> ArrayView1<'_, f64> {
        ArrayView1::from(&self.beta[..])
    }

    pub fn len(&self) -> usize {
        self.beta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beta.is_empty()
    }

    /// Lifts a fit on columns `cols` of a `p`-column design to all `p` coordinates.
    pub fn embed(&self, cols: &[usize], p: usize) -> ModelEstimate {
        let mut beta = Array1::zeros(p);
        for (k, &j) in cols.iter().enumerate() {
            beta[j] = self.beta[k];
        }
        ModelEstimate::from_beta(beta, self.objective, self.iterations, self.converged)
    }

    /// Converts standardized-scale coefficients to raw predictor units.
    pub fn to_raw_scale(&self, col_scales: ArrayView1<f64>) -> Result<ModelEstimate> {
        if col_scales.len() != self.beta.len() {
            return Err(Error::LengthMismatch { expected: self.beta.len(), got: col_scales.len() });
        }
        let beta = Array1::from_iter(self.beta.iter().zip(col_scales).map(|(b, s)| b / s));
        Ok(ModelEstimate::from_beta(beta, self.objective, self.iterations, self.converged))
    }
}

/// Coefficients and noise level that generated a synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub beta_true: Vec<f64>,
    /// Sorted indices of the nonzero coefficients.
    pub true_model: Vec<usize>,
    pub s: usize,
    pub sigma: f64,
}

impl GroundTruth {
    pub fn new(beta_true: Vec<f64>, sigma: f64) -> Self {
        let true_model: Vec<usize> = beta_true
            .iter()
            .enumerate()
            .filter(|(_, b)| **b != 0.0)
            .map(|(j, _)| j)
            .collect();
        let s = true_model.len();
        Self { beta_true, true_model, s, sigma }
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["index", "beta_true"])?;
        for (j, b) in self.beta_true.iter().enumerate() {
            w.write_record([j.to_string(), b.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R, sigma: f64) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let mut beta = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let idx: usize = rec[0].parse().map_err(|_| Error::Shape("bad index".into()))?;
            let b: f64 = rec[1].parse().map_err(|_| Error::Shape("bad coefficient".into()))?;
            if idx != beta.len() {
                return Err(Error::Shape(format!("truth rows out of order at {idx}")));
            }
            beta.push(b);
        }
        Ok(Self::new(beta, sigma))
    }
}

/// Euclidean distance between the estimate and the true coefficients.
pub fn l2_error(est: &ModelEstimate, gt: &GroundTruth) -> Result<f64> {
    if est.beta.len() != gt.beta_true.len() {
        return Err(Error::LengthMismatch { expected: gt.beta_true.len(), got: est.beta.len() });
    }
    Ok(est
        .beta
        .iter()
        .zip(&gt.beta_true)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt())
}

/// `floor(c * n / ln n)`, the screening size convention.
pub fn n_over_log_n(n: usize, c: f64) -> usize {
    let nf = n as f64;
    (c * nf / nf.ln()).floor() as usize
}
