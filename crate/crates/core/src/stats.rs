//! Samples and the quadratic-form statistics built from their averages.

use std::path::Path;

use ndarray::{Array2, ArrayView1, ArrayView2};

use crate::error::{dim_err, Error, Result};
use crate::linalg::SymMatrix;

/// `n x d` array of observations, one row per `Z_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    values: Array2<f64>,
}

impl Sample {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        let (n, d) = values.dim();
        if n == 0 || d == 0 {
            return Err(Error::InvalidInput(format!(
                "sample must have n >= 1 and d >= 1, got {n}x{d}"
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite entry at row {}, column {}",
                pos / d,
                pos % d
            )));
        }
        // rows are accessed as contiguous slices throughout
        let values = if values.is_standard_layout() {
            values
        } else {
            values.as_standard_layout().to_owned()
        };
        Ok(Self { values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != d) {
            return Err(dim_err(format!("{d} columns"), format!("{} in row {i}", r.len())));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let values = Array2::from_shape_vec((n, d), flat)
            .map_err(|e| Error::InvalidInput(e.to_string()))?;
        Self::new(values)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        crate::io::read_matrix_csv(path).and_then(Self::new)
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn d(&self) -> usize {
        self.values.ncols()
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.d();
        &self.as_slice()[i * d..(i + 1) * d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.as_slice().chunks_exact(self.d())
    }

    pub(crate) fn as_slice(&self) -> &[f64] {
        self.values
            .as_slice()
            .expect("sample is stored in standard layout")
    }

    pub fn column(&self, j: usize) -> ArrayView1<'_, f64> {
        self.values.column(j)
    }

    /// Multiplies every entry by `c`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(&self.values * c)
    }
}

/// `n * ||mean(Z)||^2`.
pub fn quadratic_form_stat(sample: &Sample) -> f64 {
    let (n, d) = (sample.n(), sample.d());
    let mut sum = vec![0.0; d];
    for row in sample.rows() {
        for (s, z) in sum.iter_mut().zip(row) {
            *s += z;
        }
    }
    sum.iter().map(|s| s * s).sum::<f64>() / n as f64
}

/// `n * ||n^{-1} sum_i w_i Z_i||^2`.
pub fn weighted_quadratic_form_stat(sample: &Sample, w: &[f64]) -> Result<f64> {
    if w.len() != sample.n() {
        return Err(dim_err(sample.n(), w.len()));
    }
    Ok(weighted_qf_unchecked(sample, w))
}

pub(crate) fn weighted_qf_unchecked(sample: &Sample, w: &[f64]) -> f64 {
    let d = sample.d();
    let mut sum = vec![0.0; d];
    for (row, &wi) in sample.rows().zip(w) {
        for (s, z) in sum.iter_mut().zip(row) {
            *s += wi * z;
        }
    }
    sum.iter().map(|s| s * s).sum::<f64>() / sample.n() as f64
}

/// Uncentered second moment `n^{-1} sum_i Z_i Z_i'`.
pub fn sample_second_moment(sample: &Sample) -> SymMatrix {
    let d = sample.d();
    let mut acc = Array2::<f64>::zeros((d, d));
    for row in sample.rows() {
        for j in 0..d {
            let zj = row[j];
            for l in j..d {
                acc[[j, l]] += zj * row[l];
            }
        }
    }
    let n = sample.n() as f64;
    for j in 0..d {
        for l in j..d {
            let v = acc[[j, l]] / n;
            acc[[j, l]] = v;
            acc[[l, j]] = v;
        }
    }
    SymMatrix::from_symmetric_unchecked(acc)
}

/// Entrywise max-abs difference between the sample second moment and `target`.
pub fn max_cov_discrepancy(sample: &Sample, target: &SymMatrix) -> Result<f64> {
    if target.dim() != sample.d() {
        return Err(dim_err(sample.d(), target.dim()));
    }
    let m = sample_second_moment(sample);
    Ok(m.view()
        .iter()
        .zip(target.view().iter())
        .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs())))
}
