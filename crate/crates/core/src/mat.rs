//! Row-major `f64` matrix with the handful of products the trainers need.
//!
//! The networks here are small (widest layer 512), so plain loops over
//! contiguous rows beat any BLAS dispatch overhead and keep results
//! bit-reproducible across platforms.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

/// Matrices serialize as nested row-major arrays; `serde_json` emits the
/// shortest float representation that parses back bit-exactly.
impl Serialize for Mat {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_seq(self.iter_rows())
    }
}

impl<'de> Deserialize<'de> for Mat {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let rows: Vec<Vec<f64>> = Vec::deserialize(deserializer)?;
        Mat::from_rows(&rows).map_err(D::Error::custom)
    }
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "expected {} values for a {}x{} matrix, got {}",
                rows * cols,
                rows,
                cols,
                data.len()
            )));
        }
        Ok(Mat { rows, cols, data })
    }

    /// Builds a matrix from row slices; all rows must share a length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let ncols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(rows.len() * ncols);
        for r in rows {
            if r.len() != ncols {
                return Err(Error::Shape("ragged rows".into()));
            }
            data.extend_from_slice(r);
        }
        Ok(Mat {
            rows: rows.len(),
            cols: ncols,
            data,
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols.max(1))
    }

    /// Copies the given rows into a new matrix.
    pub fn select_rows(&self, idx: &[usize]) -> Mat {
        let mut out = Mat::zeros(idx.len(), self.cols);
        for (k, &i) in idx.iter().enumerate() {
            out.row_mut(k).copy_from_slice(self.row(i));
        }
        out
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `self (n×in) · otherᵀ (out×in) + bias → n×out`.
    ///
    /// `other` rows and `self` rows are both contiguous, so the inner dot
    /// product streams two cache lines.
    pub fn affine_nt(&self, other: &Mat, bias: &[f64]) -> Mat {
        assert_eq!(self.cols, other.cols, "inner dims differ");
        assert_eq!(other.rows, bias.len(), "bias length differs");
        let mut out = Mat::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            let x = self.row(i);
            let o = out.row_mut(i);
            for (j, oj) in o.iter_mut().enumerate() {
                let w = other.row(j);
                let mut s = 0.0;
                for (a, b) in x.iter().zip(w) {
                    s += a * b;
                }
                *oj = s + bias[j];
            }
        }
        out
    }

    /// `self (n×out) · other (out×in) → n×in` (used to push gradients back).
    pub fn matmul_nn(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows, "inner dims differ");
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let d = self.row(i);
            let o = out.row_mut(i);
            for (k, &dk) in d.iter().enumerate() {
                if dk == 0.0 {
                    continue;
                }
                let w = other.row(k);
                for (oj, wj) in o.iter_mut().zip(w) {
                    *oj += dk * wj;
                }
            }
        }
        out
    }

    /// Accumulates `selfᵀ (n×out)ᵀ · other (n×in)` into `acc (out×in)`.
    pub fn accumulate_tn(&self, other: &Mat, acc: &mut Mat) {
        assert_eq!(self.rows, other.rows, "row counts differ");
        assert_eq!(acc.rows, self.cols, "acc rows differ");
        assert_eq!(acc.cols, other.cols, "acc cols differ");
        for i in 0..self.rows {
            let d = self.row(i);
            let x = other.row(i);
            for (k, &dk) in d.iter().enumerate() {
                if dk == 0.0 {
                    continue;
                }
                let a = acc.row_mut(k);
                for (aj, xj) in a.iter_mut().zip(x) {
                    *aj += dk * xj;
                }
            }
        }
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn set_column(&mut self, j: usize, values: &[f64]) {
        assert_eq!(values.len(), self.rows);
        for (i, &v) in values.iter().enumerate() {
            self.set(i, j, v);
        }
    }
}

/// Solves `A x = b` for symmetric positive-definite `A` via Cholesky.
///
/// Used by the ridge sweeps in chained imputation and by the synthetic
/// generator's correlation factorization. Fails on non-PD input.
pub fn cholesky_solve(a: &Mat, b: &[f64]) -> Result<Vec<f64>> {
    let l = cholesky_factor(a)?;
    let n = b.len();
    // forward solve L y = b
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for j in 0..i {
            s -= l.get(i, j) * y[j];
        }
        y[i] = s / l.get(i, i);
    }
    // back solve Lᵀ x = y
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for j in (i + 1)..n {
            s -= l.get(j, i) * x[j];
        }
        x[i] = s / l.get(i, i);
    }
    Ok(x)
}

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
pub fn cholesky_factor(a: &Mat) -> Result<Mat> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::Shape("cholesky needs a square matrix".into()));
    }
    let mut l = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            if i == j {
                if s <= 0.0 {
                    return Err(Error::Numerical(format!(
                        "matrix not positive definite at pivot {i} (value {s})"
                    )));
                }
                l.set(i, j, s.sqrt());
            } else {
                l.set(i, j, s / l.get(j, j));
            }
        }
    }
    Ok(l)
}
