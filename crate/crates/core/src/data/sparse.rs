use crate::linalg::SliceOps;
use crate::{Error, Mat, Result, Vector};

/// Nonnegative sparse matrix in compressed-row form.
///
/// Missing coordinates are zeros. Explicitly stored zeros are kept so a file
/// round-trips entry for entry.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSlice {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSlice {
    /// Builds a slice from `(row, col, value)` triples in any order.
    ///
    /// Rejects out-of-range coordinates, duplicate coordinates and values
    /// that are negative or non-finite.
    pub fn from_triplets(n_rows: usize, n_cols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Result<Self> {
        for &(i, j, v) in &triplets {
            if i >= n_rows || j >= n_cols {
                return Err(Error::Invalid(format!(
                    "coordinate (row {i}, column {j}) outside {n_rows}x{n_cols}"
                )));
            }
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Invalid(format!(
                    "value {v} at row {i}, column {j} must be finite and nonnegative"
                )));
            }
        }
        triplets.sort_by_key(|&(i, j, _)| (i, j));
        for w in triplets.windows(2) {
            if (w[0].0, w[0].1) == (w[1].0, w[1].1) {
                return Err(Error::Invalid(format!("duplicate coordinate (row {}, column {})", w[0].0, w[0].1)));
            }
        }
        let mut row_ptr = vec![0usize; n_rows + 1];
        for &(i, _, _) in &triplets {
            row_ptr[i + 1] += 1;
        }
        for i in 0..n_rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        let col_idx = triplets.iter().map(|t| t.1).collect();
        let values = triplets.iter().map(|t| t.2).collect();
        Ok(Self { n_rows, n_cols, row_ptr, col_idx, values })
    }

    /// Keeps the strictly positive entries of `m`.
    pub fn from_dense(m: &Mat) -> Result<Self> {
        let mut triplets = Vec::new();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let v = m[(i, j)];
                if v != 0.0 {
                    triplets.push((i, j, v));
                }
            }
        }
        Self::from_triplets(m.nrows(), m.ncols(), triplets)
    }

    pub fn nrows(&self) -> usize {
        self.n_rows
    }

    pub fn ncols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.col_idx[a..b], &self.values[a..b])
    }

    /// Stored entries in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_rows).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&j, &v)| (i, j, v))
        })
    }

    pub fn to_dense(&self) -> Mat {
        let mut m = Mat::zeros(self.n_rows, self.n_cols);
        for (i, j, v) in self.triplets() {
            m[(i, j)] = v;
        }
        m
    }

    pub fn sq_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }
}

impl SliceOps for SparseSlice {
    fn nrows(&self) -> usize {
        self.n_rows
    }

    fn ncols(&self) -> usize {
        self.n_cols
    }

    fn mul_right(&self, v: &Mat) -> Mat {
        let r = v.ncols();
        let mut out = Mat::zeros(self.n_rows, r);
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for c in 0..r {
                let vc = v.column(c);
                let mut acc = 0.0;
                for (&j, &x) in cols.iter().zip(vals) {
                    acc += x * vc[j];
                }
                out[(i, c)] = acc;
            }
        }
        out
    }

    fn tr_mul_left(&self, u: &Mat) -> Mat {
        let r = u.ncols();
        let mut out = Mat::zeros(r, self.n_cols);
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for (&j, &x) in cols.iter().zip(vals) {
                for c in 0..r {
                    out[(c, j)] += x * u[(i, c)];
                }
            }
        }
        out
    }

    fn diag_sandwich(&self, u: &Mat, v: &Mat) -> Vector {
        let r = u.ncols();
        let mut out = Vector::zeros(r);
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for c in 0..r {
                let uic = u[(i, c)];
                if uic == 0.0 {
                    continue;
                }
                let mut acc = 0.0;
                for (&j, &x) in cols.iter().zip(vals) {
                    acc += x * v[(j, c)];
                }
                out[c] += uic * acc;
            }
        }
        out
    }

    fn sq_norm(&self) -> f64 {
        SparseSlice::sq_norm(self)
    }

    fn residual_sq(&self, u: &Mat, s: &[f64], v: &Mat) -> f64 {
        let r = u.ncols();
        let mut z = vec![0.0; r];
        let mut recon = vec![0.0; self.n_cols];
        let mut total = 0.0;
        for i in 0..self.n_rows {
            for c in 0..r {
                z[c] = u[(i, c)] * s[c];
            }
            for (j, out) in recon.iter_mut().enumerate() {
                let mut acc = 0.0;
                for c in 0..r {
                    acc += z[c] * v[(j, c)];
                }
                *out = acc;
            }
            let (cols, vals) = self.row(i);
            for (&j, &x) in cols.iter().zip(vals) {
                recon[j] -= x;
            }
            total += recon.iter().map(|d| d * d).sum::<f64>();
        }
        total
    }
}
