//! Small dense linear-algebra helpers shared by the factor updates.

use crate::{Mat, Vector};

/// Product-style access to one slice `X_k` (`I_k x J`).
///
/// Implemented for sparse slices and for dense matrices; the dense form is
/// used for compressed slices `Q_k^T X_k` and by test oracles.
pub trait SliceOps: Sync {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    /// `X V` for `V: J x R`.
    fn mul_right(&self, v: &Mat) -> Mat;
    /// `U^T X` for `U: I x R`, giving `R x J`.
    fn tr_mul_left(&self, u: &Mat) -> Mat;
    /// Diagonal of `U^T X V`, i.e. `(V ⊙ U)^T vec(X)`.
    fn diag_sandwich(&self, u: &Mat, v: &Mat) -> Vector;
    /// `||X||_F^2`.
    fn sq_norm(&self) -> f64;
    /// `||X - U diag(s) V^T||_F^2`, computed from the dense reconstruction.
    fn residual_sq(&self, u: &Mat, s: &[f64], v: &Mat) -> f64;
}

impl SliceOps for Mat {
    fn nrows(&self) -> usize {
        self.nrows()
    }

    fn ncols(&self) -> usize {
        self.ncols()
    }

    fn mul_right(&self, v: &Mat) -> Mat {
        self * v
    }

    fn tr_mul_left(&self, u: &Mat) -> Mat {
        u.tr_mul(self)
    }

    fn diag_sandwich(&self, u: &Mat, v: &Mat) -> Vector {
        let xv = self * v;
        Vector::from_iterator(u.ncols(), (0..u.ncols()).map(|r| u.column(r).dot(&xv.column(r))))
    }

    fn sq_norm(&self) -> f64 {
        self.norm_squared()
    }

    fn residual_sq(&self, u: &Mat, s: &[f64], v: &Mat) -> f64 {
        let recon = reconstruct(u, s, v);
        (self - recon).norm_squared()
    }
}

/// `U diag(s) V^T`.
pub fn reconstruct(u: &Mat, s: &[f64], v: &Mat) -> Mat {
    let mut us = u.clone();
    for (r, &sr) in s.iter().enumerate() {
        us.column_mut(r).scale_mut(sr);
    }
    us * v.transpose()
}

pub fn hadamard(a: &Mat, b: &Mat) -> Mat {
    a.component_mul(b)
}

/// Largest entry of `|Q^T Q - I|`.
pub fn orthonormality_error(q: &Mat) -> f64 {
    let g = q.tr_mul(q);
    let mut worst = 0.0f64;
    for j in 0..g.ncols() {
        for i in 0..g.nrows() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - target).abs());
        }
    }
    worst
}

/// Thin QR orthonormalization with the sign convention `diag(R) >= 0`.
///
/// Expects `m` to have at least as many rows as columns.
pub fn orthonormalize(m: &Mat) -> Mat {
    let qr = m.clone().qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..q.ncols() {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Orthonormal polar factor of a tall matrix `M = B Σ C^T`, returned as
/// `B C^T`. This is the maximizer of `trace(Q^T M)` over matrices with
/// orthonormal columns.
///
/// When `M` is rank deficient the left singular vectors belonging to
/// (numerically) zero singular values are replaced by a deterministic
/// orthonormal completion built from standard basis vectors, and the second
/// tuple element is `true`.
pub fn polar_factor(m: &Mat) -> (Mat, bool) {
    let (rows, cols) = m.shape();
    debug_assert!(rows >= cols, "polar factor needs a tall matrix");
    let svd = m.clone().svd(true, true);
    let mut b = svd.u.expect("left singular vectors requested");
    let ct = svd.v_t.expect("right singular vectors requested");
    let sigma = &svd.singular_values;
    let smax = sigma.iter().cloned().fold(0.0, f64::max);
    let thresh = smax * rows.max(cols) as f64 * f64::EPSILON;

    let deficient: Vec<usize> = (0..cols).filter(|&j| !(sigma[j] > thresh)).collect();
    if deficient.is_empty() {
        return (b * ct, false);
    }

    let mut kept: Vec<Vector> = (0..cols)
        .filter(|j| !deficient.contains(j))
        .map(|j| b.column(j).into_owned())
        .collect();
    for &j in &deficient {
        let dir = complete_direction(rows, &kept);
        b.column_mut(j).copy_from(&dir);
        kept.push(dir);
    }
    (b * ct, true)
}

/// Unit vector orthogonal to `basis`, taken as the standard basis vector with
/// the largest residual after projection (first index on ties).
fn complete_direction(rows: usize, basis: &[Vector]) -> Vector {
    let mut best: Option<(f64, Vector)> = None;
    for i in 0..rows {
        let mut e = Vector::zeros(rows);
        e[i] = 1.0;
        // two Gram-Schmidt passes
        for _ in 0..2 {
            for q in basis {
                let c = q.dot(&e);
                e.axpy(-c, q, 1.0);
            }
        }
        let n = e.norm();
        if best.as_ref().is_none_or(|(bn, _)| n > *bn) {
            best = Some((n, e));
        }
    }
    let (n, e) = best.expect("rows > 0");
    e / n
}

/// Elementwise `max(0, x)`.
pub fn clamp_nonneg(m: &Mat) -> Mat {
    m.map(|x| if x > 0.0 { x } else { 0.0 })
}

pub fn min_entry(m: &Mat) -> f64 {
    m.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Cosine similarity between every column of `x` and every column of `y`.
/// Returns `None` if either matrix has a zero column.
pub fn column_cosines(x: &Mat, y: &Mat) -> Option<Mat> {
    let xn: Vec<f64> = x.column_iter().map(|c| c.norm()).collect();
    let yn: Vec<f64> = y.column_iter().map(|c| c.norm()).collect();
    if xn.iter().chain(yn.iter()).any(|&n| !(n > 0.0)) {
        return None;
    }
    let mut c = x.tr_mul(y);
    for j in 0..c.ncols() {
        for i in 0..c.nrows() {
            c[(i, j)] /= xn[i] * yn[j];
        }
    }
    Some(c)
}
