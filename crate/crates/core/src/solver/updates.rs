//! Per-block factor updates. Each one solves its block's subproblem exactly
//! with every other block held fixed.
//!
//! NNLS blocks are assembled in normal-equation form from Gram identities:
//!
//! * `U_k`: gram `S VᵀV S + μI`, cross `S Vᵀ X_kᵀ + μ Hᵀ Q_kᵀ`
//! * `V`: gram `Σ S_k U_kᵀU_k S_k`, cross `Σ S_k U_kᵀ X_k`
//! * `W(k,:)`: gram `(VᵀV) ∘ (U_kᵀU_k) + λ FᵀF`, cross
//!   `diag(U_kᵀ X_k V) + λ Fᵀ a_k`, so `V ⊙ U_k` is never materialized
//! * `F`: gram `WᵀW`, cross `WᵀA`

use crate::linalg::{hadamard, polar_factor, SliceOps};
use crate::nnls::{nnls_solve, NnlsError, NnlsNormalForm};
use crate::{par, Mat, Vector};

/// Result of an NNLS-backed update plus whether a ridge had to be added.
pub(crate) struct Solved<T> {
    pub value: T,
    pub ridged: bool,
}

pub(crate) fn solve(gram: Mat, cross: Mat) -> Result<Solved<Mat>, NnlsError> {
    let mut p = NnlsNormalForm::new(gram, cross)?;
    let ridged = p.ensure_positive_definite();
    let tol = p.default_kkt_tol();
    Ok(Solved { value: nnls_solve(&p, tol)?, ridged })
}

fn scale_rows(m: &mut Mat, s: &[f64]) {
    for (r, &sr) in s.iter().enumerate() {
        m.row_mut(r).scale_mut(sr);
    }
}

fn outer(s: &[f64]) -> Mat {
    Mat::from_fn(s.len(), s.len(), |i, j| s[i] * s[j])
}

/// Procrustes update: the orthonormal `Q_k` maximizing `trace(Qᵀ U_k Hᵀ)`.
/// The second element flags a rank-deficient `U_k Hᵀ`.
pub fn update_q(u: &Mat, h: &Mat) -> (Mat, bool) {
    polar_factor(&(u * h.transpose()))
}

/// `H = Σ μ_k Q_kᵀ U_k / Σ μ_k`; `None` when every weight is zero.
pub fn update_h(q: &[Mat], u: &[Mat], mu: &[f64]) -> Option<Mat> {
    let total: f64 = mu.iter().sum();
    if !(total > 0.0) || q.is_empty() {
        return None;
    }
    let r = q[0].ncols();
    let parts = par::map_range(q.len(), |k| q[k].tr_mul(&u[k]) * mu[k]);
    Some(par::ordered_sum(&parts, r, r) / total)
}

/// NNLS update of `U_k` (`I_k x R`).
pub fn update_u<X: SliceOps>(x: &X, v: &Mat, s: &[f64], q: &Mat, h: &Mat, mu: f64) -> Result<Mat, NnlsError> {
    update_u_with_gram(x, v, &v.tr_mul(v), s, q, h, mu).map(|r| r.value)
}

pub(crate) fn update_u_with_gram<X: SliceOps>(
    x: &X,
    v: &Mat,
    vtv: &Mat,
    s: &[f64],
    q: &Mat,
    h: &Mat,
    mu: f64,
) -> Result<Solved<Mat>, NnlsError> {
    let r = v.ncols();
    let mut gram = hadamard(vtv, &outer(s));
    for i in 0..r {
        gram[(i, i)] += mu;
    }
    // S Vᵀ X_kᵀ = (X_k V S)ᵀ
    let mut cross = x.mul_right(v).transpose();
    scale_rows(&mut cross, s);
    if mu > 0.0 {
        cross += (q * h).transpose() * mu;
    }
    let solved = solve(gram, cross)?;
    Ok(Solved { value: solved.value.transpose(), ridged: solved.ridged })
}

/// NNLS update of `V` (`J x R`) over all slices. `w` row `k` is `diag(S_k)`.
pub fn update_v<X: SliceOps>(slices: &[&X], u: &[Mat], w: &Mat) -> Result<Mat, NnlsError> {
    let grams: Vec<Mat> = u.iter().map(|m| m.tr_mul(m)).collect();
    update_v_with_grams(slices, u, &grams, w).map(|r| r.value)
}

pub(crate) fn update_v_with_grams<X: SliceOps>(
    slices: &[&X],
    u: &[Mat],
    u_grams: &[Mat],
    w: &Mat,
) -> Result<Solved<Mat>, NnlsError> {
    let r = w.ncols();
    let j = slices.first().map_or(0, |x| x.ncols());
    let parts = par::map_range(slices.len(), |k| {
        let s: Vec<f64> = w.row(k).iter().cloned().collect();
        let gram = hadamard(&u_grams[k], &outer(&s));
        let mut cross = slices[k].tr_mul_left(&u[k]);
        scale_rows(&mut cross, &s);
        (gram, cross)
    });
    let (grams, crosses): (Vec<Mat>, Vec<Mat>) = parts.into_iter().unzip();
    let solved = solve(par::ordered_sum(&grams, r, r), par::ordered_sum(&crosses, r, j))?;
    Ok(Solved { value: solved.value.transpose(), ridged: solved.ridged })
}

/// NNLS update of one row of `W` (`diag(S_k)`).
pub fn update_w_row<X: SliceOps>(
    x: &X,
    u: &Mat,
    v: &Mat,
    f: &Mat,
    a_k: &Vector,
    lambda: f64,
) -> Result<Vector, NnlsError> {
    update_w_row_with_grams(x, u, &u.tr_mul(u), v, &v.tr_mul(v), f, &f.tr_mul(f), a_k, lambda).map(|r| r.value)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn update_w_row_with_grams<X: SliceOps>(
    x: &X,
    u: &Mat,
    utu: &Mat,
    v: &Mat,
    vtv: &Mat,
    f: &Mat,
    ftf: &Mat,
    a_k: &Vector,
    lambda: f64,
) -> Result<Solved<Vector>, NnlsError> {
    let mut gram = hadamard(vtv, utu);
    let mut cross = x.diag_sandwich(u, v);
    if lambda > 0.0 {
        gram += ftf * lambda;
        cross += f.tr_mul(a_k) * lambda;
    }
    let r = gram.nrows();
    let solved = solve(gram, Mat::from_column_slice(r, 1, cross.as_slice()))?;
    Ok(Solved { value: solved.value.column(0).into_owned(), ridged: solved.ridged })
}

/// NNLS update of `F` (`P x R`) from `min ‖W Fᵀ − A‖`.
pub fn update_f(w: &Mat, a: &Mat) -> Result<Mat, NnlsError> {
    update_f_solved(w, a).map(|r| r.value)
}

pub(crate) fn update_f_solved(w: &Mat, a: &Mat) -> Result<Solved<Mat>, NnlsError> {
    let solved = solve(w.tr_mul(w), w.tr_mul(a))?;
    Ok(Solved { value: solved.value.transpose(), ridged: solved.ridged })
}
