//! Evaluation metrics: RMSE, cross-product invariance (CPI), factor-matching
//! similarity and stability-driven dissimilarity.

use crate::data::{FactorSet, IrregularTensor, StaticMatrix};
use crate::linalg::column_cosines;
use crate::solver::fit_terms;
use crate::{Error, Mat, Result};

/// RMSE over all temporal cells and static entries,
///
/// ```text
/// sqrt( (Σ_k ‖X_k − U_k S_k Vᵀ‖² + λ/2 ‖A − W Fᵀ‖²) / (Σ_k I_k J + K P) )
/// ```
///
/// The static residual carries the `λ/2` weight, so the value depends on λ.
pub fn rmse(tensor: &IrregularTensor, static_matrix: &StaticMatrix, factors: &FactorSet, lambda: f64) -> Result<f64> {
    factors.check_against(tensor, static_matrix)?;
    let t = fit_terms(tensor, static_matrix, factors);
    Ok(t.rmse(lambda, tensor.n_cells(), static_matrix.values().len()))
}

/// Plain RMSE with the static residual weighted like the temporal one.
pub fn rmse_unweighted(tensor: &IrregularTensor, static_matrix: &StaticMatrix, factors: &FactorSet) -> Result<f64> {
    factors.check_against(tensor, static_matrix)?;
    let t = fit_terms(tensor, static_matrix, factors);
    Ok(t.rmse_unweighted(tensor.n_cells(), static_matrix.values().len()))
}

/// `1 − Σ_k ‖U_kᵀU_k − HᵀH‖² / Σ_k ‖HᵀH‖²`, in `(−∞, 1]`.
pub fn cpi(factors: &FactorSet) -> Result<f64> {
    let grams: Vec<Mat> = factors.u.iter().map(|u| u.tr_mul(u)).collect();
    cpi_from_grams(&grams, &factors.h)
}

/// [`cpi`] from precomputed `U_kᵀU_k`.
pub fn cpi_from_grams(u_grams: &[Mat], h: &Mat) -> Result<f64> {
    if u_grams.is_empty() {
        return Err(Error::Invalid("CPI needs at least one slice".into()));
    }
    let hth = h.tr_mul(h);
    let denom = u_grams.len() as f64 * hth.norm_squared();
    if !(denom > 0.0) {
        return Err(Error::Invalid("CPI is undefined for H = 0".into()));
    }
    let num: f64 = u_grams.iter().map(|g| (g - &hth).norm_squared()).sum();
    Ok(1.0 - num / denom)
}

fn cosines(x: &Mat, y: &Mat) -> Result<Mat> {
    if x.shape() != y.shape() {
        return Err(Error::Dimension(format!("{:?} vs {:?}", x.shape(), y.shape())));
    }
    column_cosines(x, y).ok_or_else(|| Error::Invalid("factor matrix has a zero column".into()))
}

/// Mean over columns of `x` of the best cosine match among columns of `y`.
pub fn factor_similarity(x: &Mat, y: &Mat) -> Result<f64> {
    let c = cosines(x, y)?;
    let r = c.nrows();
    let total: f64 = (0..r).map(|i| c.row(i).max()).sum();
    Ok(total / r as f64)
}

/// `(2R − Σ_i max_j C_ij − Σ_j max_i C_ij) / 2R` for the column cosine
/// matrix `C` of two factor matrices from different runs.
pub fn stability_dissimilarity(v: &Mat, v_other: &Mat) -> Result<f64> {
    let c = cosines(v, v_other)?;
    let r = c.nrows() as f64;
    let rows: f64 = (0..c.nrows()).map(|i| c.row(i).max()).sum();
    let cols: f64 = (0..c.ncols()).map(|j| c.column(j).max()).sum();
    Ok((2.0 * r - rows - cols) / (2.0 * r))
}
