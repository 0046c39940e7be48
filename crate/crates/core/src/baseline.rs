//! COPA+ comparison variant.
//!
//! Same coupled model and sweep loop, but `U_k` is never fitted: it is set
//! to `max(0, Q_k H)` every sweep. `Q_k` solves the classic PARAFAC2
//! Procrustes problem on `X_k V S_k Hᵀ`, and `H`, `V`, `W` come from one
//! pass of block updates on the compressed slices `Y_k = Q_kᵀ X_k`
//! (`H`, `V` and `W` all through the shared NNLS kernel).
//! `F` is updated as in the main solver.

use crate::data::{FactorSet, Hyperparams, IrregularTensor, SparseSlice, StaticMatrix};
use crate::linalg::{clamp_nonneg, hadamard, polar_factor, SliceOps};
use crate::metrics::cpi_from_grams;
use crate::solver::updates::{solve, update_f_solved, update_v_with_grams, update_w_row_with_grams};
use crate::solver::{drive, fit_terms, init_factors_seeded, FitReport, Measure, Sweeper};
use crate::{par, Mat, Result};

/// One-shot thresholding of the PARAFAC2 factor: `max(0, Q_k H)`.
pub fn threshold_u(q: &Mat, h: &Mat) -> Mat {
    clamp_nonneg(&(q * h))
}

struct CopaState<'a> {
    tensor: &'a IrregularTensor,
    static_matrix: &'a StaticMatrix,
    slices: Vec<&'a SparseSlice>,
    hyper: Hyperparams,
    factors: FactorSet,
    ridge_warnings: usize,
    rank_warnings: usize,
}

impl CopaState<'_> {
    /// `H ≥ 0` minimizing `Σ ‖Y_k − H S_k Vᵀ‖²`: gram `Σ S_k VᵀV S_k`,
    /// cross `(Σ Y_k V S_k)ᵀ`.
    fn solve_h(&mut self, ys: &[Mat]) -> Result<Mat> {
        let f = &self.factors;
        let r = f.rank();
        let vtv = f.v.tr_mul(&f.v);
        let parts = par::map_range(ys.len(), |k| {
            let s = f.s(k);
            let ss = Mat::from_fn(r, r, |i, j| s[i] * s[j]);
            let mut yvs = &ys[k] * &f.v;
            for (c, &sc) in s.iter().enumerate() {
                yvs.column_mut(c).scale_mut(sc);
            }
            (hadamard(&vtv, &ss), yvs)
        });
        let (grams, rhs): (Vec<Mat>, Vec<Mat>) = parts.into_iter().unzip();
        let gram = par::ordered_sum(&grams, r, r);
        let rhs = par::ordered_sum(&rhs, r, r);
        // H G = B  ⇔  G Hᵀ = Bᵀ, solved column by column under Hᵀ ≥ 0
        let solved = solve(gram, rhs.transpose())?;
        self.ridge_warnings += solved.ridged as usize;
        Ok(solved.value.transpose())
    }

    fn sweep(&mut self) -> Result<()> {
        let k_total = self.factors.n_slices();
        let f = &self.factors;
        let qs = par::map_range(k_total, |k| {
            let mut xvs = self.slices[k].mul_right(&f.v);
            for (c, sc) in f.s(k).into_iter().enumerate() {
                xvs.column_mut(c).scale_mut(sc);
            }
            polar_factor(&(xvs * f.h.transpose()))
        });
        for (k, (q, deficient)) in qs.into_iter().enumerate() {
            self.rank_warnings += deficient as usize;
            self.factors.q[k] = q;
        }

        let f = &self.factors;
        let ys: Vec<Mat> = par::map_range(k_total, |k| self.slices[k].tr_mul_left(&f.q[k]));
        self.factors.h = self.solve_h(&ys)?;

        let f = &self.factors;
        let hs = vec![f.h.clone(); k_total];
        let hgram = f.h.tr_mul(&f.h);
        let hgrams = vec![hgram.clone(); k_total];
        let y_refs: Vec<&Mat> = ys.iter().collect();
        let v = update_v_with_grams(&y_refs, &hs, &hgrams, &f.w)?;
        self.ridge_warnings += v.ridged as usize;
        self.factors.v = v.value;

        let f = &self.factors;
        let vtv = f.v.tr_mul(&f.v);
        let ftf = f.f.tr_mul(&f.f);
        let lambda = self.hyper.lambda;
        let rows = par::try_map_range(k_total, |k| {
            update_w_row_with_grams(&ys[k], &f.h, &hgram, &f.v, &vtv, &f.f, &ftf, &self.static_matrix.row(k), lambda)
        })?;
        for (k, row) in rows.into_iter().enumerate() {
            self.ridge_warnings += row.ridged as usize;
            self.factors.w.set_row(k, &row.value.transpose());
        }

        if lambda > 0.0 {
            let solved = update_f_solved(&self.factors.w, self.static_matrix.values())?;
            self.ridge_warnings += solved.ridged as usize;
            self.factors.f = solved.value;
        }

        self.threshold_all();
        Ok(())
    }

    fn threshold_all(&mut self) {
        let f = &self.factors;
        self.factors.u = par::map_range(f.n_slices(), |k| threshold_u(&f.q[k], &f.h));
    }
}

impl Sweeper for CopaState<'_> {
    fn sweep(&mut self) -> Result<()> {
        CopaState::sweep(self)
    }

    fn measure(&self) -> Measure {
        let t = fit_terms(self.tensor, self.static_matrix, &self.factors);
        let grams: Vec<Mat> = self.factors.u.iter().map(|u| u.tr_mul(u)).collect();
        Measure {
            objective: t.objective(self.hyper.lambda, self.hyper.mu),
            rmse: t.rmse(self.hyper.lambda, self.tensor.n_cells(), self.static_matrix.values().len()),
            cpi: cpi_from_grams(&grams, &self.factors.h).unwrap_or(f64::NAN),
        }
    }

    fn warnings(&self) -> (usize, usize) {
        (self.ridge_warnings, self.rank_warnings)
    }
}

/// Fits the thresholding baseline. `hyper.mu` only weights the reported
/// objective; it does not enter any update.
pub fn fit_copa_plus(
    tensor: &IrregularTensor,
    static_matrix: &StaticMatrix,
    hyper: &Hyperparams,
    init: Option<FactorSet>,
) -> Result<(FactorSet, FitReport)> {
    hyper.validate(tensor)?;
    static_matrix.check_aligned(tensor)?;
    let mut factors = match init {
        Some(f) => f,
        None => init_factors_seeded(tensor, static_matrix, hyper)?,
    };
    factors.check_against(tensor, static_matrix)?;
    factors.shape = hyper.shape();
    let mut state = CopaState {
        tensor,
        static_matrix,
        slices: tensor.slices().iter().map(|s| &s.data).collect(),
        hyper: *hyper,
        factors,
        ridge_warnings: 0,
        rank_warnings: 0,
    };
    state.threshold_all();
    let report = drive(&mut state, hyper.tol, hyper.max_sweeps)?;
    Ok((state.factors, report))
}
