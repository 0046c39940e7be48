//! Alternating block-coordinate fit.
//!
//! A sweep updates the blocks in the fixed order `Q → H → U → V → W → F`.
//! `Q` and `H` are skipped when `μ = 0` and `F` when `λ = 0`. Each update
//! solves its subproblem exactly, so the objective never increases (up to
//! the tiny ridge added to singular grams). The loop stops once the relative
//! objective change drops below `tol` or the sweep cap is hit.

mod init;
pub mod updates;

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

pub use init::{init_factors, init_factors_seeded};
pub(crate) use init::{random_orthonormal, uniform};
pub use updates::{update_f, update_h, update_q, update_u, update_v, update_w_row};

use crate::data::{FactorSet, Hyperparams, IrregularTensor, SparseSlice, StaticMatrix};
use crate::linalg::{reconstruct, SliceOps};
use crate::metrics::cpi_from_grams;
use crate::{par, Error, Mat, Result};

/// Squared-residual pieces of the objective.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FitTerms {
    /// `Σ_k ‖X_k − U_k S_k Vᵀ‖²`
    pub data_sq: f64,
    /// `‖A − W Fᵀ‖²`
    pub static_sq: f64,
    /// `Σ_k ‖U_k − Q_k H‖²`
    pub unique_sq: f64,
}

impl FitTerms {
    pub fn objective(&self, lambda: f64, mu: f64) -> f64 {
        0.5 * self.data_sq + 0.5 * lambda * self.static_sq + 0.5 * mu * self.unique_sq
    }

    pub fn rmse(&self, lambda: f64, temporal_cells: usize, static_cells: usize) -> f64 {
        ((self.data_sq + 0.5 * lambda * self.static_sq) / (temporal_cells + static_cells) as f64).sqrt()
    }

    pub fn rmse_unweighted(&self, temporal_cells: usize, static_cells: usize) -> f64 {
        ((self.data_sq + self.static_sq) / (temporal_cells + static_cells) as f64).sqrt()
    }
}

/// Residual terms for `factors` on the given data. Dimensions must agree.
pub fn fit_terms(tensor: &IrregularTensor, static_matrix: &StaticMatrix, factors: &FactorSet) -> FitTerms {
    let per_slice = par::map_range(tensor.n_slices(), |k| {
        let s = factors.s(k);
        let data = tensor.slice(k).residual_sq(&factors.u[k], &s, &factors.v);
        let unique = (&factors.u[k] - &factors.q[k] * &factors.h).norm_squared();
        (data, unique)
    });
    let mut terms = FitTerms::default();
    for (d, u) in per_slice {
        terms.data_sq += d;
        terms.unique_sq += u;
    }
    terms.static_sq = (static_matrix.values() - &factors.w * factors.f.transpose()).norm_squared();
    terms
}

/// `Σ_k ½‖X_k − U_k S_k Vᵀ‖² + λ/2 ‖A − W Fᵀ‖² + Σ_k μ/2 ‖U_k − Q_k H‖²`.
pub fn objective(
    tensor: &IrregularTensor,
    static_matrix: &StaticMatrix,
    factors: &FactorSet,
    hyper: &Hyperparams,
) -> Result<f64> {
    factors.check_against(tensor, static_matrix)?;
    Ok(fit_terms(tensor, static_matrix, factors).objective(hyper.lambda, hyper.mu))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Termination {
    Converged,
    SweepCap,
    Error(String),
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Termination::Converged => f.write_str("converged"),
            Termination::SweepCap => f.write_str("sweep_cap"),
            Termination::Error(e) => write!(f, "error: {e}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRecord {
    pub sweep: usize,
    pub objective: f64,
    pub rmse: f64,
    /// NaN when CPI is undefined (`H = 0`).
    pub cpi: f64,
    /// Seconds since the fit started.
    pub elapsed: f64,
}

/// Per-sweep trace of a fit. Record 0 is the starting point.
#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub records: Vec<SweepRecord>,
    pub termination: Termination,
    /// NNLS subproblems that needed a ridge to become positive definite.
    pub ridge_warnings: usize,
    /// Procrustes steps on a rank-deficient `U_k Hᵀ`.
    pub rank_warnings: usize,
}

impl FitReport {
    pub fn objectives(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.objective).collect()
    }

    pub fn last(&self) -> &SweepRecord {
        self.records.last().expect("report has the initial record")
    }

    /// Number of completed sweeps (excluding the starting point).
    pub fn sweeps(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    pub fn seconds(&self) -> f64 {
        self.last().elapsed
    }

    /// Tab-separated sweep log. Timing is left out so identical runs give
    /// identical logs.
    pub fn write_sweep_log(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "sweep\tobjective\trmse\tcpi")?;
        for r in &self.records {
            writeln!(
                out,
                "{}\t{}\t{}\t{}",
                r.sweep,
                crate::data::io::fmt_f64(r.objective),
                crate::data::io::fmt_f64(r.rmse),
                crate::data::io::fmt_f64(r.cpi)
            )?;
        }
        Ok(())
    }

    pub fn save_sweep_log(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_sweep_log(&mut buf).expect("writing to memory");
        std::fs::write(path, buf).map_err(|e| Error::io(path, e))
    }
}

/// Objective, RMSE and CPI of the current iterate.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Measure {
    pub objective: f64,
    pub rmse: f64,
    pub cpi: f64,
}

/// Something that can run one sweep and report where it stands.
pub(crate) trait Sweeper {
    fn sweep(&mut self) -> Result<()>;
    fn measure(&self) -> Measure;
    fn warnings(&self) -> (usize, usize);
}

/// Relative change `|prev − cur| / max(prev, ε)`.
pub(crate) fn relative_change(prev: f64, cur: f64) -> f64 {
    (prev - cur).abs() / prev.max(f64::MIN_POSITIVE)
}

pub(crate) fn drive(sweeper: &mut impl Sweeper, tol: f64, max_sweeps: usize) -> Result<FitReport> {
    let start = Instant::now();
    let record = |sweep: usize, m: Measure| SweepRecord {
        sweep,
        objective: m.objective,
        rmse: m.rmse,
        cpi: m.cpi,
        elapsed: start.elapsed().as_secs_f64(),
    };
    let mut report = FitReport {
        records: vec![record(0, sweeper.measure())],
        termination: Termination::SweepCap,
        ridge_warnings: 0,
        rank_warnings: 0,
    };
    let fail = |mut report: FitReport, sweep: usize, detail: String, w: (usize, usize)| {
        report.termination = Termination::Error(detail.clone());
        (report.ridge_warnings, report.rank_warnings) = w;
        Error::Diverged { sweep, detail, report: Box::new(report) }
    };
    if !report.records[0].objective.is_finite() {
        return Err(fail(report, 0, "initial objective is not finite".into(), sweeper.warnings()));
    }

    for sweep in 1..=max_sweeps {
        if let Err(e) = sweeper.sweep() {
            return Err(fail(report, sweep, e.to_string(), sweeper.warnings()));
        }
        let m = sweeper.measure();
        if !m.objective.is_finite() {
            let detail = format!("objective became {}", m.objective);
            return Err(fail(report, sweep, detail, sweeper.warnings()));
        }
        let prev = report.last().objective;
        report.records.push(record(sweep, m));
        if relative_change(prev, m.objective) < tol {
            report.termination = Termination::Converged;
            break;
        }
    }
    (report.ridge_warnings, report.rank_warnings) = sweeper.warnings();
    Ok(report)
}

/// Fit state with the Gram caches the block updates share.
///
/// The step methods are public so callers (and tests) can drive individual
/// block updates; [`fit`] just calls [`SweepState::sweep`] repeatedly.
pub struct SweepState<'a> {
    tensor: &'a IrregularTensor,
    static_matrix: &'a StaticMatrix,
    slices: Vec<&'a SparseSlice>,
    hyper: Hyperparams,
    factors: FactorSet,
    u_grams: Vec<Mat>,
    vtv: Mat,
    ftf: Mat,
    wtw: Mat,
    ridge_warnings: usize,
    rank_warnings: usize,
}

impl<'a> SweepState<'a> {
    pub fn new(
        tensor: &'a IrregularTensor,
        static_matrix: &'a StaticMatrix,
        hyper: Hyperparams,
        factors: FactorSet,
    ) -> Result<Self> {
        hyper.validate(tensor)?;
        static_matrix.check_aligned(tensor)?;
        factors.check_against(tensor, static_matrix)?;
        if factors.rank() != hyper.rank {
            return Err(Error::Dimension(format!(
                "initial factors have rank {}, hyperparameters ask for {}",
                factors.rank(),
                hyper.rank
            )));
        }
        let u_grams = factors.u.iter().map(|u| u.tr_mul(u)).collect();
        let vtv = factors.v.tr_mul(&factors.v);
        let ftf = factors.f.tr_mul(&factors.f);
        let wtw = factors.w.tr_mul(&factors.w);
        let slices = tensor.slices().iter().map(|s| &s.data).collect();
        let mut factors = factors;
        factors.shape = hyper.shape();
        Ok(Self {
            tensor,
            static_matrix,
            slices,
            hyper,
            factors,
            u_grams,
            vtv,
            ftf,
            wtw,
            ridge_warnings: 0,
            rank_warnings: 0,
        })
    }

    pub fn factors(&self) -> &FactorSet {
        &self.factors
    }

    pub fn into_factors(self) -> FactorSet {
        self.factors
    }

    pub fn objective(&self) -> f64 {
        self.terms().objective(self.hyper.lambda, self.hyper.mu)
    }

    pub fn terms(&self) -> FitTerms {
        fit_terms(self.tensor, self.static_matrix, &self.factors)
    }

    /// Largest relative gap between a cached Gram and a fresh product.
    pub fn cache_drift(&self) -> f64 {
        let rel = |cached: &Mat, fresh: Mat| (cached - &fresh).amax() / fresh.amax().max(f64::MIN_POSITIVE);
        let f = &self.factors;
        let mut worst = rel(&self.vtv, f.v.tr_mul(&f.v))
            .max(rel(&self.ftf, f.f.tr_mul(&f.f)))
            .max(rel(&self.wtw, f.w.tr_mul(&f.w)));
        for (g, u) in self.u_grams.iter().zip(&f.u) {
            worst = worst.max(rel(g, u.tr_mul(u)));
        }
        worst
    }

    pub fn step_q(&mut self) {
        let f = &self.factors;
        let out = par::map_range(f.n_slices(), |k| update_q(&f.u[k], &f.h));
        for (k, (q, deficient)) in out.into_iter().enumerate() {
            if deficient {
                self.rank_warnings += 1;
                log::debug!("rank-deficient Procrustes target for slice {k}");
            }
            self.factors.q[k] = q;
        }
    }

    pub fn step_h(&mut self) {
        let mu = vec![self.hyper.mu; self.factors.n_slices()];
        if let Some(h) = update_h(&self.factors.q, &self.factors.u, &mu) {
            self.factors.h = h;
        }
    }

    pub fn step_u(&mut self) -> Result<()> {
        let f = &self.factors;
        let mu = self.hyper.mu;
        let out = par::try_map_range(f.n_slices(), |k| {
            updates::update_u_with_gram(self.slices[k], &f.v, &self.vtv, &f.s(k), &f.q[k], &f.h, mu)
        })?;
        for (k, solved) in out.into_iter().enumerate() {
            self.ridge_warnings += solved.ridged as usize;
            self.u_grams[k] = solved.value.tr_mul(&solved.value);
            self.factors.u[k] = solved.value;
        }
        Ok(())
    }

    pub fn step_v(&mut self) -> Result<()> {
        let solved = updates::update_v_with_grams(&self.slices, &self.factors.u, &self.u_grams, &self.factors.w)?;
        self.ridge_warnings += solved.ridged as usize;
        self.vtv = solved.value.tr_mul(&solved.value);
        self.factors.v = solved.value;
        Ok(())
    }

    pub fn step_w(&mut self) -> Result<()> {
        let f = &self.factors;
        let lambda = self.hyper.lambda;
        let out = par::try_map_range(f.n_slices(), |k| {
            updates::update_w_row_with_grams(
                self.slices[k],
                &f.u[k],
                &self.u_grams[k],
                &f.v,
                &self.vtv,
                &f.f,
                &self.ftf,
                &self.static_matrix.row(k),
                lambda,
            )
        })?;
        for (k, solved) in out.into_iter().enumerate() {
            self.ridge_warnings += solved.ridged as usize;
            self.factors.w.set_row(k, &solved.value.transpose());
        }
        self.wtw = self.factors.w.tr_mul(&self.factors.w);
        Ok(())
    }

    pub fn step_f(&mut self) -> Result<()> {
        let solved = updates::update_f_solved(&self.factors.w, self.static_matrix.values())?;
        self.ridge_warnings += solved.ridged as usize;
        self.ftf = solved.value.tr_mul(&solved.value);
        self.factors.f = solved.value;
        Ok(())
    }

    /// One full sweep in block order `Q → H → U → V → W → F`.
    pub fn sweep(&mut self) -> Result<()> {
        if self.hyper.mu > 0.0 {
            self.step_q();
            self.step_h();
        }
        self.step_u()?;
        self.step_v()?;
        self.step_w()?;
        if self.hyper.lambda > 0.0 {
            self.step_f()?;
        }
        Ok(())
    }
}

impl Sweeper for SweepState<'_> {
    fn sweep(&mut self) -> Result<()> {
        SweepState::sweep(self)
    }

    fn measure(&self) -> Measure {
        let t = self.terms();
        Measure {
            objective: t.objective(self.hyper.lambda, self.hyper.mu),
            rmse: t.rmse(self.hyper.lambda, self.tensor.n_cells(), self.static_matrix.values().len()),
            cpi: cpi_from_grams(&self.u_grams, &self.factors.h).unwrap_or(f64::NAN),
        }
    }

    fn warnings(&self) -> (usize, usize) {
        (self.ridge_warnings, self.rank_warnings)
    }
}

/// Fits the coupled model. Without `init`, factors are drawn by
/// [`init_factors_seeded`].
pub fn fit(
    tensor: &IrregularTensor,
    static_matrix: &StaticMatrix,
    hyper: &Hyperparams,
    init: Option<FactorSet>,
) -> Result<(FactorSet, FitReport)> {
    hyper.validate(tensor)?;
    static_matrix.check_aligned(tensor)?;
    let start = match init {
        Some(f) => f,
        None => init_factors_seeded(tensor, static_matrix, hyper)?,
    };
    let mut state = SweepState::new(tensor, static_matrix, *hyper, start)?;
    let report = drive(&mut state, hyper.tol, hyper.max_sweeps)?;
    Ok((state.into_factors(), report))
}

/// Dense reconstruction `U_k S_k Vᵀ` of slice `k`.
pub fn reconstruct_slice(factors: &FactorSet, k: usize) -> Mat {
    reconstruct(&factors.u[k], &factors.s(k), &factors.v)
}
