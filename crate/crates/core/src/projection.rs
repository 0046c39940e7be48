//! Scoring unseen entities against frozen phenotype definitions.
//!
//! With `V`, `F` and `H` fixed, each new entity only owns `Q_n`, `U_n` and its
//! score row `w_n`, so every entity is an independent small problem. Each one
//! alternates `Q_n → U_n → w_n` until its own objective settles, which makes
//! the result for an entity independent of which other entities share the
//! batch.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{FactorSet, Hyperparams, IrregularTensor, SparseSlice, StaticMatrix};
use crate::linalg::SliceOps;
use crate::solver::updates::{update_q, update_u_with_gram, update_w_row_with_grams};
use crate::solver::{random_orthonormal, relative_change, uniform, FitReport, SweepRecord, Termination};
use crate::{par, Error, Mat, Result, Vector};

/// Projected scores and per-entity factors.
#[derive(Debug, Clone)]
pub struct Projection {
    pub entity_ids: Vec<String>,
    /// `N' x R` personalized phenotype scores.
    pub w: Mat,
    pub u: Vec<Mat>,
    pub q: Vec<Mat>,
    /// Sweep `s` sums every entity's objective after its `s`-th sweep (an
    /// entity that already converged contributes its final value).
    pub report: FitReport,
}

/// Residual pieces for one entity after one sweep.
#[derive(Debug, Clone, Copy)]
struct EntityTerms {
    data_sq: f64,
    static_sq: f64,
    unique_sq: f64,
    /// `‖U_nᵀU_n − HᵀH‖²`
    cpi_num: f64,
}

impl EntityTerms {
    fn objective(&self, hyper: &Hyperparams) -> f64 {
        0.5 * self.data_sq + 0.5 * hyper.lambda * self.static_sq + 0.5 * hyper.mu * self.unique_sq
    }
}

struct EntityFit {
    q: Mat,
    u: Mat,
    w: Vector,
    history: Vec<EntityTerms>,
    converged: bool,
    ridge_warnings: usize,
    rank_warnings: usize,
}

/// Stable per-entity seed: FNV-1a of the id mixed with the run seed.
pub fn entity_seed(seed: u64, entity_id: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in entity_id.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    // splitmix64 finalizer
    let mut z = h ^ seed.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

struct Frozen<'a> {
    trained: &'a FactorSet,
    vtv: Mat,
    ftf: Mat,
    hth: Mat,
}

fn entity_terms(x: &SparseSlice, a: &Vector, frozen: &Frozen, q: &Mat, u: &Mat, w: &Vector) -> EntityTerms {
    let t = frozen.trained;
    let s: Vec<f64> = w.iter().cloned().collect();
    EntityTerms {
        data_sq: x.residual_sq(u, &s, &t.v),
        static_sq: (a - &t.f * w).norm_squared(),
        unique_sq: (u - q * &t.h).norm_squared(),
        cpi_num: (u.tr_mul(u) - &frozen.hth).norm_squared(),
    }
}

fn project_entity(
    id: &str,
    x: &SparseSlice,
    a: &Vector,
    frozen: &Frozen,
    hyper: &Hyperparams,
) -> Result<EntityFit> {
    let t = frozen.trained;
    let r = t.rank();
    let mut rng = ChaCha8Rng::seed_from_u64(entity_seed(hyper.seed, id));
    let w0 = uniform(&mut rng, 1, r);
    let mut fit = EntityFit {
        q: random_orthonormal(&mut rng, x.nrows(), r),
        u: uniform(&mut rng, x.nrows(), r),
        w: w0.row(0).transpose(),
        history: Vec::new(),
        converged: false,
        ridge_warnings: 0,
        rank_warnings: 0,
    };
    fit.history.push(entity_terms(x, a, frozen, &fit.q, &fit.u, &fit.w));

    for _ in 0..hyper.max_sweeps {
        if hyper.mu > 0.0 {
            let (q, deficient) = update_q(&fit.u, &t.h);
            fit.rank_warnings += deficient as usize;
            fit.q = q;
        }
        let s: Vec<f64> = fit.w.iter().cloned().collect();
        let u = update_u_with_gram(x, &t.v, &frozen.vtv, &s, &fit.q, &t.h, hyper.mu)?;
        fit.ridge_warnings += u.ridged as usize;
        fit.u = u.value;
        let utu = fit.u.tr_mul(&fit.u);
        let w = update_w_row_with_grams(x, &fit.u, &utu, &t.v, &frozen.vtv, &t.f, &frozen.ftf, a, hyper.lambda)?;
        fit.ridge_warnings += w.ridged as usize;
        fit.w = w.value;

        let terms = entity_terms(x, a, frozen, &fit.q, &fit.u, &fit.w);
        let obj = terms.objective(hyper);
        if !obj.is_finite() {
            return Err(Error::Invalid(format!("projection objective for `{id}` became {obj}")));
        }
        let prev = fit.history.last().expect("initial terms").objective(hyper);
        fit.history.push(terms);
        if relative_change(prev, obj) < hyper.tol {
            fit.converged = true;
            break;
        }
    }
    Ok(fit)
}

/// Projects `new_tensor` / `new_static` onto the frozen `V`, `F`, `H` of
/// `trained`. `hyper.rank` must match the trained rank; `λ`, `μ`, `tol`,
/// `max_sweeps` and `seed` are taken from `hyper`.
pub fn project(
    new_tensor: &IrregularTensor,
    new_static: &StaticMatrix,
    trained: &FactorSet,
    hyper: &Hyperparams,
) -> Result<Projection> {
    trained.validate()?;
    new_static.check_aligned(new_tensor)?;
    if hyper.rank != trained.rank() {
        return Err(Error::Dimension(format!(
            "projection rank {} differs from trained rank {}",
            hyper.rank,
            trained.rank()
        )));
    }
    hyper.validate(new_tensor)?;
    if new_tensor.n_features() != trained.v.nrows() {
        return Err(Error::Dimension(format!(
            "new data has {} features, trained V has {}",
            new_tensor.n_features(),
            trained.v.nrows()
        )));
    }
    if new_static.n_cols() != trained.f.nrows() {
        return Err(Error::Dimension(format!(
            "new static matrix has {} columns, trained F has {}",
            new_static.n_cols(),
            trained.f.nrows()
        )));
    }

    let start = Instant::now();
    let frozen = Frozen {
        trained,
        vtv: trained.v.tr_mul(&trained.v),
        ftf: trained.f.tr_mul(&trained.f),
        hth: trained.h.tr_mul(&trained.h),
    };
    let n = new_tensor.n_slices();
    let fits = par::try_map_range(n, |k| {
        let s = &new_tensor.slices()[k];
        project_entity(&s.entity_id, &s.data, &new_static.row(k), &frozen, hyper)
    })?;

    let report = aggregate(&fits, &frozen, hyper, new_tensor.n_cells(), new_static.values().len(), start);
    let r = trained.rank();
    let mut w = Mat::zeros(n, r);
    let mut u = Vec::with_capacity(n);
    let mut q = Vec::with_capacity(n);
    for (k, fit) in fits.into_iter().enumerate() {
        w.set_row(k, &fit.w.transpose());
        u.push(fit.u);
        q.push(fit.q);
    }
    Ok(Projection { entity_ids: new_tensor.entity_ids(), w, u, q, report })
}

fn aggregate(
    fits: &[EntityFit],
    frozen: &Frozen,
    hyper: &Hyperparams,
    temporal_cells: usize,
    static_cells: usize,
    start: Instant,
) -> FitReport {
    let longest = fits.iter().map(|f| f.history.len()).max().unwrap_or(1);
    let hth_sq = frozen.hth.norm_squared() * fits.len() as f64;
    let mut records = Vec::with_capacity(longest);
    for sweep in 0..longest {
        let (mut obj, mut data, mut stat, mut cpi_num) = (0.0, 0.0, 0.0, 0.0);
        for f in fits {
            let t = f.history[sweep.min(f.history.len() - 1)];
            obj += t.objective(hyper);
            data += t.data_sq;
            stat += t.static_sq;
            cpi_num += t.cpi_num;
        }
        records.push(SweepRecord {
            sweep,
            objective: obj,
            rmse: ((data + 0.5 * hyper.lambda * stat) / (temporal_cells + static_cells) as f64).sqrt(),
            cpi: if hth_sq > 0.0 { 1.0 - cpi_num / hth_sq } else { f64::NAN },
            elapsed: f64::NAN,
        });
    }
    if let Some(last) = records.last_mut() {
        last.elapsed = start.elapsed().as_secs_f64();
    }
    FitReport {
        records,
        termination: if fits.iter().all(|f| f.converged) { Termination::Converged } else { Termination::SweepCap },
        ridge_warnings: fits.iter().map(|f| f.ridge_warnings).sum(),
        rank_warnings: fits.iter().map(|f| f.rank_warnings).sum(),
    }
}
