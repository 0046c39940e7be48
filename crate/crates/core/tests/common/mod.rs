//! Independent oracles and fixtures shared by the integration tests.
//!
//! Nothing here calls the crate's solvers: NNLS answers come from brute-force
//! enumeration of active sets and least squares via SVD of explicit designs.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use taste::{FactorSet, IrregularTensor, Slice, SparseSlice, StaticMatrix};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut impl Rng, r: usize, c: usize) -> Mat {
    Mat::from_fn(r, c, |_, _| rng.random::<f64>())
}

pub fn normal(rng: &mut impl Rng, r: usize, c: usize) -> Mat {
    Mat::from_fn(r, c, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Random Q with orthonormal columns (Gram-Schmidt on a Gaussian draw).
pub fn orthonormal(rng: &mut impl Rng, r: usize, c: usize) -> Mat {
    let mut q = normal(rng, r, c);
    for j in 0..c {
        for i in 0..j {
            let d = q.column(i).dot(&q.column(j));
            let qi = q.column(i).into_owned();
            q.column_mut(j).axpy(-d, &qi, 1.0);
        }
        let n = q.column(j).norm();
        q.column_mut(j).scale_mut(1.0 / n);
    }
    q
}

/// `max|a − b| / max|b|`; exact equality required when `b` is all zero.
pub fn rel_err(a: &Mat, b: &Mat) -> f64 {
    assert_eq!(a.shape(), b.shape());
    let scale = b.amax();
    let diff = (a - b).amax();
    if scale == 0.0 {
        if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        diff / scale
    }
}

/// Least squares `min ‖D x − t‖` restricted to the columns in `passive`.
fn restricted_ls(design: &Mat, target: &Vector, passive: &[usize]) -> Vector {
    let sub = design.select_columns(passive);
    let svd = sub.svd(true, true);
    svd.solve(target, 1e-14).expect("svd solve")
}

/// Exhaustive NNLS for one target column: every passive set is solved by
/// unconstrained least squares, feasible candidates are kept, and the one
/// with the smallest residual wins.
pub fn enumerate_design(design: &Mat, target: &Vector) -> Vector {
    let r = design.ncols();
    let mut best = Vector::zeros(r);
    let mut best_res = target.norm_squared();
    for mask in 1u32..(1 << r) {
        let passive: Vec<usize> = (0..r).filter(|i| mask & (1 << i) != 0).collect();
        let xp = restricted_ls(design, target, &passive);
        if xp.iter().any(|&v| v < 0.0) {
            continue;
        }
        let mut x = Vector::zeros(r);
        for (slot, &i) in passive.iter().enumerate() {
            x[i] = xp[slot];
        }
        let res = (design * &x - target).norm_squared();
        if res < best_res {
            best_res = res;
            best = x;
        }
    }
    best
}

/// Column-wise [`enumerate_design`]: returns `R x N`.
pub fn enumerate_design_all(design: &Mat, targets: &Mat) -> Mat {
    let mut out = Mat::zeros(design.ncols(), targets.ncols());
    for c in 0..targets.ncols() {
        let t = targets.column(c).into_owned();
        out.set_column(c, &enumerate_design(design, &t));
    }
    out
}

/// Exhaustive NNLS in normal form: minimizes `½ xᵀ G x − cᵀ x` over all
/// passive sets with a dense LU solve of each restricted system.
pub fn enumerate_normal(gram: &Mat, cross: &Vector) -> Vector {
    let r = gram.nrows();
    let mut best = Vector::zeros(r);
    let mut best_val = 0.0;
    for mask in 1u32..(1 << r) {
        let passive: Vec<usize> = (0..r).filter(|i| mask & (1 << i) != 0).collect();
        let g = gram.select_rows(&passive).select_columns(&passive);
        let c = Vector::from_iterator(passive.len(), passive.iter().map(|&i| cross[i]));
        let Some(xp) = g.lu().solve(&c) else { continue };
        if xp.iter().any(|&v| v < 0.0) {
            continue;
        }
        let mut x = Vector::zeros(r);
        for (slot, &i) in passive.iter().enumerate() {
            x[i] = xp[slot];
        }
        let val = 0.5 * x.dot(&(gram * &x)) - cross.dot(&x);
        if val < best_val {
            best_val = val;
            best = x;
        }
    }
    best
}

pub fn quad_value(gram: &Mat, cross: &Vector, x: &Vector) -> f64 {
    0.5 * x.dot(&(gram * x)) - cross.dot(x)
}

/// Random SPD `R x R` gram with condition number kept moderate.
pub fn random_spd(rng: &mut impl Rng, r: usize) -> Mat {
    let b = normal(rng, r + 3, r);
    b.tr_mul(&b) + Mat::identity(r, r) * 0.1
}

/// `Σ ½‖X_k − U_k S_k Vᵀ‖² + λ/2 ‖A − W Fᵀ‖² + Σ μ/2 ‖U_k − Q_k H‖²`,
/// every product materialized densely.
pub fn dense_objective(
    slices: &[Mat],
    a: &Mat,
    factors: &FactorSet,
    lambda: f64,
    mu: f64,
) -> f64 {
    let mut total = 0.0;
    for (k, x) in slices.iter().enumerate() {
        let s = Mat::from_diagonal(&factors.w.row(k).transpose());
        let rec = &factors.u[k] * s * factors.v.transpose();
        total += 0.5 * (x - rec).norm_squared();
        total += 0.5 * mu * (&factors.u[k] - &factors.q[k] * &factors.h).norm_squared();
    }
    total + 0.5 * lambda * (a - &factors.w * factors.f.transpose()).norm_squared()
}

/// Small random dataset with dense nonnegative slices, some entries zeroed.
pub fn random_dataset(
    rng: &mut impl Rng,
    rows: &[usize],
    j: usize,
    p: usize,
) -> (IrregularTensor, StaticMatrix, Vec<Mat>) {
    let mut dense = Vec::new();
    let mut slices = Vec::new();
    for (k, &i) in rows.iter().enumerate() {
        let x = Mat::from_fn(i, j, |_, _| {
            let v: f64 = rng.random();
            if v < 0.3 {
                0.0
            } else {
                v
            }
        });
        slices.push(Slice { entity_id: format!("p{k}"), data: SparseSlice::from_dense(&x).unwrap() });
        dense.push(x);
    }
    let ids: Vec<String> = (0..rows.len()).map(|k| format!("p{k}")).collect();
    let a = uniform(rng, rows.len(), p);
    let tensor = IrregularTensor::new(slices, j).unwrap();
    let static_matrix = StaticMatrix::with_default_names(ids, a).unwrap();
    (tensor, static_matrix, dense)
}

pub fn row_rel_err(a: &Mat, b: &Mat) -> f64 {
    let mut worst: f64 = 0.0;
    for k in 0..b.nrows() {
        let scale = b.row(k).amax().max(f64::MIN_POSITIVE);
        worst = worst.max((a.row(k) - b.row(k)).amax() / scale);
    }
    worst
}
