//! Domain types: irregular tensors, static matrices, factor sets and
//! hyperparameters, plus their on-disk formats (see [`io`]).

pub mod io;
mod sparse;

pub use io::{load_dataset, load_factors, save_dataset, save_factors, write_score_table};
pub use sparse::SparseSlice;

use serde::{Deserialize, Serialize};

use crate::linalg::{min_entry, orthonormality_error};
use crate::{Error, Mat, Result, Vector};

/// Maximum `|Q_k^T Q_k − I|` accepted when validating a factor set.
pub const ORTHONORMAL_TOL: f64 = 1e-8;

/// One entity's temporal matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Slice {
    pub entity_id: String,
    pub data: SparseSlice,
}

/// Ordered collection of `K` nonnegative slices sharing `J` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct IrregularTensor {
    slices: Vec<Slice>,
    n_features: usize,
}

impl IrregularTensor {
    pub fn new(slices: Vec<Slice>, n_features: usize) -> Result<Self> {
        if slices.is_empty() {
            return Err(Error::Invalid("tensor needs at least one slice".into()));
        }
        if n_features == 0 {
            return Err(Error::Invalid("tensor needs at least one feature column".into()));
        }
        for (k, s) in slices.iter().enumerate() {
            if s.data.ncols() != n_features {
                return Err(Error::Dimension(format!(
                    "slice {k} ({}) has {} columns, expected {n_features}",
                    s.entity_id,
                    s.data.ncols()
                )));
            }
            if s.data.nrows() == 0 {
                return Err(Error::Invalid(format!("slice {k} ({}) has no rows", s.entity_id)));
            }
        }
        Ok(Self { slices, n_features })
    }

    pub fn n_slices(&self) -> usize {
        self.slices.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn slices(&self) -> &[Slice] {
        &self.slices
    }

    pub fn slice(&self, k: usize) -> &SparseSlice {
        &self.slices[k].data
    }

    pub fn rows(&self, k: usize) -> usize {
        self.slices[k].data.nrows()
    }

    pub fn entity_ids(&self) -> Vec<String> {
        self.slices.iter().map(|s| s.entity_id.clone()).collect()
    }

    pub fn min_rows(&self) -> usize {
        self.slices.iter().map(|s| s.data.nrows()).min().unwrap_or(0)
    }

    /// `Σ_k I_k · J`.
    pub fn n_cells(&self) -> usize {
        self.slices.iter().map(|s| s.data.nrows()).sum::<usize>() * self.n_features
    }

    pub fn sq_norm(&self) -> f64 {
        self.slices.iter().map(|s| s.data.sq_norm()).sum()
    }
}

/// Dense `K x P` static side information, rows aligned with tensor slices.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticMatrix {
    entity_ids: Vec<String>,
    feature_names: Vec<String>,
    values: Mat,
}

impl StaticMatrix {
    pub fn new(entity_ids: Vec<String>, feature_names: Vec<String>, values: Mat) -> Result<Self> {
        if entity_ids.len() != values.nrows() {
            return Err(Error::Dimension(format!(
                "static matrix has {} rows but {} entity ids",
                values.nrows(),
                entity_ids.len()
            )));
        }
        if feature_names.len() != values.ncols() {
            return Err(Error::Dimension(format!(
                "static matrix has {} columns but {} feature names",
                values.ncols(),
                feature_names.len()
            )));
        }
        if values.ncols() == 0 {
            return Err(Error::Invalid("static matrix needs at least one column".into()));
        }
        for j in 0..values.ncols() {
            for i in 0..values.nrows() {
                let v = values[(i, j)];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::Invalid(format!(
                        "static value {v} at row {i} ({}), column {j} ({}) must be finite and nonnegative",
                        entity_ids[i], feature_names[j]
                    )));
                }
            }
        }
        Ok(Self { entity_ids, feature_names, values })
    }

    /// Static matrix with generated feature names `s0, s1, ...`.
    pub fn with_default_names(entity_ids: Vec<String>, values: Mat) -> Result<Self> {
        let names = (0..values.ncols()).map(|j| format!("s{j}")).collect();
        Self::new(entity_ids, names, values)
    }

    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &Mat {
        &self.values
    }

    pub fn row(&self, k: usize) -> Vector {
        self.values.row(k).transpose()
    }

    pub fn entity_ids(&self) -> &[String] {
        &self.entity_ids
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    /// Checks row count and entity-id order against `tensor`.
    pub fn check_aligned(&self, tensor: &IrregularTensor) -> Result<()> {
        if self.n_rows() != tensor.n_slices() {
            return Err(Error::Dimension(format!(
                "static matrix has {} rows but the tensor has {} slices",
                self.n_rows(),
                tensor.n_slices()
            )));
        }
        for (k, (a, s)) in self.entity_ids.iter().zip(tensor.slices()).enumerate() {
            if *a != s.entity_id {
                return Err(Error::Invalid(format!(
                    "entity id mismatch at position {k}: static row `{a}` vs slice `{}`",
                    s.entity_id
                )));
            }
        }
        Ok(())
    }
}

/// Rank and weights a factor set was produced with.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelShape {
    pub rank: usize,
    pub lambda: f64,
    pub mu: f64,
}

/// Model state: `{Q_k}`, `H`, `{U_k}`, `W` (row `k` = `diag(S_k)`), `V`, `F`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorSet {
    pub entity_ids: Vec<String>,
    pub q: Vec<Mat>,
    pub h: Mat,
    pub u: Vec<Mat>,
    pub w: Mat,
    pub v: Mat,
    pub f: Mat,
    pub shape: ModelShape,
}

impl FactorSet {
    pub fn rank(&self) -> usize {
        self.shape.rank
    }

    pub fn n_slices(&self) -> usize {
        self.u.len()
    }

    /// `diag(S_k)` as a slice-friendly vector.
    pub fn s(&self, k: usize) -> Vec<f64> {
        self.w.row(k).iter().cloned().collect()
    }

    /// Checks internal dimensions, orthonormality and nonnegativity.
    pub fn validate(&self) -> Result<()> {
        let r = self.shape.rank;
        let k = self.u.len();
        if r == 0 {
            return Err(Error::Invalid("factor rank must be positive".into()));
        }
        if self.q.len() != k || self.entity_ids.len() != k {
            return Err(Error::Dimension(format!(
                "{} Q factors, {} U factors and {} entity ids",
                self.q.len(),
                k,
                self.entity_ids.len()
            )));
        }
        let check = |name: &str, m: &Mat, rows: Option<usize>| -> Result<()> {
            if m.ncols() != r || rows.is_some_and(|n| m.nrows() != n) {
                return Err(Error::Dimension(format!(
                    "{name} is {}x{}, expected {}x{r}",
                    m.nrows(),
                    m.ncols(),
                    rows.map_or("?".to_string(), |n| n.to_string())
                )));
            }
            if m.iter().any(|x| !x.is_finite()) {
                return Err(Error::Invalid(format!("{name} has non-finite entries")));
            }
            Ok(())
        };
        check("H", &self.h, Some(r))?;
        check("W", &self.w, Some(k))?;
        check("V", &self.v, None)?;
        check("F", &self.f, None)?;
        for i in 0..k {
            check(&format!("Q[{i}]"), &self.q[i], None)?;
            check(&format!("U[{i}]"), &self.u[i], Some(self.q[i].nrows()))?;
            let err = orthonormality_error(&self.q[i]);
            if !(err <= ORTHONORMAL_TOL) {
                return Err(Error::Invalid(format!(
                    "Q[{i}] ({}) is not orthonormal: max |QᵀQ − I| = {err:e}",
                    self.entity_ids[i]
                )));
            }
            nonneg(&format!("U[{i}]"), &self.u[i])?;
        }
        nonneg("W", &self.w)?;
        nonneg("V", &self.v)?;
        nonneg("F", &self.f)?;
        Ok(())
    }

    /// Checks that the factors fit `tensor` and `static_matrix`.
    pub fn check_against(&self, tensor: &IrregularTensor, static_matrix: &StaticMatrix) -> Result<()> {
        if self.n_slices() != tensor.n_slices() {
            return Err(Error::Dimension(format!(
                "factors cover {} entities, data has {}",
                self.n_slices(),
                tensor.n_slices()
            )));
        }
        if self.v.nrows() != tensor.n_features() {
            return Err(Error::Dimension(format!(
                "V has {} rows, data has {} features",
                self.v.nrows(),
                tensor.n_features()
            )));
        }
        if self.f.nrows() != static_matrix.n_cols() {
            return Err(Error::Dimension(format!(
                "F has {} rows, static matrix has {} columns",
                self.f.nrows(),
                static_matrix.n_cols()
            )));
        }
        for k in 0..self.n_slices() {
            if self.u[k].nrows() != tensor.rows(k) {
                return Err(Error::Dimension(format!(
                    "U[{k}] has {} rows, slice has {}",
                    self.u[k].nrows(),
                    tensor.rows(k)
                )));
            }
        }
        Ok(())
    }
}

fn nonneg(name: &str, m: &Mat) -> Result<()> {
    if m.is_empty() || min_entry(m) >= 0.0 {
        return Ok(());
    }
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if m[(i, j)] < 0.0 {
                return Err(Error::Invalid(format!(
                    "{name} has negative entry {} at row {i}, column {j}",
                    m[(i, j)]
                )));
            }
        }
    }
    unreachable!()
}

/// Fit configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub rank: usize,
    /// Weight of the static coupling term.
    pub lambda: f64,
    /// Weight of the `‖U_k − Q_k H‖` term, shared by all entities.
    pub mu: f64,
    /// Relative objective change that counts as converged.
    pub tol: f64,
    pub max_sweeps: usize,
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self { rank: 4, lambda: 0.1, mu: 0.1, tol: 1e-4, max_sweeps: 500, seed: 0 }
    }
}

impl Hyperparams {
    pub fn new(rank: usize) -> Self {
        Self { rank, ..Self::default() }
    }

    pub fn shape(&self) -> ModelShape {
        ModelShape { rank: self.rank, lambda: self.lambda, mu: self.mu }
    }

    /// Checks weights and rank against the data dimensions.
    pub fn validate(&self, tensor: &IrregularTensor) -> Result<()> {
        if self.rank == 0 {
            return Err(Error::Hyperparams("rank must be positive".into()));
        }
        for (name, v) in [("lambda", self.lambda), ("mu", self.mu), ("tol", self.tol)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Hyperparams(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if self.rank > tensor.n_features() {
            return Err(Error::Hyperparams(format!(
                "rank {} exceeds the feature count {}",
                self.rank,
                tensor.n_features()
            )));
        }
        if let Some((k, s)) = tensor.slices().iter().enumerate().find(|(_, s)| s.data.nrows() < self.rank) {
            return Err(Error::Hyperparams(format!(
                "rank {} exceeds the {} rows of slice {k} ({})",
                self.rank,
                s.data.nrows(),
                s.entity_id
            )));
        }
        Ok(())
    }
}
