//! Coupled nonnegative PARAFAC2 and matrix factorization for irregular
//! temporal data with static side information.
//!
//! A collection of nonnegative slices `X_k` (one per entity, `I_k x J`, rows
//! are visits or timestamps) is factorized jointly with a static `K x P`
//! matrix `A` as
//!
//! ```text
//! X_k ~ U_k S_k V^T,   A ~ W F^T,   W(k,:) = diag(S_k),   U_k ~ Q_k H
//! ```
//!
//! with `U_k, V, W, F >= 0` and `Q_k^T Q_k = I`. The `Q_k H` coupling keeps
//! `U_k^T U_k` close to constant across entities, which is what makes the
//! factors identifiable.
//!
//! The crate is organized as:
//!
//! * [`data`] - tensors, static matrices, factor sets and their file formats
//! * [`nnls`] - block principal pivoting NNLS on normal equations
//! * [`solver`] - the alternating block-coordinate fit
//! * [`baseline`] - the thresholding variant used for comparison
//! * [`projection`] - scoring unseen entities against frozen phenotypes
//! * [`metrics`] - RMSE, cross-product invariance, factor similarity
//! * [`synthetic`] - ground-truth generator and noise injection
//!
//! Per-entity work runs on rayon when the `parallel` feature is enabled
//! (the default). All reductions accumulate in entity order so results are
//! bitwise identical for any thread count, and identical to the sequential
//! build.

// `!(x > 0.0)` is used on purpose so NaN takes the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baseline;
pub mod data;
mod error;
pub mod linalg;
pub mod metrics;
pub mod nnls;
pub mod par;
pub mod projection;
pub mod solver;
pub mod synthetic;

pub use data::{FactorSet, Hyperparams, IrregularTensor, Slice, SparseSlice, StaticMatrix};
pub use error::{Error, Result};
pub use nnls::{nnls_from_design, nnls_solve, NnlsError, NnlsNormalForm};
pub use solver::{fit, objective, FitReport, SweepRecord, Termination};

/// Dense column-major matrix used throughout the crate.
pub type Mat = nalgebra::DMatrix<f64>;
/// Dense column vector.
pub type Vector = nalgebra::DVector<f64>;
