//! Nonnegative least squares by block principal pivoting.
//!
//! Every problem is given in normal-equation form: minimize
//! `½ xᵀ G x − cᵀ x` subject to `x ≥ 0`, where `G = BᵀB` and `c = Bᵀa` for
//! some design `B` and target `a`. One `R x R` gram is shared by all `N`
//! columns of the cross matrix; each column is an independent instance.
//!
//! Pivoting starts from the all-passive partition (the unconstrained
//! solution) and exchanges every infeasible variable per iteration. If the
//! number of infeasible variables fails to drop for three consecutive
//! iterations, only the infeasible variable with the largest index is
//! exchanged until the count drops again.

use nalgebra::Cholesky;
use thiserror::Error;

use crate::{par, Mat, Vector};

/// Exchange attempts allowed before the single-variable backup rule kicks in.
const FULL_EXCHANGE_CHANCES: usize = 3;

/// Column count above which columns are solved in parallel.
const PAR_COLUMNS: usize = 32;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnlsError {
    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),
    #[error("gram must be square and match cross rows (gram {gram_rows}x{gram_cols}, cross {cross_rows} rows)")]
    Shape { gram_rows: usize, gram_cols: usize, cross_rows: usize },
    #[error("gram is not symmetric (entry ({row}, {col}) differs by {diff:e})")]
    Asymmetric { row: usize, col: usize, diff: f64 },
    #[error("gram is not positive definite")]
    NotPositiveDefinite,
    #[error("pivoting did not terminate on column {column} within {limit} iterations after the backup rule engaged")]
    NoConvergence { column: usize, limit: usize },
}

/// `(gram, cross)` pair for a batch of NNLS problems sharing one design.
#[derive(Debug, Clone)]
pub struct NnlsNormalForm {
    gram: Mat,
    cross: Mat,
}

impl NnlsNormalForm {
    pub fn new(gram: Mat, cross: Mat) -> Result<Self, NnlsError> {
        if gram.nrows() != gram.ncols() || gram.nrows() != cross.nrows() {
            return Err(NnlsError::Shape {
                gram_rows: gram.nrows(),
                gram_cols: gram.ncols(),
                cross_rows: cross.nrows(),
            });
        }
        if gram.iter().any(|x| !x.is_finite()) {
            return Err(NnlsError::NonFinite("gram"));
        }
        if cross.iter().any(|x| !x.is_finite()) {
            return Err(NnlsError::NonFinite("cross"));
        }
        let scale = 1.0 + gram.amax();
        for j in 0..gram.ncols() {
            for i in 0..j {
                let diff = (gram[(i, j)] - gram[(j, i)]).abs();
                if diff > 1e-12 * scale {
                    return Err(NnlsError::Asymmetric { row: i, col: j, diff });
                }
            }
        }
        Ok(Self { gram, cross })
    }

    /// Builds `(BᵀB, BᵀA)` from an explicit design.
    pub fn from_design(design: &Mat, targets: &Mat) -> Result<Self, NnlsError> {
        if design.nrows() != targets.nrows() {
            return Err(NnlsError::Shape {
                gram_rows: design.ncols(),
                gram_cols: design.ncols(),
                cross_rows: targets.nrows(),
            });
        }
        let gram = design.tr_mul(design);
        let gram = (&gram + gram.transpose()) * 0.5;
        Self::new(gram, design.tr_mul(targets))
    }

    pub fn gram(&self) -> &Mat {
        &self.gram
    }

    pub fn cross(&self) -> &Mat {
        &self.cross
    }

    pub fn rank(&self) -> usize {
        self.gram.nrows()
    }

    /// Scale-relative default optimality tolerance, `1e-10 (1 + max|G|)`.
    pub fn default_kkt_tol(&self) -> f64 {
        1e-10 * (1.0 + self.gram.amax())
    }

    /// Adds `εI` with `ε = 1e-12 trace(G) / R` if `G` fails a Cholesky
    /// factorization. Returns whether a ridge was added.
    pub fn ensure_positive_definite(&mut self) -> bool {
        if Cholesky::new(self.gram.clone()).is_some() {
            return false;
        }
        let r = self.rank().max(1) as f64;
        let trace = self.gram.trace();
        let mut eps = 1e-12 * trace / r;
        if !(eps > 0.0) {
            eps = 1e-12;
        }
        // a single ridge may be too small for a badly indefinite gram
        for _ in 0..40 {
            let mut g = self.gram.clone();
            for i in 0..g.nrows() {
                g[(i, i)] += eps;
            }
            if Cholesky::new(g.clone()).is_some() {
                self.gram = g;
                return true;
            }
            eps *= 10.0;
        }
        true
    }
}

/// Solves every column of `problem` under `x ≥ 0`, returning an `R x N`
/// matrix. `gram` must be positive definite.
pub fn nnls_solve(problem: &NnlsNormalForm, kkt_tol: f64) -> Result<Mat, NnlsError> {
    let r = problem.rank();
    let n = problem.cross.ncols();
    if r == 0 || n == 0 {
        return Ok(Mat::zeros(r, n));
    }
    let chol = Cholesky::new(problem.gram.clone()).ok_or(NnlsError::NotPositiveDefinite)?;
    let unconstrained = chol.solve(&problem.cross);

    let solve_column = |j: usize| -> Result<Vector, NnlsError> {
        let x0 = unconstrained.column(j);
        if x0.iter().all(|&v| v >= 0.0) {
            return Ok(x0.into_owned());
        }
        pivot_column(&problem.gram, &problem.cross.column(j).into_owned(), x0.into_owned(), kkt_tol)
            .map_err(|e| match e {
                NnlsError::NoConvergence { limit, .. } => NnlsError::NoConvergence { column: j, limit },
                other => other,
            })
    };

    let columns = if n >= PAR_COLUMNS {
        par::try_map_range(n, solve_column)?
    } else {
        (0..n).map(solve_column).collect::<Result<Vec<_>, _>>()?
    };
    let mut out = Mat::zeros(r, n);
    for (j, col) in columns.into_iter().enumerate() {
        out.set_column(j, &col);
    }
    Ok(out)
}

/// NNLS on an explicit `M x R` design and `M x N` targets.
pub fn nnls_from_design(design: &Mat, targets: &Mat, kkt_tol: f64) -> Result<Mat, NnlsError> {
    nnls_solve(&NnlsNormalForm::from_design(design, targets)?, kkt_tol)
}

/// Block principal pivoting for one column, starting from the unconstrained
/// solution `x0` of the all-passive partition.
fn pivot_column(gram: &Mat, cross: &Vector, x0: Vector, kkt_tol: f64) -> Result<Vector, NnlsError> {
    let r = gram.nrows();
    let mut passive = vec![true; r];
    let mut x = x0;
    let mut y = Vector::zeros(r);

    let mut best_infeasible = r + 1;
    let mut chances = FULL_EXCHANGE_CHANCES;
    let mut backup_engaged = false;
    let mut backup_iterations = 0usize;
    let limit = 5 * r;

    loop {
        let infeasible: Vec<usize> = (0..r)
            .filter(|&i| if passive[i] { x[i] < 0.0 } else { y[i] < -kkt_tol })
            .collect();
        if infeasible.is_empty() {
            break;
        }

        if infeasible.len() < best_infeasible {
            best_infeasible = infeasible.len();
            chances = FULL_EXCHANGE_CHANCES;
            for &i in &infeasible {
                passive[i] = !passive[i];
            }
        } else if chances > 0 {
            chances -= 1;
            for &i in &infeasible {
                passive[i] = !passive[i];
            }
        } else {
            backup_engaged = true;
            let i = *infeasible.last().expect("nonempty");
            passive[i] = !passive[i];
        }

        if backup_engaged {
            backup_iterations += 1;
            if backup_iterations > limit {
                return Err(NnlsError::NoConvergence { column: 0, limit });
            }
        }

        solve_partition(gram, cross, &passive, &mut x, &mut y)?;
    }

    for i in 0..r {
        if !passive[i] {
            x[i] = 0.0;
        }
    }
    Ok(x)
}

/// Solves `G_FF x_F = c_F`, sets `x_G = 0` and `y_G = G_GF x_F − c_G`.
fn solve_partition(
    gram: &Mat,
    cross: &Vector,
    passive: &[bool],
    x: &mut Vector,
    y: &mut Vector,
) -> Result<(), NnlsError> {
    let free: Vec<usize> = (0..passive.len()).filter(|&i| passive[i]).collect();
    x.fill(0.0);
    y.fill(0.0);
    if !free.is_empty() {
        let nf = free.len();
        let sub = Mat::from_fn(nf, nf, |a, b| gram[(free[a], free[b])]);
        let rhs = Vector::from_iterator(nf, free.iter().map(|&i| cross[i]));
        let chol = Cholesky::new(sub).ok_or(NnlsError::NotPositiveDefinite)?;
        let sol = chol.solve(&rhs);
        for (a, &i) in free.iter().enumerate() {
            x[i] = sol[a];
        }
    }
    for i in 0..passive.len() {
        if !passive[i] {
            let mut acc = -cross[i];
            for &f in &free {
                acc += gram[(i, f)] * x[f];
            }
            y[i] = acc;
        }
    }
    Ok(())
}
