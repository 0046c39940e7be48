use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::{FactorSet, Hyperparams, IrregularTensor, StaticMatrix};
use crate::linalg::orthonormalize;
use crate::{Mat, Result};

pub(crate) fn uniform(rng: &mut impl Rng, rows: usize, cols: usize) -> Mat {
    Mat::from_fn(rows, cols, |_, _| rng.random::<f64>())
}

/// Orthonormalized `rows x cols` standard-normal draw.
pub(crate) fn random_orthonormal(rng: &mut impl Rng, rows: usize, cols: usize) -> Mat {
    let g = Mat::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal));
    orthonormalize(&g)
}

/// Random starting point: `H`, `V`, `W`, `F` and every `U_k` uniform on
/// `(0, 1)`, each `Q_k` an orthonormalized Gaussian draw.
///
/// Draw order is `H, V, W, F` and then `(Q_k, U_k)` per slice, so a fixed rng
/// state always yields the same factors.
pub fn init_factors(
    tensor: &IrregularTensor,
    static_matrix: &StaticMatrix,
    hyper: &Hyperparams,
    rng: &mut impl Rng,
) -> Result<FactorSet> {
    hyper.validate(tensor)?;
    let r = hyper.rank;
    let h = uniform(rng, r, r);
    let v = uniform(rng, tensor.n_features(), r);
    let w = uniform(rng, tensor.n_slices(), r);
    let f = uniform(rng, static_matrix.n_cols(), r);
    let mut q = Vec::with_capacity(tensor.n_slices());
    let mut u = Vec::with_capacity(tensor.n_slices());
    for k in 0..tensor.n_slices() {
        let rows = tensor.rows(k);
        q.push(random_orthonormal(rng, rows, r));
        u.push(uniform(rng, rows, r));
    }
    Ok(FactorSet { entity_ids: tensor.entity_ids(), q, h, u, w, v, f, shape: hyper.shape() })
}

/// [`init_factors`] with a ChaCha8 stream seeded from `hyper.seed`.
pub fn init_factors_seeded(
    tensor: &IrregularTensor,
    static_matrix: &StaticMatrix,
    hyper: &Hyperparams,
) -> Result<FactorSet> {
    init_factors(tensor, static_matrix, hyper, &mut ChaCha8Rng::seed_from_u64(hyper.seed))
}
