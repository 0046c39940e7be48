//! Ground-truth data generator and noise injection.
//!
//! Truth factors `H, V, W, F` are uniform on `(0, 1)`; each `Q_k` is a 0/1
//! matrix whose columns are distinct standard basis vectors, so
//! `Q_kᵀ Q_k = I` and `U_k = Q_k H` is nonnegative. Inputs are the exact
//! products `X_k = U_k diag(W(k,:)) Vᵀ` and `A = W Fᵀ`.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::{FactorSet, IrregularTensor, ModelShape, Slice, SparseSlice, StaticMatrix};
use crate::linalg::reconstruct;
use crate::solver::uniform;
use crate::{Error, Mat, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub n_slices: usize,
    pub n_features: usize,
    pub n_static: usize,
    /// Rows per slice (`I_k`, the same for every entity).
    pub rows: usize,
    pub rank: usize,
    /// Share of entries that receive noise, in `[0, 1]`.
    pub noise_fraction: f64,
    /// Standard deviation of the additive Gaussian noise.
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    /// `K=100, J=30, P=20, I_k=100, R=4`, noiseless.
    fn default() -> Self {
        Self {
            n_slices: 100,
            n_features: 30,
            n_static: 20,
            rows: 100,
            rank: 4,
            noise_fraction: 0.0,
            noise_sigma: 1.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_slices == 0 || self.n_features == 0 || self.n_static == 0 || self.rows == 0 || self.rank == 0 {
            return Err(Error::Invalid("all synthetic dimensions must be positive".into()));
        }
        if self.rank > self.rows || self.rank > self.n_features {
            return Err(Error::Invalid(format!(
                "rank {} exceeds min(rows {}, features {})",
                self.rank, self.rows, self.n_features
            )));
        }
        if !(0.0..=1.0).contains(&self.noise_fraction) {
            return Err(Error::Invalid(format!("noise fraction {} outside [0, 1]", self.noise_fraction)));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::Invalid(format!("noise sigma {} must be finite and >= 0", self.noise_sigma)));
        }
        Ok(())
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

/// Synthetic dataset plus the factors that generated it.
#[derive(Debug, Clone)]
pub struct Synthetic {
    pub tensor: IrregularTensor,
    pub static_matrix: StaticMatrix,
    pub truth: FactorSet,
}

pub fn entity_id(k: usize) -> String {
    format!("e{k:05}")
}

/// 0/1 matrix with orthonormal columns: column `c` is `e_{rows[c]}`.
fn indicator_columns(n_rows: usize, rows: &[usize]) -> Mat {
    let mut q = Mat::zeros(n_rows, rows.len());
    for (c, &i) in rows.iter().enumerate() {
        q[(i, c)] = 1.0;
    }
    q
}

/// Noiseless ground-truth dataset (noise settings in `config` are ignored;
/// see [`add_noise`] and [`generate_noisy`]).
pub fn generate(config: &SynthConfig, rng: &mut impl Rng) -> Result<Synthetic> {
    config.validate()?;
    let r = config.rank;
    let h = uniform(rng, r, r);
    let v = uniform(rng, config.n_features, r);
    let w = uniform(rng, config.n_slices, r);
    let f = uniform(rng, config.n_static, r);

    let mut q = Vec::with_capacity(config.n_slices);
    let mut u = Vec::with_capacity(config.n_slices);
    let mut slices = Vec::with_capacity(config.n_slices);
    for k in 0..config.n_slices {
        let picked = index::sample(rng, config.rows, r).into_vec();
        let qk = indicator_columns(config.rows, &picked);
        let uk = &qk * &h;
        let s: Vec<f64> = w.row(k).iter().cloned().collect();
        let data = SparseSlice::from_dense(&reconstruct(&uk, &s, &v))?;
        slices.push(Slice { entity_id: entity_id(k), data });
        q.push(qk);
        u.push(uk);
    }
    let ids: Vec<String> = (0..config.n_slices).map(entity_id).collect();
    let tensor = IrregularTensor::new(slices, config.n_features)?;
    let static_matrix = StaticMatrix::with_default_names(ids.clone(), &w * f.transpose())?;
    let truth = FactorSet { entity_ids: ids, q, h, u, w, v, f, shape: ModelShape { rank: r, lambda: 0.0, mu: 0.0 } };
    Ok(Synthetic { tensor, static_matrix, truth })
}

/// [`generate`] followed by [`add_noise`] with the config's noise settings,
/// all drawn from one ChaCha8 stream seeded by `config.seed`.
pub fn generate_noisy(config: &SynthConfig) -> Result<Synthetic> {
    let mut rng = config.rng();
    let mut syn = generate(config, &mut rng)?;
    if config.noise_fraction > 0.0 {
        let (t, a) = add_noise(&syn.tensor, &syn.static_matrix, config.noise_fraction, config.noise_sigma, &mut rng)?;
        syn.tensor = t;
        syn.static_matrix = a;
    }
    Ok(syn)
}

fn perturb(m: &mut Mat, fraction: f64, sigma: f64, rng: &mut impl Rng) {
    let (rows, cols) = m.shape();
    let n = rows * cols;
    let count = ((fraction * n as f64).floor() as usize).min(n);
    for idx in index::sample(rng, n, count).into_iter() {
        // row-major position on the dense grid
        let (i, j) = (idx / cols, idx % cols);
        let z: f64 = rng.sample(StandardNormal);
        let noisy = m[(i, j)] + sigma * z;
        m[(i, j)] = if noisy > 0.0 { noisy } else { 0.0 };
    }
}

/// Adds `N(0, σ²)` noise to exactly `⌊fraction · n⌋` randomly drawn cells of
/// every slice (over its full dense grid) and of the static matrix, then
/// clamps negatives to zero. Untouched cells are left bit-identical.
pub fn add_noise(
    tensor: &IrregularTensor,
    static_matrix: &StaticMatrix,
    fraction: f64,
    sigma: f64,
    rng: &mut impl Rng,
) -> Result<(IrregularTensor, StaticMatrix)> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::Invalid(format!("noise fraction {fraction} outside [0, 1]")));
    }
    let mut slices = Vec::with_capacity(tensor.n_slices());
    for s in tensor.slices() {
        let mut dense = s.data.to_dense();
        perturb(&mut dense, fraction, sigma, rng);
        slices.push(Slice { entity_id: s.entity_id.clone(), data: SparseSlice::from_dense(&dense)? });
    }
    let mut a = static_matrix.values().clone();
    perturb(&mut a, fraction, sigma, rng);
    Ok((
        IrregularTensor::new(slices, tensor.n_features())?,
        StaticMatrix::new(static_matrix.entity_ids().to_vec(), static_matrix.feature_names().to_vec(), a)?,
    ))
}

/// Fresh entities drawn from existing truth factors `V`, `F` and `H`, with new
/// indicator `Q_n` and uniform scores `W'`. Returns the data and the true
/// `W'`. Ids continue after `first_id`.
pub fn sample_entities(
    truth: &FactorSet,
    n_entities: usize,
    rows: usize,
    first_id: usize,
    rng: &mut impl Rng,
) -> Result<(IrregularTensor, StaticMatrix, Mat)> {
    let r = truth.rank();
    if rows < r {
        return Err(Error::Invalid(format!("rows {rows} must be at least the rank {r}")));
    }
    let w = uniform(rng, n_entities, r);
    let mut slices = Vec::with_capacity(n_entities);
    for n in 0..n_entities {
        let picked = index::sample(rng, rows, r).into_vec();
        let uk = indicator_columns(rows, &picked) * &truth.h;
        let s: Vec<f64> = w.row(n).iter().cloned().collect();
        let data = SparseSlice::from_dense(&reconstruct(&uk, &s, &truth.v))?;
        slices.push(Slice { entity_id: entity_id(first_id + n), data });
    }
    let ids = (0..n_entities).map(|n| entity_id(first_id + n)).collect();
    let tensor = IrregularTensor::new(slices, truth.v.nrows())?;
    let static_matrix = StaticMatrix::with_default_names(ids, &w * truth.f.transpose())?;
    Ok((tensor, static_matrix, w))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Hyperparams;
    use crate::metrics::cpi;
    use crate::solver::objective;

    fn small() -> SynthConfig {
        SynthConfig { n_slices: 6, n_features: 7, n_static: 5, rows: 9, rank: 3, ..Default::default() }
    }

    #[test]
    fn truth_reproduces_data_exactly() {
        let cfg = small();
        let syn = generate(&cfg, &mut cfg.rng()).unwrap();
        syn.truth.validate().unwrap();
        for (lambda, mu) in [(0.0, 0.0), (0.1, 0.1), (1.0, 10.0)] {
            let hp = Hyperparams { lambda, mu, ..Hyperparams::new(3) };
            assert!(objective(&syn.tensor, &syn.static_matrix, &syn.truth, &hp).unwrap() < 1e-9);
        }
        assert!((cpi(&syn.truth).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn default_size_shapes() {
        let cfg = SynthConfig::default();
        let syn = generate(&cfg, &mut cfg.rng()).unwrap();
        assert_eq!(syn.tensor.n_slices(), 100);
        assert_eq!(syn.tensor.n_features(), 30);
        assert!(syn.tensor.slices().iter().all(|s| s.data.nrows() == 100));
        assert_eq!(syn.static_matrix.values().shape(), (100, 20));
        assert_eq!(syn.truth.v.shape(), (30, 4));
        assert_eq!(syn.truth.h.shape(), (4, 4));
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = small();
        let a = generate(&cfg, &mut cfg.rng()).unwrap();
        let b = generate(&cfg, &mut cfg.rng()).unwrap();
        assert_eq!(a.tensor, b.tensor);
        assert_eq!(a.truth, b.truth);
        assert!(generate(&SynthConfig { rank: 10, ..cfg }, &mut cfg.rng()).is_err());
    }

    #[test]
    fn noise_counts_and_identities() {
        let cfg = SynthConfig { n_slices: 2, n_features: 30, rows: 100, rank: 4, ..small() };
        let syn = generate(&cfg, &mut cfg.rng()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);

        let (t0, a0) = add_noise(&syn.tensor, &syn.static_matrix, 0.0, 1.0, &mut rng).unwrap();
        assert_eq!(t0, syn.tensor);
        assert_eq!(a0, syn.static_matrix);
        let (t1, a1) = add_noise(&syn.tensor, &syn.static_matrix, 1.0, 0.0, &mut rng).unwrap();
        assert_eq!(t1, syn.tensor);
        assert_eq!(a1, syn.static_matrix);

        // with a huge positive offset no noisy cell is clamped, so the changed
        // cells are exactly the perturbed ones
        let mut dense = syn.tensor.slice(0).to_dense();
        let before = dense.clone();
        perturb(&mut dense, 0.25, 1e-3, &mut rng);
        let changed = dense.iter().zip(before.iter()).filter(|(a, b)| a != b).count();
        assert!(changed <= 750);
        let shifted = before.map(|x| x + 10.0);
        let mut d2 = shifted.clone();
        perturb(&mut d2, 0.25, 1.0, &mut rng);
        assert_eq!(d2.iter().zip(shifted.iter()).filter(|(a, b)| a != b).count(), 750);
    }
}
