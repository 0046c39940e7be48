use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use taste::synthetic::{generate_noisy, SynthConfig};
use taste::{fit, nnls_solve, par, Hyperparams, Mat, NnlsNormalForm};

fn pools() -> [(&'static str, usize); 2] {
    [("sequential", 1), ("parallel", 0)]
}

fn sweeps(c: &mut Criterion) {
    let cfg = SynthConfig { n_slices: 1000, rows: 20, rank: 8, noise_fraction: 0.1, ..SynthConfig::default() };
    let syn = generate_noisy(&cfg).unwrap();
    let hp = Hyperparams { tol: 0.0, max_sweeps: 3, ..Hyperparams::new(8) };
    let mut group = c.benchmark_group("fit_3_sweeps");
    group.sample_size(10);
    for (name, threads) in pools() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| par::with_threads(threads, || fit(&syn.tensor, &syn.static_matrix, &hp, None).unwrap()))
        });
    }
    group.finish();
}

fn wide_nnls(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let r = 8;
    let b = Mat::from_fn(r + 4, r, |_, _| rng.random::<f64>());
    let gram = b.tr_mul(&b) + Mat::identity(r, r) * 0.1;
    let cross = Mat::from_fn(r, 5000, |_, _| rng.random::<f64>() - 0.3);
    let problem = NnlsNormalForm::new(gram, cross).unwrap();
    let tol = problem.default_kkt_tol();
    let mut group = c.benchmark_group("nnls_5000_columns");
    for (name, threads) in pools() {
        group.bench_function(BenchmarkId::from_parameter(name), |bench| {
            bench.iter(|| par::with_threads(threads, || nnls_solve(&problem, tol).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, sweeps, wide_nnls);
criterion_main!(benches);
