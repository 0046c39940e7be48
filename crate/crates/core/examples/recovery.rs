//! Fits the model on noiseless synthetic data and reports how well the
//! generating factors are recovered.
//!
//! ```text
//! cargo run --release --example recovery -- [seed] [noise_fraction] [mu] [tol]
//! ```

use taste::baseline::fit_copa_plus;
use taste::metrics::{cpi, factor_similarity};
use taste::synthetic::{generate_noisy, SynthConfig};
use taste::{fit, Hyperparams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().collect();
    let seed: u64 = args.get(1).map_or(Ok(0), |s| s.parse())?;
    let noise: f64 = args.get(2).map_or(Ok(0.0), |s| s.parse())?;
    let mu: f64 = args.get(3).map_or(Ok(0.1), |s| s.parse())?;
    let tol: f64 = args.get(4).map_or(Ok(1e-4), |s| s.parse())?;
    let cfg = SynthConfig { seed, noise_fraction: noise, ..SynthConfig::default() };
    let syn = generate_noisy(&cfg)?;
    let hp = Hyperparams { rank: 4, lambda: 0.1, mu, tol, seed, ..Hyperparams::default() };

    for (name, (factors, report)) in [
        ("taste", fit(&syn.tensor, &syn.static_matrix, &hp, None)?),
        ("copa-plus", fit_copa_plus(&syn.tensor, &syn.static_matrix, &hp, None)?),
    ] {
        let sim_v = factor_similarity(&syn.truth.v, &factors.v).unwrap_or(f64::NAN);
        let sim_f = factor_similarity(&syn.truth.f, &factors.f).unwrap_or(f64::NAN);
        let sim_w = factor_similarity(&syn.truth.w, &factors.w).unwrap_or(f64::NAN);
        println!(
            "{name}: sweeps={} {} rmse={:.6} cpi={:.6} sim_v={sim_v:.4} sim_f={sim_f:.4} sim_w={sim_w:.4} avg={:.4} seconds={:.2}",
            report.sweeps(),
            report.termination,
            report.last().rmse,
            cpi(&factors)?,
            (sim_v + sim_f + sim_w) / 3.0,
            report.seconds()
        );
    }
    Ok(())
}
