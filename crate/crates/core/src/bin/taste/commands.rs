use std::time::Instant;

use taste::baseline::fit_copa_plus;
use taste::data::io::{load_dataset, load_factors, save_dataset, save_factors, write_score_table};
use taste::metrics::{cpi, factor_similarity, rmse, rmse_unweighted, stability_dissimilarity};
use taste::projection::project as project_entities;
use taste::synthetic::{generate_noisy, SynthConfig};
use taste::{fit as fit_factors, objective, par, Hyperparams};

use crate::{EvalArgs, ExportArgs, Failure, FitArgs, Method, ProjectArgs, SynthArgs};

type CmdResult = Result<(), Failure>;

const SWEEP_LOG: &str = "sweeps.tsv";

fn fmt(v: f64) -> String {
    format!("{v:.10e}")
}

pub fn fit(a: FitArgs) -> CmdResult {
    let (tensor, static_matrix) = load_dataset(&a.data)?;
    let rank = a.rank;
    let hyper = Hyperparams {
        rank,
        lambda: a.lambda,
        mu: a.mu,
        tol: a.tol,
        max_sweeps: a.max_sweeps,
        seed: a.seed,
    };
    hyper.validate(&tensor)?;

    let start = Instant::now();
    let (factors, report) = par::with_threads(a.threads.threads, || match a.method {
        Method::Taste => fit_factors(&tensor, &static_matrix, &hyper, None),
        Method::CopaPlus => fit_copa_plus(&tensor, &static_matrix, &hyper, None),
    })?;
    let seconds = start.elapsed().as_secs_f64();

    save_factors(&factors, &a.out)?;
    report.save_sweep_log(&a.out.join(SWEEP_LOG))?;

    let last = report.last();
    let method = match a.method {
        Method::Taste => "taste",
        Method::CopaPlus => "copa-plus",
    };
    println!("method={method}");
    println!("rank={rank}");
    println!("objective={}", fmt(last.objective));
    println!("rmse={}", fmt(last.rmse));
    println!("rmse_unweighted={}", fmt(rmse_unweighted(&tensor, &static_matrix, &factors)?));
    println!("cpi={}", fmt(last.cpi));
    println!("sweeps={}", report.sweeps());
    println!("termination={}", report.termination);
    println!("ridge_warnings={}", report.ridge_warnings);
    println!("rank_warnings={}", report.rank_warnings);
    println!("seconds={seconds:.3}");
    Ok(())
}

pub fn synth(a: SynthArgs) -> CmdResult {
    let config = SynthConfig {
        n_slices: a.k,
        n_features: a.j,
        n_static: a.p,
        rows: a.rows,
        rank: a.rank,
        noise_fraction: a.noise,
        noise_sigma: a.sigma,
        seed: a.seed,
    };
    let syn = generate_noisy(&config)?;
    let manifest = save_dataset(&syn.tensor, &syn.static_matrix, a.out.join("data"))?;
    save_factors(&syn.truth, a.out.join("truth"))?;
    println!("manifest={}", manifest.display());
    println!("truth={}", a.out.join("truth").display());
    println!("n_slices={}", syn.tensor.n_slices());
    println!("nnz={}", syn.tensor.slices().iter().map(|s| s.data.nnz()).sum::<usize>());
    Ok(())
}

pub fn project(a: ProjectArgs) -> CmdResult {
    let (tensor, static_matrix) = load_dataset(&a.data)?;
    let trained = load_factors(&a.factors)?;
    let hyper = Hyperparams {
        rank: trained.rank(),
        lambda: a.lambda.unwrap_or(trained.shape.lambda),
        mu: a.mu.unwrap_or(trained.shape.mu),
        tol: a.tol,
        max_sweeps: a.max_sweeps,
        seed: a.seed,
    };
    let projected = par::with_threads(a.threads.threads, || project_entities(&tensor, &static_matrix, &trained, &hyper))?;
    write_score_table(&a.out, &projected.entity_ids, &projected.w)?;
    let last = projected.report.last();
    println!("entities={}", projected.entity_ids.len());
    println!("objective={}", fmt(last.objective));
    println!("rmse={}", fmt(last.rmse));
    println!("cpi={}", fmt(last.cpi));
    println!("sweeps={}", projected.report.sweeps());
    println!("termination={}", projected.report.termination);
    Ok(())
}

pub fn eval(a: EvalArgs) -> CmdResult {
    let (tensor, static_matrix) = load_dataset(&a.data)?;
    let factors = load_factors(&a.factors)?;
    factors.check_against(&tensor, &static_matrix)?;
    let (lambda, mu) = (factors.shape.lambda, factors.shape.mu);
    println!("rank={}", factors.rank());
    println!("lambda={lambda}");
    println!("mu={mu}");
    let hyper = Hyperparams { lambda, mu, ..Hyperparams::new(factors.rank()) };
    println!("objective={}", fmt(objective(&tensor, &static_matrix, &factors, &hyper)?));
    println!("rmse={}", fmt(rmse(&tensor, &static_matrix, &factors, lambda)?));
    println!("rmse_unweighted={}", fmt(rmse_unweighted(&tensor, &static_matrix, &factors)?));
    println!("cpi={}", fmt(cpi(&factors)?));
    if let Some(truth_dir) = &a.truth {
        let truth = load_factors(truth_dir)?;
        if truth.rank() != factors.rank() || truth.n_slices() != factors.n_slices() {
            return Err(Failure::Usage("truth and estimate differ in rank or entity count".into()));
        }
        let sim_v = factor_similarity(&truth.v, &factors.v)?;
        let sim_f = factor_similarity(&truth.f, &factors.f)?;
        let sim_w = factor_similarity(&truth.w, &factors.w)?;
        println!("sim_v={}", fmt(sim_v));
        println!("sim_f={}", fmt(sim_f));
        println!("sim_w={}", fmt(sim_w));
        println!("sim_avg={}", fmt((sim_v + sim_f + sim_w) / 3.0));
        println!("diss_v={}", fmt(stability_dissimilarity(&truth.v, &factors.v)?));
    }
    Ok(())
}

pub fn export_features(a: ExportArgs) -> CmdResult {
    let factors = load_factors(&a.factors)?;
    write_score_table(&a.out, &factors.entity_ids, &factors.w)?;
    println!("entities={}", factors.n_slices());
    println!("out={}", a.out.display());
    Ok(())
}
