use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn taste(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_taste")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> HashMap<String, String> {
    let out = taste(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout)
        .unwrap()
        .lines()
        .filter_map(|l| l.split_once('=').map(|(k, v)| (k.to_string(), v.to_string())))
        .collect()
}

fn code(args: &[&str]) -> i32 {
    taste(args).status.code().unwrap()
}

fn synth(dir: &Path) -> (String, String) {
    let out = dir.join("syn");
    let kv = ok(&["synth", "--out", out.to_str().unwrap(), "--k", "12", "--j", "8", "--p", "5", "--rows", "6", "--rank", "3", "--noise", "0.1", "--seed", "2"]);
    assert_eq!(kv["n_slices"], "12");
    (kv["manifest"].clone(), kv["truth"].clone())
}

fn fit(data: &str, out: &Path, method: &str) -> HashMap<String, String> {
    ok(&["fit", "--data", data, "--rank", "3", "--max-sweeps", "25", "--method", method, "--out", out.to_str().unwrap()])
}

#[test]
fn fit_prints_summary_and_writes_factors() {
    let dir = tempfile::tempdir().unwrap();
    let (data, _) = synth(dir.path());
    for method in ["taste", "copa-plus"] {
        let out = dir.path().join(method);
        let kv = fit(&data, &out, method);
        assert_eq!(kv["method"], method);
        assert_eq!(kv["rank"], "3");
        for key in ["rmse", "cpi", "objective"] {
            assert!(kv[key].parse::<f64>().unwrap().is_finite(), "{key}");
        }
        let sweeps: usize = kv["sweeps"].parse().unwrap();
        assert!((1..=25).contains(&sweeps));
        let log = fs::read_to_string(out.join("sweeps.tsv")).unwrap();
        // header, the initial state, then one row per sweep
        assert_eq!(log.lines().count(), sweeps + 2);
        assert!(log.lines().nth(1).unwrap().starts_with("0\t"));
        assert!(!log.contains("second"));
        for file in ["V.txt", "W.txt", "F.txt", "H.txt", "U.txt", "Q.txt"] {
            assert!(out.join(file).exists(), "{file}");
        }
    }
}

#[test]
fn repeated_runs_write_identical_logs() {
    let dir = tempfile::tempdir().unwrap();
    let (data, _) = synth(dir.path());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    fit(&data, &a, "taste");
    ok(&["fit", "--data", &data, "--rank", "3", "--max-sweeps", "25", "--threads", "2", "--out", b.to_str().unwrap()]);
    for file in ["sweeps.tsv", "V.txt", "W.txt", "U.txt"] {
        assert_eq!(fs::read(a.join(file)).unwrap(), fs::read(b.join(file)).unwrap(), "{file}");
    }
}

#[test]
fn eval_project_and_export_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (data, truth) = synth(dir.path());
    let model = dir.path().join("model");
    fit(&data, &model, "taste");
    let m = model.to_str().unwrap();

    let kv = ok(&["eval", "--data", &data, "--factors", m, "--truth", &truth]);
    for key in ["rmse", "cpi", "sim_v", "sim_f", "sim_w", "sim_avg", "diss_v"] {
        assert!(kv[key].parse::<f64>().unwrap().is_finite(), "{key}");
    }
    assert!(!ok(&["eval", "--data", &data, "--factors", m]).contains_key("sim_v"));
    let on_truth = ok(&["eval", "--data", &data, "--factors", &truth, "--truth", &truth]);
    assert!((on_truth["sim_avg"].parse::<f64>().unwrap() - 1.0).abs() < 1e-12);

    let scores = dir.path().join("scores.csv");
    let kv = ok(&["project", "--data", &data, "--factors", m, "--out", scores.to_str().unwrap(), "--max-sweeps", "30"]);
    assert_eq!(kv["entities"], "12");
    let text = fs::read_to_string(&scores).unwrap();
    assert_eq!(text.lines().count(), 13);
    assert!(text.starts_with("entity_id,"));

    let table = dir.path().join("features.csv");
    let kv = ok(&["export-features", "--factors", m, "--out", table.to_str().unwrap()]);
    assert_eq!(kv["entities"], "12");
    let exported = fs::read_to_string(&table).unwrap();
    assert_eq!(exported.lines().next().unwrap().split(',').count(), 4);
    assert_eq!(exported.lines().count(), 13);
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let (data, _) = synth(dir.path());
    let out = dir.path().join("x");
    let o = out.to_str().unwrap();
    assert_eq!(code(&["fit", "--data", &data, "--rank", "0", "--out", o]), 2);
    assert_eq!(code(&["fit", "--data", "/no/such/dataset", "--rank", "2", "--out", o]), 2);
    assert_eq!(code(&["fit", "--data", &data, "--rank", "2", "--lambda", "-1", "--out", o]), 2);
    assert_eq!(code(&["fit", "--data", &data, "--rank", "7", "--out", o]), 2);
    assert_eq!(code(&["frobnicate"]), 2);
    assert_eq!(code(&["eval", "--data", &data, "--factors", "/no/such/model"]), 2);
}

#[test]
fn projecting_an_empty_dataset_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let (data, _) = synth(dir.path());
    let model = dir.path().join("model");
    fit(&data, &model, "taste");
    let empty = dir.path().join("empty");
    fs::create_dir_all(&empty).unwrap();
    let header = fs::read_to_string(dir.path().join("syn/data/static.csv")).unwrap().lines().next().unwrap().to_string();
    fs::write(empty.join("static.csv"), header + "\n").unwrap();
    fs::write(empty.join("manifest.json"), r#"{"n_features":8,"n_static":5,"static_table":"static.csv","slices":[]}"#).unwrap();
    let status = code(&["project", "--data", empty.to_str().unwrap(), "--factors", model.to_str().unwrap(), "--out", dir.path().join("s.csv").to_str().unwrap()]);
    assert_eq!(status, 2);
}
