use std::fs;
use std::path::Path;
use std::process::Command;

use opwls_cli::config::SamplingKind;
use opwls_cli::{resolve, run, ExperimentConfig, Overrides, RunStatus};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_opwls"))
}

fn csv_rows(path: &Path) -> Vec<csv::StringRecord> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(Result::unwrap).collect()
}

fn header(path: &Path) -> Vec<String> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.headers().unwrap().iter().map(str::to_string).collect()
}

fn config(text: &str, out: &Path) -> ExperimentConfig {
    let overrides = Overrides {
        out: Some(out.to_path_buf()),
        ..Overrides::default()
    };
    resolve(None, Some(text), &overrides).unwrap()
}

#[test]
fn poisson2d_sweep_has_one_row_per_trial_size_and_sampler() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("p2d");
    let cfg = config(
        r#"{
            "experiment": "poisson2d",
            "measure": { "alpha_rule": { "exponent": 3.0 }, "d_in": 23 },
            "sizes": [100, 300, 500],
            "d_out": 4,
            "trials": 3,
            "sample_rule": { "type": "multiple", "factor": 2.0 },
            "test_samples": 50,
            "save_datasets": false
        }"#,
        &out,
    );
    assert!(matches!(run(&cfg).unwrap(), RunStatus::Completed { .. }));
    let rows = csv_rows(&out.join("results.csv"));
    assert_eq!(rows.len(), 18);
    let h = header(&out.join("results.csv"));
    for col in ["N_eff", "sampling", "cond_G", "gap", "test_error", "config_hash"] {
        assert!(h.iter().any(|c| c == col), "missing column {col}");
    }
    let hash = cfg.content_hash();
    assert!(rows.iter().all(|r| r.get(h.len() - 1) == Some(hash.as_str())));
    for n in ["100", "300", "500"] {
        for s in ["optimal", "monte_carlo"] {
            assert_eq!(rows.iter().filter(|r| &r[0] == n && &r[1] == s).count(), 3);
        }
    }
    assert_eq!(csv_rows(&out.join("gram.csv")).len(), 18);
    assert!(out.join("manifest.json").exists());
    assert_eq!(fs::read_dir(out.join("coeffs")).unwrap().count(), 6);
    assert!(!out.join("dataset").exists());
}

#[test]
fn unknown_experiment_fails_without_writing() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = tmp.path().join("bad.json");
    fs::write(&cfg_path, r#"{"experiment": "navier_stokes"}"#).unwrap();
    let out = tmp.path().join("never");
    let o = bin()
        .args(["run", cfg_path.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!o.status.success());
    let record: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(record["error"], "validation");
    assert!(!out.exists());
}

#[test]
fn invalid_values_fail_without_writing() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = tmp.path().join("bad.json");
    fs::write(&cfg_path, r#"{"experiment": "poisson2d", "sizes": [4], "delta": 1.5}"#).unwrap();
    let out = tmp.path().join("never");
    let o = bin()
        .args(["run", cfg_path.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!o.status.success());
    assert!(!out.exists());
}

const SMALL: &str = r#"{
    "experiment": "poisson2d",
    "measure": { "alpha_rule": { "exponent": 3.0 }, "d_in": 4 },
    "sizes": [8, 16],
    "trials": 2,
    "test_samples": 40,
    "seed": 11
}"#;

fn files_except_manifest(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().unwrap() != "manifest.json" {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.push((rel, fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn identical_configs_give_identical_files() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = tmp.path().join("small.json");
    fs::write(&cfg_path, SMALL).unwrap();
    let dirs = [tmp.path().join("a"), tmp.path().join("b")];
    for d in &dirs {
        let o = bin()
            .args(["run", cfg_path.to_str().unwrap(), "--out", d.to_str().unwrap()])
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let (a, b) = (files_except_manifest(&dirs[0]), files_except_manifest(&dirs[1]));
    assert!(a.iter().any(|(n, _)| n.starts_with("dataset")));
    assert_eq!(a, b);

    // a rerun into the same directory is recognised and skipped
    let o = bin()
        .args(["run", cfg_path.to_str().unwrap(), "--out", dirs[0].to_str().unwrap()])
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("up to date"));
}

#[test]
fn different_config_in_same_directory_is_refused() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("r");
    run(&config(SMALL, &out)).unwrap();
    let mut other = config(SMALL, &out);
    other.seed = 12;
    assert!(run(&other).is_err());
}

#[test]
fn cached_datasets_are_reused_bit_for_bit() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("c");
    let mut cfg = config(SMALL, &out);
    cfg.cache_datasets = true;
    run(&cfg).unwrap();
    let first = fs::read(out.join("results.csv")).unwrap();

    // changing only the test set size keeps every training dataset
    let mut more = cfg.clone();
    more.test_samples = 41;
    let keys_before: Vec<_> = fs::read_dir(out.join("dataset")).unwrap().map(|e| e.unwrap().file_name()).collect();
    run(&more).unwrap();
    let keys_after: Vec<_> = fs::read_dir(out.join("dataset")).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(keys_before.len(), keys_after.len());

    // rerunning the original config from the cache reproduces the table
    fs::remove_file(out.join("manifest.json")).unwrap();
    run(&cfg).unwrap();
    assert_eq!(fs::read(out.join("results.csv")).unwrap(), first);
}

#[test]
fn dataset_sidecar_records_checksum() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("d");
    run(&config(SMALL, &out)).unwrap();
    let mut checked = 0;
    for e in fs::read_dir(out.join("dataset")).unwrap() {
        let p = e.unwrap().path();
        if p.extension().unwrap() == "json" {
            let side: serde_json::Value = serde_json::from_str(&fs::read_to_string(&p).unwrap()).unwrap();
            let bytes = fs::read(p.with_extension("csv")).unwrap();
            assert_eq!(side["sha256"], opwls_cli::output::sha256_hex(&bytes));
            checked += 1;
        }
    }
    assert_eq!(checked, 2 * 2 * 2);
}

#[test]
fn flags_override_file_and_preset() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = tmp.path().join("patch.json");
    fs::write(&cfg_path, r#"{"sizes": [8], "test_samples": 20, "measure": {"d_in": 4}}"#).unwrap();
    let out = tmp.path().join("o");
    let o = bin()
        .args([
            "run",
            cfg_path.to_str().unwrap(),
            "--preset",
            "poisson2d-desk",
            "--out",
            out.to_str().unwrap(),
            "--trials",
            "2",
            "--seed",
            "5",
            "--sampling",
            "monte-carlo",
        ])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&out.join("results.csv"));
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| &r[1] == "monte_carlo"));
    let saved: ExperimentConfig = serde_json::from_str(&fs::read_to_string(out.join("config.json")).unwrap()).unwrap();
    assert_eq!(saved.seed, 5);
    assert_eq!(saved.sampling, vec![SamplingKind::MonteCarlo]);
}

#[test]
fn burgers_rows_follow_the_radius_sweep() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("b");
    let cfg = config(
        r#"{
            "experiment": "burgers",
            "sampling": ["optimal"],
            "measure": { "d_in": 3 },
            "d_out": 4,
            "index_set": { "kind": { "type": "hyperbolic_cross" }, "radii": [2.0, 4.0] },
            "sample_rule": { "type": "n_log_n" },
            "solver": { "nu": 0.1, "dt": 0.001 },
            "test_samples": 20
        }"#,
        &out,
    );
    run(&cfg).unwrap();
    let rows = csv_rows(&out.join("results.csv"));
    let h = header(&out.join("results.csv"));
    assert_eq!(rows.len(), 2);
    assert_eq!(&rows[0][3], "k=2");
    assert_eq!(&rows[1][3], "k=4");
    let n: Vec<usize> = rows.iter().map(|r| r[0].parse().unwrap()).collect();
    assert!(n[0] < n[1]);
    let err = h.iter().position(|c| c == "test_error").unwrap();
    let trunc = h.iter().position(|c| c == "truncation_error").unwrap();
    for r in &rows {
        let (e, t): (f64, f64) = (r[err].parse().unwrap(), r[trunc].parse().unwrap());
        // the output truncation bounds the full error from below
        assert!(e >= t - 1e-12);
    }
}

#[test]
fn every_float_keeps_twelve_significant_digits() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("f");
    run(&config(SMALL, &out)).unwrap();
    let rows = csv_rows(&out.join("results.csv"));
    let cond = &rows[0][5];
    let mantissa = cond.split('e').next().unwrap().replace(['.', '-'], "");
    assert!(mantissa.len() >= 12, "{cond}");
}

#[test]
fn missing_config_and_preset_is_an_error() {
    let o = bin().args(["run"]).output().unwrap();
    assert!(!o.status.success());
}
