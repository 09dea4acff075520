//! Config resolution and the single writer for a run directory.

use std::path::{Path, PathBuf};

use crate::config::{merge_json, ExperimentConfig, SamplingKind};
use crate::error::CliError;
use crate::experiments::{run_experiment, Context, DatasetStore};
use crate::output::{
    coefficients_csv, dataset_csv, existing_hash, gram_csv, results_csv, RunOutput, RunWriter,
};
use crate::presets;

/// Command-line overrides layered over the file and preset.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub trials: Option<usize>,
    pub sampling: Option<SamplingKind>,
}

/// Preset first, then the config file on top, then flags.
pub fn resolve(
    preset: Option<&str>,
    file_text: Option<&str>,
    overrides: &Overrides,
) -> Result<ExperimentConfig, CliError> {
    let mut value = match preset {
        Some(name) => presets::preset(name).ok_or_else(|| {
            CliError::Validation(format!("unknown preset {name}; known: {}", presets::NAMES.join(", ")))
        })?,
        None => serde_json::Value::Object(Default::default()),
    };
    if let Some(text) = file_text {
        let patch: serde_json::Value =
            serde_json::from_str(text).map_err(|e| CliError::Validation(format!("config: {e}")))?;
        merge_json(&mut value, patch);
    }
    let mut cfg = ExperimentConfig::from_value(value)?;
    if let Some(s) = overrides.seed {
        cfg.seed = s;
    }
    if let Some(t) = overrides.trials {
        cfg.trials = t;
    }
    if let Some(s) = overrides.sampling {
        cfg.sampling = vec![s];
    }
    if let Some(out) = &overrides.out {
        cfg.output_dir = Some(out.to_string_lossy().into_owned());
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn output_dir(cfg: &ExperimentConfig) -> PathBuf {
    match &cfg.output_dir {
        Some(d) => PathBuf::from(d),
        None => PathBuf::from("runs").join(format!(
            "{}-{}",
            serde_json::to_value(cfg.experiment).unwrap().as_str().unwrap(),
            cfg.content_hash()
        )),
    }
}

#[derive(Debug)]
pub enum RunStatus {
    Completed { dir: PathBuf, output: Box<RunOutput> },
    /// Same configuration already present; nothing recomputed.
    UpToDate { dir: PathBuf },
}

/// Runs the experiment and writes its artifacts. Nothing is written unless
/// the whole computation succeeds.
pub fn run(cfg: &ExperimentConfig) -> Result<RunStatus, CliError> {
    cfg.validate()?;
    let hash = cfg.content_hash();
    let dir = output_dir(cfg);
    if let Some(prev) = existing_hash(&dir) {
        if prev == hash && dir.join("results.csv").exists() {
            return Ok(RunStatus::UpToDate { dir });
        }
        // with caching on, a changed config may reuse the datasets already here
        if !cfg.cache_datasets {
            return Err(CliError::Validation(format!(
                "{} holds a run with config hash {prev}; choose another output directory or enable cache_datasets",
                dir.display()
            )));
        }
    }
    let store = if cfg.cache_datasets {
        DatasetStore::cached(&dir.join("dataset"))
    } else {
        DatasetStore::memory()
    };
    let output = run_experiment(&Context { config: cfg, store })?;
    write_run(&dir, cfg, &hash, &output)?;
    Ok(RunStatus::Completed {
        dir,
        output: Box::new(output),
    })
}

pub fn write_run(dir: &Path, cfg: &ExperimentConfig, hash: &str, out: &RunOutput) -> Result<(), CliError> {
    let stale = dir.join("coeffs");
    if stale.exists() {
        std::fs::remove_dir_all(stale)?;
    }
    let mut w = RunWriter::new(dir);
    w.write("config.json", cfg.canonical().to_json().as_bytes())?;
    w.write("results.csv", &results_csv(out, hash)?)?;
    w.write("gram.csv", &gram_csv(out, hash)?)?;
    for table in &out.coefficients {
        w.write(&format!("coeffs/{}.csv", table.name), &coefficients_csv(table, hash)?)?;
    }
    let datasets = if cfg.save_datasets { &out.datasets[..] } else { &[] };
    for (key, data) in datasets {
        let bytes = dataset_csv(data, hash)?;
        let sidecar = serde_json::json!({
            "key": key,
            "provenance": data.provenance,
            "samples": data.len(),
            "sha256": crate::output::sha256_hex(&bytes),
        });
        w.write(&format!("dataset/{key}.csv"), &bytes)?;
        w.write(&format!("dataset/{key}.json"), serde_json::to_string_pretty(&sidecar)?.as_bytes())?;
    }
    w.finish(cfg, hash, out)
}
