//! Result records and their on-disk form.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use opwls::evaluation::ErrorReport;
use opwls::nalgebra::DMatrix;
use opwls::pde_data::DataSet;
use opwls::wls_solver::GramSummary;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{short_hash, ExperimentConfig, SamplingKind};
use crate::error::CliError;

/// Full round-trip precision (17 significant digits).
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// One fitted estimator and how it was obtained.
#[derive(Debug, Clone)]
pub struct FitRecord {
    /// Sweep coordinate, e.g. `k=12` or `N=64`.
    pub label: String,
    pub n_eff: usize,
    pub sampling: SamplingKind,
    pub trial: usize,
    pub m: usize,
    pub gram: GramSummary,
    pub rank: usize,
    pub test: Option<ErrorReport>,
    /// Experiment-specific numeric columns, same names for every row of a run.
    pub extras: Vec<(String, f64)>,
    pub dataset: Option<String>,
}

/// Coefficient matrix with one label per basis function.
#[derive(Debug, Clone)]
pub struct CoefficientTable {
    pub name: String,
    pub rows: Vec<String>,
    pub values: DMatrix<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct RunOutput {
    pub fits: Vec<FitRecord>,
    pub coefficients: Vec<CoefficientTable>,
    pub datasets: Vec<(String, DataSet)>,
    /// Free-form run facts (chosen truncations, energy fractions, timing ratios).
    pub notes: BTreeMap<String, serde_json::Value>,
}

impl RunOutput {
    pub fn note(&mut self, key: &str, value: impl Serialize) {
        self.notes
            .insert(key.to_string(), serde_json::to_value(value).expect("note serializes"));
    }

    pub fn fits_for(&self, sampling: SamplingKind) -> impl Iterator<Item = &FitRecord> {
        self.fits.iter().filter(move |f| f.sampling == sampling)
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

pub fn results_csv(out: &RunOutput, hash: &str) -> Result<Vec<u8>, CliError> {
    let extra_names: Vec<String> = out
        .fits
        .first()
        .map(|f| f.extras.iter().map(|(k, _)| k.clone()).collect())
        .unwrap_or_default();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = [
        "N_eff", "sampling", "trial", "label", "M", "cond_G", "gap", "rank", "test_error",
        "test_error_abs", "test_error_mean_relative", "err_q05", "err_q50", "err_q95",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend(extra_names.iter().cloned());
    header.push("config_hash".into());
    w.write_record(&header)?;
    for f in &out.fits {
        let mut row = vec![
            f.n_eff.to_string(),
            f.sampling.label().to_string(),
            f.trial.to_string(),
            f.label.clone(),
            f.m.to_string(),
            fmt_f64(f.gram.condition),
            fmt_f64(f.gram.spectral_gap),
            f.rank.to_string(),
        ];
        match &f.test {
            Some(t) => {
                row.push(opt(t.relative));
                row.push(fmt_f64(t.absolute));
                row.push(opt(t.mean_relative));
                row.extend(t.quantiles.iter().map(|q| fmt_f64(*q)));
            }
            None => row.extend(std::iter::repeat(String::new()).take(6)),
        }
        for name in &extra_names {
            let v = f.extras.iter().find(|(k, _)| k == name).map(|(_, v)| *v);
            row.push(opt(v));
        }
        row.push(hash.to_string());
        w.write_record(&row)?;
    }
    Ok(w.into_inner().map_err(|e| CliError::Io(e.into_error()))?)
}

pub fn gram_csv(out: &RunOutput, hash: &str) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "N_eff", "sampling", "trial", "label", "M", "block_size", "min_eigenvalue", "max_eigenvalue",
        "gap", "cond_G", "config_hash",
    ])?;
    for f in &out.fits {
        w.write_record([
            f.n_eff.to_string(),
            f.sampling.label().to_string(),
            f.trial.to_string(),
            f.label.clone(),
            f.m.to_string(),
            f.gram.block_size.to_string(),
            fmt_f64(f.gram.min_eigenvalue),
            fmt_f64(f.gram.max_eigenvalue),
            fmt_f64(f.gram.spectral_gap),
            fmt_f64(f.gram.condition),
            hash.to_string(),
        ])?;
    }
    Ok(w.into_inner().map_err(|e| CliError::Io(e.into_error()))?)
}

pub fn coefficients_csv(table: &CoefficientTable, hash: &str) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["lambda".to_string()];
    header.extend((1..=table.values.ncols()).map(|o| format!("out_{o}")));
    header.push("config_hash".into());
    w.write_record(&header)?;
    for (i, label) in table.rows.iter().enumerate() {
        let mut row = vec![label.clone()];
        row.extend(table.values.row(i).iter().map(|v| fmt_f64(*v)));
        row.push(hash.to_string());
        w.write_record(&row)?;
    }
    Ok(w.into_inner().map_err(|e| CliError::Io(e.into_error()))?)
}

/// Inputs, weights and outputs, one sample per row.
pub fn dataset_csv(data: &DataSet, hash: &str) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let d_in = data.inputs.first().map_or(0, Vec::len);
    let d_out = data.outputs.first().map_or(0, Vec::len);
    let mut header: Vec<String> = (1..=d_in).map(|j| format!("f_{j}")).collect();
    header.push("weight".into());
    header.extend((1..=d_out).map(|o| format!("g_{o}")));
    header.push("config_hash".into());
    w.write_record(&header)?;
    for i in 0..data.len() {
        let mut row: Vec<String> = data.inputs[i].iter().map(|v| fmt_f64(*v)).collect();
        row.push(fmt_f64(data.weights[i]));
        row.extend(data.outputs[i].iter().map(|v| fmt_f64(*v)));
        row.push(hash.to_string());
        w.write_record(&row)?;
    }
    Ok(w.into_inner().map_err(|e| CliError::Io(e.into_error()))?)
}

/// Parses what `dataset_csv` wrote, given the recorded provenance.
pub fn read_dataset_csv(bytes: &[u8], d_in: usize, template: &DataSet) -> Result<DataSet, CliError> {
    let mut r = csv::Reader::from_reader(bytes);
    let width = r.headers()?.len();
    if width < d_in + 2 {
        return Err(CliError::Validation("cached dataset has too few columns".into()));
    }
    let d_out = width - d_in - 2;
    let (mut inputs, mut weights, mut outputs) = (Vec::new(), Vec::new(), Vec::new());
    for rec in r.records() {
        let rec = rec?;
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| CliError::Validation(format!("cached dataset value {s}: {e}")))
        };
        let vals: Vec<f64> = rec.iter().take(d_in + 1 + d_out).map(parse).collect::<Result<_, _>>()?;
        inputs.push(vals[..d_in].to_vec());
        weights.push(vals[d_in]);
        outputs.push(vals[d_in + 1..].to_vec());
    }
    Ok(DataSet {
        inputs,
        outputs,
        weights,
        provenance: template.provenance.clone(),
    })
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Key for a dataset: hash of everything that determines its content.
pub fn dataset_key(material: &serde_json::Value) -> String {
    short_hash(serde_json::to_string(material).expect("key serializes").as_bytes())
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    config_hash: &'a str,
    config: &'a ExperimentConfig,
    started_unix: f64,
    finished_unix: f64,
    files: BTreeMap<String, String>,
    notes: &'a BTreeMap<String, serde_json::Value>,
}

fn unix_now() -> f64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

/// Single writer for a run directory. Files other than the manifest are
/// byte-identical for identical configurations.
pub struct RunWriter {
    dir: PathBuf,
    started: f64,
    files: BTreeMap<String, String>,
}

impl RunWriter {
    pub fn new(dir: &Path) -> Self {
        Self {
            dir: dir.to_path_buf(),
            started: unix_now(),
            files: BTreeMap::new(),
        }
    }

    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, bytes)?;
        self.files.insert(rel.to_string(), sha256_hex(bytes));
        Ok(())
    }

    pub fn finish(self, config: &ExperimentConfig, hash: &str, out: &RunOutput) -> Result<(), CliError> {
        let manifest = Manifest {
            config_hash: hash,
            config,
            started_unix: self.started,
            finished_unix: unix_now(),
            files: self.files,
            notes: &out.notes,
        };
        fs::create_dir_all(&self.dir)?;
        fs::write(self.dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
        Ok(())
    }
}

/// Hash recorded by an earlier run in `dir`, if any.
pub fn existing_hash(dir: &Path) -> Option<String> {
    let text = fs::read_to_string(dir.join("manifest.json")).ok()?;
    let v: serde_json::Value = serde_json::from_str(&text).ok()?;
    v.get("config_hash")?.as_str().map(str::to_string)
}
