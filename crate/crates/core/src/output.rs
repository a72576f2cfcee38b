//! Plain-file outputs: JSONL checkpoints, CSV tables, JSON reports and the
//! run manifest. Nothing here records wall-clock time, so identical inputs
//! give byte-identical files.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::simulator::{derive_seed, Ensemble, EnsembleConfig, RunRecord};
use crate::stats::{mean_and_se, TestReport};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash of the simulation parameters and checkpoint times.
pub fn params_hash(config: &EnsembleConfig) -> Result<String> {
    let v = serde_json::json!({
        "params": &config.params,
        "checkpoint_times": &config.checkpoint_times,
    });
    Ok(sha256_hex(serde_json::to_string(&v)?.as_bytes()))
}

#[derive(Serialize)]
struct CheckpointLine<'a> {
    replicate: u64,
    seed: u64,
    params_hash: &'a str,
    survived: bool,
    aborted: &'a Option<crate::simulator::AbortMarker>,
    checkpoints: &'a [crate::simulator::Checkpoint],
}

/// One JSON object per replicate.
pub fn write_checkpoints_jsonl(path: &Path, records: &[RunRecord], hash: &str) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for r in records {
        let line = CheckpointLine {
            replicate: r.replicate,
            seed: r.seed,
            params_hash: hash,
            survived: r.survived,
            aborted: &r.aborted,
            checkpoints: &r.checkpoints,
        };
        serde_json::to_writer(&mut w, &line)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Config(format!("csv: {other:?}")),
    }
}

/// Columns `t, functional, mean, se, n_surviving` over usable runs.
pub fn write_summary_csv(path: &Path, ensemble: &Ensemble, config: &EnsembleConfig) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    w.write_record(["t", "functional", "mean", "se", "n_surviving"])
        .map_err(csv_error)?;
    let runs: Vec<&RunRecord> = ensemble.usable().collect();
    let basis = config.params.basis();
    for (c, t) in config.checkpoint_times.iter().enumerate() {
        let mut columns: Vec<(String, Vec<f64>)> = vec![(
            "mass".into(),
            runs.iter().map(|r| r.checkpoints[c].total_mass).collect(),
        )];
        for (k, p) in basis.iter().enumerate() {
            columns.push((
                format!("phi{p}"),
                runs.iter().map(|r| r.checkpoints[c].values[k]).collect(),
            ));
        }
        for (name, v) in columns {
            let (m, se) = if v.is_empty() {
                (f64::NAN, f64::NAN)
            } else {
                mean_and_se(&v)?
            };
            w.write_record([
                t.to_string(),
                name,
                m.to_string(),
                se.to_string(),
                runs.len().to_string(),
            ])
            .map_err(csv_error)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Deserialize)]
struct OwnedCheckpointLine {
    replicate: u64,
    seed: u64,
    params_hash: String,
    survived: bool,
    aborted: Option<crate::simulator::AbortMarker>,
    checkpoints: Vec<crate::simulator::Checkpoint>,
}

/// Reads an ensemble written by [`write_checkpoints_jsonl`], refusing files
/// produced under different parameters or seeds.
pub fn read_checkpoints_jsonl(path: &Path, config: &EnsembleConfig) -> Result<Ensemble> {
    let hash = params_hash(config)?;
    let text = std::fs::read_to_string(path)?;
    let params = std::sync::Arc::new(config.params.clone());
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let l: OwnedCheckpointLine = serde_json::from_str(line)?;
        let expected_seed = derive_seed(config.master_seed, i as u64);
        if l.params_hash != hash || l.replicate != i as u64 || l.seed != expected_seed {
            return Err(Error::precondition(
                "output",
                "read_checkpoints_jsonl",
                format!(
                    "{} line {} was produced by a different configuration or seed",
                    path.display(),
                    i + 1
                ),
            ));
        }
        records.push(RunRecord {
            replicate: l.replicate,
            seed: l.seed,
            params: std::sync::Arc::clone(&params),
            checkpoint_times: config.checkpoint_times.clone(),
            checkpoints: l.checkpoints,
            survived: l.survived,
            aborted: l.aborted,
        });
    }
    if records.len() as u64 != config.replicates {
        return Err(Error::precondition(
            "output",
            "read_checkpoints_jsonl",
            format!(
                "{} holds {} replicates, the configuration asks for {}",
                path.display(),
                records.len(),
                config.replicates
            ),
        ));
    }
    Ensemble::from_records(records, &config.params)
}

/// Writes rows of numbers under a header.
pub fn write_table_csv(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    w.write_record(header).map_err(csv_error)?;
    for r in rows {
        w.write_record(r.iter().map(|v| v.to_string()))
            .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// `(θ, Re cf, Im cf)` rows.
pub fn write_cf_csv(path: &Path, thetas: &[f64], values: &[Complex64]) -> Result<()> {
    let rows: Vec<Vec<f64>> = thetas
        .iter()
        .zip(values)
        .map(|(t, v)| vec![*t, v.re, v.im])
        .collect();
    write_table_csv(path, &["theta", "re_cf", "im_cf"], &rows)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// One row per report: name, observed, tolerance, n, se, bias allowance,
/// pass flag.
pub fn write_report_csv(path: &Path, reports: &[TestReport]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    w.write_record([
        "name",
        "observed",
        "tolerance",
        "n",
        "se",
        "bias_allowance",
        "passed",
    ])
    .map_err(csv_error)?;
    for r in reports {
        w.write_record([
            r.name.clone(),
            r.observed.to_string(),
            r.tolerance.to_string(),
            r.n.to_string(),
            r.se.to_string(),
            r.bias_allowance.to_string(),
            r.passed.to_string(),
        ])
        .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_reports(path: &Path, reports: &[TestReport]) -> Result<()> {
    write_json(path, &reports)
}

pub fn read_reports(path: &Path) -> Result<Vec<TestReport>> {
    let s = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&s)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedEntry {
    pub replicate: u64,
    pub seed: u64,
}

/// Everything needed to reproduce a run, plus an index of the files written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config_hash: String,
    pub params_hash: String,
    pub master_seed: u64,
    pub seed_scheme: String,
    pub seeds: Vec<SeedEntry>,
    pub replicates: u64,
    pub survival_fraction: f64,
    pub superprocess_survival: f64,
    pub particle_survival: f64,
    pub aborted_replicates: Vec<u64>,
    /// File name → SHA-256 of its contents.
    pub files: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(config_text: &str, config: &EnsembleConfig, ensemble: &Ensemble) -> Result<Self> {
        Ok(RunManifest {
            tool_version: TOOL_VERSION.to_string(),
            config_hash: sha256_hex(config_text.as_bytes()),
            params_hash: params_hash(config)?,
            master_seed: config.master_seed,
            seed_scheme: "splitmix64(master + (i+1)*0x9E3779B97F4A7C15) seeding ChaCha8".into(),
            seeds: (0..config.replicates)
                .map(|i| SeedEntry {
                    replicate: i,
                    seed: derive_seed(config.master_seed, i),
                })
                .collect(),
            replicates: config.replicates,
            survival_fraction: ensemble.survival_fraction,
            superprocess_survival: ensemble.superprocess_survival,
            particle_survival: ensemble.particle_survival,
            aborted_replicates: ensemble.aborted.clone(),
            files: BTreeMap::new(),
        })
    }

    /// Records the hash of a file already written inside `dir`.
    pub fn index_file(&mut self, dir: &Path, name: &str) -> Result<()> {
        let bytes = std::fs::read(dir.join(name))?;
        self.files.insert(name.to_string(), sha256_hex(&bytes));
        Ok(())
    }
}
