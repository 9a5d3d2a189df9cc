//! Artifact files: directory lock, CSV matrices, JSON reports, traces.

use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use scorepost::ChainTrace;

use crate::error::{CliError, StageExt};

const LOCK_NAME: &str = ".lock";

/// Exclusive claim on an output directory, released on drop.
#[derive(Debug)]
pub struct DirLock {
    path: PathBuf,
}

impl DirLock {
    pub fn acquire(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).stage("output")?;
        let path = dir.join(LOCK_NAME);
        let mut f = OpenOptions::new().write(true).create_new(true).open(&path).map_err(|e| {
            CliError::runtime(
                "output",
                format!("cannot lock {} ({e}); another run may be writing there", dir.display()),
            )
        })?;
        writeln!(f, "{}", std::process::id()).stage("output")?;
        Ok(Self { path })
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).stage("output")?;
    text.push('\n');
    fs::write(path, text).stage("output")
}

/// Shortest representation that parses back to the same value.
fn fmt(v: f64) -> String {
    format!("{v:?}")
}

pub fn write_matrix_csv(path: &Path, header: &[String], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).stage("output")?;
    w.write_record(header).stage("output")?;
    for r in rows {
        w.write_record(r.into_iter().map(fmt)).stage("output")?;
    }
    w.flush().stage("output")
}

pub fn column_names(prefix: &str, d: usize) -> Vec<String> {
    (1..=d).map(|k| format!("{prefix}{k}")).collect()
}

/// Retained samples with their log target and acceptance flag.
pub fn write_trace_csv(path: &Path, trace: &ChainTrace) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).stage("output")?;
    let mut header = trace.param_names.clone();
    header.extend(["log_target".to_string(), "accepted".to_string()]);
    w.write_record(&header).stage("output")?;
    for ((s, lt), acc) in trace.samples.iter().zip(&trace.sample_log_target).zip(&trace.sample_accepted) {
        let mut rec: Vec<String> = s.iter().map(|&v| fmt(v)).collect();
        rec.push(fmt(*lt));
        rec.push(if *acc { "1" } else { "0" }.to_string());
        w.write_record(&rec).stage("output")?;
    }
    w.flush().stage("output")
}

/// Read a trace written by [`write_trace_csv`]. Counters other than the
/// retained-sample acceptance flags are not stored and come back empty.
pub fn read_trace_csv(path: &Path, expected_params: usize) -> Result<ChainTrace, CliError> {
    let mut r = csv::Reader::from_path(path).stage("input")?;
    let header = r.headers().stage("input")?.clone();
    if header.len() != expected_params + 2 {
        return Err(CliError::validation(format!(
            "{}: expected {} parameter columns, found {}",
            path.display(),
            expected_params,
            header.len().saturating_sub(2)
        )));
    }
    let mut samples = Vec::new();
    let mut log_target = Vec::new();
    let mut accepted = Vec::new();
    for rec in r.records() {
        let rec = rec.stage("input")?;
        let vals = rec
            .iter()
            .map(|f| f.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
        samples.push(vals[..expected_params].to_vec());
        log_target.push(vals[expected_params]);
        accepted.push(vals[expected_params + 1] != 0.0);
    }
    let n_acc = accepted.iter().filter(|&&a| a).count();
    Ok(ChainTrace {
        param_names: header.iter().take(expected_params).map(str::to_string).collect(),
        proposed: samples.len(),
        accepted: n_acc,
        samples,
        sample_log_target: log_target,
        sample_accepted: accepted,
        per_step_scores: vec![],
        per_step_log_target: vec![],
        per_step_accepted: vec![],
        initial_theta: vec![],
        initial_seeds: vec![],
    })
}

/// Observations from CSV, one per row; every row must have `d` columns.
pub fn read_observations_csv(path: &Path, header: bool, d: usize) -> Result<Vec<Vec<f64>>, CliError> {
    let file = File::open(path).map_err(|e| CliError::validation(format!("data.csv {}: {e}", path.display())))?;
    let mut r = csv::ReaderBuilder::new().has_headers(header).flexible(true).from_reader(file);
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| CliError::validation(format!("data.csv: {e}")))?;
        if rec.len() != d {
            return Err(CliError::validation(format!(
                "data.csv row {}: expected {d} columns for this model, found {}",
                i + 1,
                rec.len()
            )));
        }
        let row = rec
            .iter()
            .map(|f| f.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::validation(format!("data.csv row {}: {e}", i + 1)))?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::validation("data.csv contains no observations"));
    }
    Ok(rows)
}
