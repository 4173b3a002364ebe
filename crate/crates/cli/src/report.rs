//! On-disk result formats.
//!
//! `run_report.json` (one per method label):
//!
//! | field        | content                                                         |
//! |--------------|-----------------------------------------------------------------|
//! | `method`     | trainer kind                                                    |
//! | `label`      | label from the experiment spec                                  |
//! | `config`     | trainer configuration echo                                      |
//! | `experiment` | data source, scheme, client count, folds, seed                  |
//! | `output`     | `average` or `final`: which model `model.json` and the table use |
//! | `rounds`     | per round `t`, `mu` or `lambda`, `group_risks`, `client_risks`  |
//! | `models`     | SHA-256 of the final and averaged parameters (little-endian f64) |
//! | `risk_table` | per-group risk/accuracy mean and std, worst/best group          |
//!
//! `summary.csv` has one row per label in spec order. `model.json` holds the
//! selected parameters for `fairfed eval`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use fairfed::data::Scheme;
use fairfed::eval::RiskTable;
use fairfed::federation::{Method, OutputMode, RoundRecord, RunReport, TrainerConfig};
use fairfed::numerics::{ParamVector, Shape};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::spec::DataSource;
use crate::CliResult;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentEcho {
    pub data: DataSource,
    pub scheme: Scheme,
    pub clients: usize,
    pub imbalance_period: usize,
    pub folds: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDigests {
    pub final_sha256: String,
    pub averaged_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReportFile {
    pub method: Method,
    pub label: String,
    pub config: TrainerConfig,
    pub experiment: ExperimentEcho,
    pub output: OutputMode,
    pub rounds: Vec<RoundRecord>,
    pub models: ModelDigests,
    pub risk_table: RiskTable,
}

impl RunReportFile {
    pub fn new(label: &str, report: &RunReport, experiment: ExperimentEcho, risk_table: RiskTable) -> Self {
        Self {
            method: report.method,
            label: label.to_string(),
            config: report.config.clone(),
            experiment,
            output: report.output_mode(),
            rounds: report.rounds.clone(),
            models: ModelDigests {
                final_sha256: digest(&report.final_params),
                averaged_sha256: digest(&report.averaged_params),
            },
            risk_table,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub shape: Shape,
    pub output: OutputMode,
    pub values: Vec<f64>,
}

impl ModelFile {
    pub fn new(params: &ParamVector, output: OutputMode) -> Self {
        Self {
            shape: params.shape().clone(),
            output,
            values: params.values().to_vec(),
        }
    }

    pub fn load(path: &Path) -> CliResult<ParamVector> {
        let text = std::fs::read_to_string(path)?;
        let file: ModelFile = serde_json::from_str(&text)?;
        Ok(ParamVector::from_values(&file.shape, file.values)?)
    }
}

pub fn digest(params: &ParamVector) -> String {
    hex::encode(Sha256::digest(params.to_le_bytes()))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| crate::CliError::Failure(format!("{}: {e}", path.display())))
}

pub fn summary_header(groups: usize) -> String {
    let mut h = String::from(
        "label,method,scheme,output,runs,worst_group,worst_risk_mean,worst_risk_std,best_group,best_risk_mean,best_risk_std",
    );
    for a in 0..groups {
        write!(h, ",group{a}_risk_mean,group{a}_risk_std,group{a}_acc_mean,group{a}_acc_std").unwrap();
    }
    h
}

/// One CSV row; floats use the shortest representation that parses back exactly.
pub fn summary_row(report: &RunReportFile) -> String {
    let t = &report.risk_table;
    let mut row = format!(
        "{},{},{},{},{},{},{},{},{},{},{}",
        report.label,
        report.method,
        scheme_name(report.experiment.scheme),
        output_name(report.output),
        t.runs,
        t.worst_group,
        t.worst_risk.mean,
        t.worst_risk.std,
        t.best_group,
        t.best_risk.mean,
        t.best_risk.std
    );
    for (r, acc) in t.group_risk.iter().zip(&t.group_accuracy) {
        write!(row, ",{},{},{},{}", r.mean, r.std, acc.mean, acc.std).unwrap();
    }
    row
}

pub fn scheme_name(s: Scheme) -> &'static str {
    match s {
        Scheme::Esg => "esg",
        Scheme::Ssg => "ssg",
        Scheme::Psg => "psg",
    }
}

pub fn output_name(o: OutputMode) -> &'static str {
    match o {
        OutputMode::Average => "average",
        OutputMode::Final => "final",
    }
}

/// Paths written for one label.
pub fn label_dir(out: &Path, label: &str) -> PathBuf {
    out.join(label)
}
