//! Run configuration: command-line flags layered over an optional JSON file.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, ValueEnum};
use gmidas::YearMonth;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::CliError;

pub const CONFIG_ENV: &str = "GMIDAS_CONFIG";

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Stats,
    Weights,
    Fit,
    Forecast,
    Evaluate,
    Protocol,
    Compare,
    Simulate,
    BuildIndex,
}

#[derive(Parser, Debug)]
#[command(name = "gmidas", version, about = "GARCH-MIDAS mixed-frequency volatility toolkit")]
pub struct Cli {
    /// Subcommand; may also come from the config file.
    #[arg(value_enum)]
    pub command: Option<Command>,

    /// JSON config file with flat keys named like the long flags (snake_case).
    #[arg(long, env = CONFIG_ENV)]
    pub config: Option<PathBuf>,

    #[command(flatten)]
    pub settings: Settings,
}

/// Every setting, shared by the command line and the config file.
/// Flags left unset (or false/empty) fall back to the file value.
#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    #[arg(skip)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subcommand: Option<Command>,

    /// Daily CSV (date,value).
    #[arg(long)]
    pub daily: Option<PathBuf>,
    /// Daily values are `price` (default) or `log_return`.
    #[arg(long)]
    pub kind: Option<String>,
    #[arg(long)]
    pub date_column: Option<String>,
    #[arg(long)]
    pub value_column: Option<String>,

    /// Long-run regressor: `rv` (monthly realized variance, default) or `file`.
    #[arg(long)]
    pub regressor: Option<String>,
    /// Monthly CSV (month,value) used with `--regressor file`.
    #[arg(long)]
    pub monthly: Option<PathBuf>,
    /// Name of the monthly regressor in reports.
    #[arg(long)]
    pub label: Option<String>,
    /// Number of monthly MIDAS lags.
    #[arg(long)]
    pub k: Option<usize>,

    /// Window preset; `paper-2008-2015` is the only one.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub full_start: Option<YearMonth>,
    #[arg(long)]
    pub full_end: Option<YearMonth>,
    #[arg(long)]
    pub est_start: Option<YearMonth>,
    #[arg(long)]
    pub est_end: Option<YearMonth>,
    #[arg(long)]
    pub oos_start: Option<YearMonth>,
    #[arg(long)]
    pub oos_end: Option<YearMonth>,

    /// Estimate omega1 instead of fixing it at 1.
    #[arg(long)]
    pub free_omega1: bool,
    /// Exponential link for the long-run component.
    #[arg(long)]
    pub exp_link: bool,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub refine_starts: Option<usize>,
    /// Report non-converged fits with exit code 0 instead of 4.
    #[arg(long)]
    pub allow_nonconverged: bool,

    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub format: Option<Format>,
    /// Report destination; stdout when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,

    /// Significance level for test decisions.
    #[arg(long)]
    pub level: Option<f64>,
    #[arg(long)]
    pub adf_max_lags: Option<usize>,
    /// ADF deterministic terms: none, constant, constant_trend.
    #[arg(long)]
    pub adf_spec: Option<String>,

    #[arg(long)]
    pub omega1: Option<f64>,
    #[arg(long)]
    pub omega2: Option<f64>,

    /// Fit report (JSON) to forecast from.
    #[arg(long)]
    pub fit: Option<PathBuf>,
    /// Forecast CSV to evaluate.
    #[arg(long)]
    pub forecast: Option<PathBuf>,
    /// Where `protocol` writes the out-of-sample forecast CSV.
    #[arg(long)]
    pub forecast_out: Option<PathBuf>,
    /// Sample label for `evaluate`: full_sample, in_sample, out_of_sample.
    #[arg(long)]
    pub sample: Option<String>,

    /// Protocol reports (JSON) to compare.
    #[arg(long = "report")]
    pub reports: Vec<PathBuf>,
    /// Regressors to run and compare: `rv` or a monthly CSV path.
    #[arg(long = "candidate")]
    pub candidates: Vec<String>,

    #[arg(long)]
    pub months: Option<usize>,
    #[arg(long)]
    pub days: Option<usize>,
    #[arg(long)]
    pub start: Option<YearMonth>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub m: Option<f64>,
    /// Mean level of the simulated log-AR(1) regressor.
    #[arg(long)]
    pub reg_level: Option<f64>,
    #[arg(long)]
    pub reg_phi: Option<f64>,
    #[arg(long)]
    pub reg_sigma: Option<f64>,
    #[arg(long)]
    pub daily_out: Option<PathBuf>,
    #[arg(long)]
    pub monthly_out: Option<PathBuf>,

    /// Wide country panel CSV (month,C1,C2,...).
    #[arg(long)]
    pub panel: Option<PathBuf>,
    /// standardize (default) or center_only.
    #[arg(long)]
    pub scaling: Option<String>,
    /// Index metadata JSON; defaults to the output path with a `.json` extension.
    #[arg(long)]
    pub sidecar: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Text,
}

fn is_unset(v: &Value) -> bool {
    match v {
        Value::Null => true,
        Value::Bool(b) => !b,
        Value::String(s) => s.is_empty(),
        Value::Array(a) => a.is_empty(),
        _ => false,
    }
}

/// Resolves settings: flag, then config file, then built-in default.
pub fn resolve(cli: Cli) -> Result<(Command, Settings), CliError> {
    let file = match &cli.config {
        Some(p) => load_file(p)?,
        None => Map::new(),
    };
    let flags = match serde_json::to_value(&cli.settings).expect("settings serialize") {
        Value::Object(m) => m,
        _ => unreachable!(),
    };
    let mut merged = file;
    for (k, v) in flags {
        if !is_unset(&v) || !merged.contains_key(&k) {
            merged.insert(k, v);
        }
    }
    let settings: Settings = serde_json::from_value(Value::Object(merged))
        .map_err(|e| CliError::config(format!("invalid config: {e}")))?;
    let command = cli
        .command
        .or(settings.subcommand)
        .ok_or_else(|| CliError::config("no subcommand given (flag or `subcommand` config key)"))?;
    Ok((command, settings))
}

fn load_file(path: &Path) -> Result<Map<String, Value>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
    match serde_json::from_str(&text) {
        Ok(Value::Object(m)) => Ok(m),
        Ok(_) => Err(CliError::config(format!("config {} must be a JSON object", path.display()))),
        Err(e) => Err(CliError::config(format!("config {}: {e}", path.display()))),
    }
}
