mod commands;
mod config;

use std::fmt;
use std::process::ExitCode;

use clap::Parser;
use gmidas::{DataError, EstimateError, ForecastError, IndexError, ModelError, StatsError};

/// Error with the process exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub const CONFIG: u8 = 2;
    pub const INFEASIBLE: u8 = 3;
    pub const NON_CONVERGENCE: u8 = 4;

    pub fn config(msg: impl Into<String>) -> Self {
        Self { code: Self::CONFIG, message: msg.into() }
    }

    pub fn new(code: u8, msg: impl Into<String>) -> Self {
        Self { code, message: msg.into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        Self::config(e.to_string())
    }
}

impl From<StatsError> for CliError {
    fn from(e: StatsError) -> Self {
        Self::config(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::config(e.to_string())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Data(d) => d.into(),
            other => Self::new(Self::INFEASIBLE, other.to_string()),
        }
    }
}

impl From<EstimateError> for CliError {
    fn from(e: EstimateError) -> Self {
        match e {
            EstimateError::NonConvergence { .. } => Self::new(Self::NON_CONVERGENCE, e.to_string()),
            EstimateError::EmptyPanel => Self::config(e.to_string()),
            EstimateError::Model(m) => m.into(),
            EstimateError::NoFeasibleStart | EstimateError::InfeasibleStart(_) => {
                Self::new(Self::INFEASIBLE, e.to_string())
            }
            EstimateError::SingularHessian => Self::new(1, e.to_string()),
        }
    }
}

impl From<ForecastError> for CliError {
    fn from(e: ForecastError) -> Self {
        match e {
            ForecastError::Model(m) => m.into(),
            ForecastError::Estimate(m) => m.into(),
            ForecastError::Data(d) => d.into(),
            other => Self::config(other.to_string()),
        }
    }
}

impl From<IndexError> for CliError {
    fn from(e: IndexError) -> Self {
        match e {
            IndexError::ConvergenceFailure => Self::new(1, e.to_string()),
            IndexError::Data(d) => d.into(),
            other => Self::config(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match config::Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { CliError::CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = config::resolve(cli).and_then(|(cmd, settings)| commands::run(cmd, &settings));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
