//! Experiment runner behind the `rfv` binary.
//!
//! A run reads an [`ExperimentConfig`], executes the requested number of GA
//! repetitions on one benchmark and writes everything into a fresh output
//! directory together with a manifest listing each file.

pub mod config;
pub mod inspect;
pub mod output;
pub mod run;

pub use config::{load_config, parse_config, ExperimentConfig, ExperimentKind};
pub use inspect::inspect;
pub use output::{ExistingOutput, OutputDir};
pub use run::{run_experiment, RunSummary};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Runtime(m) => m,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(format!("i/o: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Runtime(format!("csv: {e}"))
    }
}

/// Fixed-width float text with 17 significant digits.
pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}
