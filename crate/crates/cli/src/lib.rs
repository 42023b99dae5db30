//! Experiment driver behind the `regret-tree` binary.

pub mod commands;
pub mod config;
pub mod output;
pub mod svg;

pub use commands::{run_command, Command};
pub use config::{DatasetConfig, DatasetSource, Overrides, ResampleMode, RunConfig};

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
            CliError::Runtime(_) => 1,
        }
    }
}

impl From<regret_tree::Error> for CliError {
    fn from(e: regret_tree::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

/// Parses `REGRET_TREE_THREADS`; unset or empty means "use the default".
pub fn threads_from_env(value: Option<&str>) -> Result<Option<usize>, CliError> {
    match value.map(str::trim) {
        None | Some("") => Ok(None),
        Some(v) => match v.parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Config(format!(
                "REGRET_TREE_THREADS must be a positive integer, got {v:?}"
            ))),
        },
    }
}
