//! Command implementations, configuration schema and file formats for the
//! `lasersim` binary.

pub mod commands;
pub mod config;
pub mod dataset;
pub mod frames;
pub mod poses;

use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Format(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io { .. } | CliError::Format(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

impl From<lasersim::calib::CalibError> for CliError {
    fn from(e: lasersim::calib::CalibError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<lasersim::recon::ReconError> for CliError {
    fn from(e: lasersim::recon::ReconError) -> Self {
        match e {
            lasersim::recon::ReconError::Io(e) => CliError::Format(e.to_string()),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

impl From<lasersim::render::RenderError> for CliError {
    fn from(e: lasersim::render::RenderError) -> Self {
        CliError::Config(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

pub(crate) fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

pub(crate) fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

/// Parses JSON, reporting line and column of the first problem.
pub fn parse_json<T: serde::de::DeserializeOwned>(text: &str, what: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| CliError::Config(format!("{what}: {e}")))
}

pub(crate) fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Format(e.to_string()))?;
    s.push('\n');
    write_bytes(path, s.as_bytes())
}
