//! Instance files, education data, generators, and result files.

mod education;
mod files;
mod format;
mod generators;

use std::io::Write;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::model::ModelError;

pub use education::{
    build_education_instance, friends_to_conflicts, load_education, parse_education, PreferenceFunction, RankingData,
};
pub use files::{
    load_assignment, load_report, parse_assignment, save_assignment, save_report, write_assignment, write_sweep,
    ASSIGNMENT_HEADER, SWEEP_HEADER,
};
pub use format::{load_instance, parse_instance, save_instance, write_instance, INSTANCE_HEADER};
pub use generators::{
    generate_company, generate_education, generate_synth_tf, CompanyConfig, CompanyData, EducationConfig, Gender,
    SynthTfConfig, SynthTfData,
};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File { path: PathBuf, source: std::io::Error },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Invalid(String),
}

impl IoError {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        IoError::Parse { line, message: message.into() }
    }

    pub(crate) fn file(path: &Path, source: std::io::Error) -> Self {
        IoError::File { path: path.to_path_buf(), source }
    }
}

/// Writes `bytes` to a temporary file next to `path` and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| IoError::file(path, e))?;
    tmp.write_all(bytes).map_err(|e| IoError::file(path, e))?;
    tmp.persist(path).map_err(|e| IoError::file(path, e.error))?;
    Ok(())
}

pub(crate) fn read_to_string(path: &Path) -> Result<String, IoError> {
    std::fs::read_to_string(path).map_err(|e| IoError::file(path, e))
}
