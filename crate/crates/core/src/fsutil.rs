//! Small filesystem helpers shared by the artifact writers.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{CsdaError, Result};

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    write_new(path, text.as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| CsdaError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CsdaError::load(path, e))
}

/// Write a file that must not exist yet. Artifacts are immutable once written.
pub fn write_new(path: &Path, bytes: &[u8]) -> Result<()> {
    if path.exists() {
        return Err(CsdaError::ArtifactExists(path.to_path_buf()));
    }
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| CsdaError::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| CsdaError::io(path, e))
}

pub fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| CsdaError::io(path, e))
}

/// Serialize `rows` as CSV into a new file.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    if path.exists() {
        return Err(CsdaError::ArtifactExists(path.to_path_buf()));
    }
    if let Some(parent) = path.parent() {
        create_dir(parent)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| CsdaError::io(path, e))
}
