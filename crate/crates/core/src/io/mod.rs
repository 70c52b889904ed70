//! Configuration, datasets, manifests and file output.

pub mod config;
pub mod dataset;
pub mod manifest;
pub mod stages;

use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{}: {msg}", path.display())]
    File { path: PathBuf, msg: String },
    #[error("{}: {msg}", path.display())]
    Format { path: PathBuf, msg: String },
    #[error("config error at `{field}`: {msg}")]
    Config { field: String, msg: String },
}

impl IoError {
    pub(crate) fn file(path: &Path, e: impl std::fmt::Display) -> Self {
        IoError::File {
            path: path.to_path_buf(),
            msg: e.to_string(),
        }
    }

    pub(crate) fn format(path: &Path, msg: String) -> Self {
        IoError::Format {
            path: path.to_path_buf(),
            msg,
        }
    }

    pub(crate) fn config(field: impl Into<String>, msg: impl Into<String>) -> Self {
        IoError::Config {
            field: field.into(),
            msg: msg.into(),
        }
    }
}

/// Writes `bytes` to a temporary file next to `path`, then renames it into place.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| IoError::file(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| IoError::file(dir, e))?;
    tmp.write_all(bytes).map_err(|e| IoError::file(path, e))?;
    tmp.as_file().sync_all().map_err(|e| IoError::file(path, e))?;
    tmp.persist(path).map_err(|e| IoError::file(path, e.error))?;
    Ok(())
}
