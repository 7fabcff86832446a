//! Reading and atomically writing documents on disk.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::formats::{self, FormatError};

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| io_error(path, e))
}

pub fn read_doc<T: DeserializeOwned>(path: &Path, strict: bool) -> Result<T> {
    let text = read_text(path)?;
    formats::parse(&text, strict).map_err(|source| Error::Document {
        path: path.to_path_buf(),
        source,
    })
}

/// Attaches the file name to a validation error raised after parsing.
pub fn in_file<T>(path: &Path, r: Result<T, FormatError>) -> Result<T> {
    r.map_err(|source| Error::Document {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes through a temporary file in the same directory and renames it
/// into place, so readers never see a partial document.
pub fn write_atomic(path: &Path, text: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io_error(dir, e))?;
    tmp.write_all(text.as_bytes()).map_err(|e| io_error(path, e))?;
    tmp.as_file().sync_all().map_err(|e| io_error(path, e))?;
    tmp.persist(path).map_err(|e| io_error(path, e.error))?;
    Ok(())
}

pub fn write_doc<T: Serialize>(path: &Path, doc: &T) -> Result<()> {
    write_atomic(path, &formats::to_pretty(doc))
}
