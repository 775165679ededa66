//! File formats, report tables, run manifests and the command-line pipeline
//! around `dualsig-core`.

pub mod cli;
pub mod docs;
pub mod error;
pub mod manifest;
pub mod predictions;
pub mod report;
pub mod table;

use std::io::Write;
use std::path::Path;

pub use error::{Category, Error, Result};

/// Writes through a temporary file in the same directory, then renames it over
/// `path`, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(path, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}
