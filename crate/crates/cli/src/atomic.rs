//! Atomic file outputs: everything is written to a temporary file in the
//! destination directory and renamed into place, so partial results never
//! appear under final names.

use std::io::Write;
use std::path::Path;

use camlens_core::{Error, Image, Result};

fn write_error(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Write {
        path: path.into(),
        source: std::io::Error::other(e.to_string()),
    }
}

fn temp_in_parent(path: &Path) -> Result<tempfile::NamedTempFile> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    tempfile::NamedTempFile::new_in(dir).map_err(|e| write_error(path, e))
}

pub fn write_bytes(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let mut tmp = temp_in_parent(path)?;
    tmp.write_all(bytes).map_err(|e| write_error(path, e))?;
    tmp.persist(path).map_err(|e| write_error(path, e))?;
    Ok(())
}

pub fn write_json<T: serde::Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("report serializes");
    write_bytes(path, text.as_bytes())
}

pub fn save_png(img: &Image, path: impl AsRef<Path>, bit_depth: u8) -> Result<()> {
    let path = path.as_ref();
    let tmp = temp_in_parent(path)?;
    camlens_core::save_image(img, tmp.path(), bit_depth)?;
    tmp.persist(path).map_err(|e| write_error(path, e))?;
    Ok(())
}
