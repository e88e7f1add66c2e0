//! Output-directory plumbing: every artifact is written to a temp file in
//! the destination directory and renamed into place, so readers never see
//! a partial file.

use std::path::{Path, PathBuf};

use funssn::{Error, Result};
use ndarray::Array2;

pub fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir)?;
    std::io::Write::write_all(&mut tmp, bytes)?;
    tmp.persist(path)
        .map_err(|e| Error::Io(std::io::Error::new(std::io::ErrorKind::Other, e)))?;
    Ok(())
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::invalid(format!("serialization failed: {e}")))?;
    text.push('\n');
    atomic_write(path, text.as_bytes())
}

/// Writes a matrix as headerless wide CSV with full round-trip precision.
pub fn write_matrix_csv(path: &Path, m: &Array2<f64>) -> Result<()> {
    let mut out = String::new();
    for row in m.rows() {
        let mut first = true;
        for v in row {
            if !first {
                out.push(',');
            }
            first = false;
            let mut buf = ryu::Buffer::new();
            out.push_str(buf.format(*v));
        }
        out.push('\n');
    }
    atomic_write(path, out.as_bytes())
}

pub fn read_matrix_csv(path: &Path) -> Result<Array2<f64>> {
    let bytes = std::fs::read(path)?;
    funssn::dataio::parse_matrix_csv(&bytes, &path.display().to_string())
}
