//! Atomic output files and run manifests.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::commands::CliError;

#[derive(Debug, Serialize)]
pub struct InputDigest {
    pub path: PathBuf,
    pub sha256: String,
}

/// Provenance record written next to every output file.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub params: serde_json::Value,
    pub seed: Option<u64>,
    pub version: String,
    pub inputs: Vec<InputDigest>,
    pub wall_time_s: f64,
}

pub fn read_input(path: &Path, digests: &mut Vec<InputDigest>) -> Result<Vec<u8>, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::validation(format!("cannot read {}: {e}", path.display())))?;
    let sha256 = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
    digests.push(InputDigest { path: path.to_path_buf(), sha256 });
    Ok(bytes)
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::validation(format!("cannot write {}: {e}", path.display()));
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    out.with_file_name(name)
}

/// Sends `bytes` to `out` (plus manifest) or to stdout.
pub fn emit(out: Option<&Path>, bytes: &[u8], manifest: &RunManifest) -> Result<(), CliError> {
    match out {
        Some(path) => {
            write_atomic(path, bytes)?;
            let mut m = serde_json::to_vec_pretty(manifest).expect("manifest serializes");
            m.push(b'\n');
            write_atomic(&manifest_path(path), &m)
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(bytes)
                .and_then(|_| stdout.flush())
                .map_err(|e| CliError::validation(format!("cannot write to stdout: {e}")))
        }
    }
}
