use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::molio::{parse_pdb, parse_sdf, validate_complex, Complex, MolIoError};

/// One line of a JSON-lines manifest. Relative paths are resolved against
/// the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub id: String,
    pub compound_path: String,
    pub protein_path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub affinity: Option<f64>,
}

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: {msg}")]
    Line { path: PathBuf, line: usize, msg: String },
    #[error("{path}: {source}")]
    Molecule { path: PathBuf, source: MolIoError },
    #[error("{id}: {source}")]
    Complex { id: String, source: MolIoError },
}

/// Parses one manifest line. `None` for blank lines.
pub fn parse_manifest_line(line: &str) -> Option<Result<ManifestEntry, String>> {
    if line.trim().is_empty() {
        return None;
    }
    Some(serde_json::from_str::<ManifestEntry>(line).map_err(|e| e.to_string()).and_then(|e| match e.affinity {
        Some(a) if !a.is_finite() => Err("affinity is not finite".into()),
        _ => Ok(e),
    }))
}

/// Reads a manifest, failing on the first malformed line.
pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>, ManifestError> {
    let text = fs::read_to_string(path).map_err(|source| ManifestError::Io { path: path.into(), source })?;
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        match parse_manifest_line(line) {
            None => {}
            Some(Ok(e)) => out.push(e),
            Some(Err(msg)) => return Err(ManifestError::Line { path: path.into(), line: k + 1, msg }),
        }
    }
    Ok(out)
}

pub fn write_manifest(path: &Path, entries: &[ManifestEntry]) -> Result<(), ManifestError> {
    let mut text = String::new();
    for e in entries {
        text.push_str(&serde_json::to_string(e).expect("manifest entry serialises"));
        text.push('\n');
    }
    fs::write(path, text).map_err(|source| ManifestError::Io { path: path.into(), source })
}

fn resolve(base: &Path, p: &str) -> PathBuf {
    let p = Path::new(p);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn read_molecule(
    path: &Path,
    parse: fn(&str) -> Result<crate::molio::AtomGraph, MolIoError>,
) -> Result<crate::molio::AtomGraph, ManifestError> {
    let text = fs::read_to_string(path).map_err(|source| ManifestError::Io { path: path.into(), source })?;
    parse(&text).map_err(|source| ManifestError::Molecule { path: path.into(), source })
}

/// Reads and validates the complex of one manifest entry.
pub fn load_complex(base_dir: &Path, e: &ManifestEntry) -> Result<Complex, ManifestError> {
    let compound = read_molecule(&resolve(base_dir, &e.compound_path), parse_sdf)?;
    let protein = read_molecule(&resolve(base_dir, &e.protein_path), parse_pdb)?;
    validate_complex(&e.id, compound, protein, e.affinity)
        .map_err(|source| ManifestError::Complex { id: e.id.clone(), source })
}
