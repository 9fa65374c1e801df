use std::path::Path;

use hiercpi::training::{load_complex, parse_manifest_line, PreparedComplex};
use log::{info, warn};

use crate::error::{CliError, CliResult};

/// Complexes that loaded, plus the number of rows that were skipped.
pub struct LoadedSet {
    pub complexes: Vec<PreparedComplex>,
    pub skipped: usize,
}

/// Loads every valid row of a manifest. Rows that fail to parse, reference
/// unreadable files or violate the contact rule are logged and counted.
pub fn load_manifest(path: &Path) -> CliResult<LoadedSet> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut complexes = Vec::new();
    let mut skipped = 0;
    for (k, line) in text.lines().enumerate() {
        let entry = match parse_manifest_line(line) {
            None => continue,
            Some(Ok(e)) => e,
            Some(Err(msg)) => {
                warn!("{}:{}: skipped: {msg}", path.display(), k + 1);
                skipped += 1;
                continue;
            }
        };
        match load_complex(base, &entry) {
            Ok(c) => complexes.push(PreparedComplex::new(c)),
            Err(e) => {
                warn!("{}:{}: skipped: {e}", path.display(), k + 1);
                skipped += 1;
            }
        }
    }
    info!("{}: {} complexes loaded, {} rows skipped", path.display(), complexes.len(), skipped);
    if complexes.is_empty() {
        return Err(CliError::input(format!("{}: no usable complexes", path.display())));
    }
    Ok(LoadedSet { complexes, skipped })
}

/// Fails before any work is done if a complex lacks an affinity label.
pub fn require_labels(set: &[PreparedComplex], path: &Path) -> CliResult<Vec<f64>> {
    let missing: Vec<&str> = set.iter().filter(|pc| pc.complex.affinity.is_none()).map(|pc| pc.id()).collect();
    if !missing.is_empty() {
        return Err(CliError::input(format!(
            "{}: {} complexes have no affinity label: {}",
            path.display(),
            missing.len(),
            missing.join(", ")
        )));
    }
    Ok(set.iter().filter_map(|pc| pc.complex.affinity).collect())
}
