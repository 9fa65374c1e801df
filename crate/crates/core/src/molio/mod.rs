//! Molecular file ingestion and the compound–protein complex container.

mod graph;
mod pdb;
pub mod residues;
mod sdf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use graph::{distance, Atom, AtomGraph, Bond, BondOrder};
pub use pdb::{parse_pdb, write_pdb, NONSTANDARD_BOND_CUTOFF, PEPTIDE_BOND_CUTOFF};
pub use sdf::{parse_sdf, write_sdf};

/// Complexes whose closest compound–protein heavy-atom pair is farther than
/// this are rejected. The threshold is closed: exactly 6.0 Å is accepted.
pub const CONTACT_CUTOFF: f64 = 6.0;

#[derive(Debug, Error)]
pub enum MolIoError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("no ATOM records")]
    NoAtomRecords,
    #[error("invalid graph: {0}")]
    Invalid(String),
    #[error("complex rejected: minimum compound-protein distance {min_distance:.3} Å exceeds {CONTACT_CUTOFF} Å")]
    TooFar { min_distance: f64 },
    #[error("complex rejected: {0} graph is empty")]
    Empty(&'static str),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Complex {
    pub id: String,
    pub compound: AtomGraph,
    pub protein: AtomGraph,
    /// Binding affinity label in pKa units.
    pub affinity: Option<f64>,
}

/// Brute-force minimum over all compound × protein atom pairs.
pub fn min_cross_distance(compound: &AtomGraph, protein: &AtomGraph) -> f64 {
    compound
        .coords
        .iter()
        .flat_map(|a| protein.coords.iter().map(move |b| distance(a, b)))
        .fold(f64::INFINITY, f64::min)
}

/// Accepts the pair iff the closest cross pair is within [`CONTACT_CUTOFF`].
pub fn validate_complex(
    id: impl Into<String>,
    compound: AtomGraph,
    protein: AtomGraph,
    affinity: Option<f64>,
) -> Result<Complex, MolIoError> {
    if compound.is_empty() {
        return Err(MolIoError::Empty("compound"));
    }
    if protein.is_empty() {
        return Err(MolIoError::Empty("protein"));
    }
    let min_distance = min_cross_distance(&compound, &protein);
    if min_distance > CONTACT_CUTOFF {
        return Err(MolIoError::TooFar { min_distance });
    }
    Ok(Complex { id: id.into(), compound, protein, affinity })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(p: [f64; 3]) -> AtomGraph {
        AtomGraph::new(vec![Atom::new("C")], vec![], vec![p]).unwrap()
    }

    #[test]
    fn accepts_within_cutoff() {
        let c = validate_complex("a", point([0.0; 3]), point([0.0, 0.0, 5.0]), None).unwrap();
        assert_eq!(min_cross_distance(&c.compound, &c.protein), 5.0);
    }

    #[test]
    fn rejects_beyond_cutoff_with_value() {
        match validate_complex("a", point([0.0; 3]), point([0.0, 0.0, 6.5]), None) {
            Err(MolIoError::TooFar { min_distance }) => assert_eq!(min_distance, 6.5),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn boundary_is_closed() {
        assert!(validate_complex("a", point([0.0; 3]), point([6.0, 0.0, 0.0]), None).is_ok());
    }

    #[test]
    fn empty_graphs_rejected() {
        assert!(matches!(
            validate_complex("a", AtomGraph::default(), point([0.0; 3]), None),
            Err(MolIoError::Empty("compound"))
        ));
    }

    #[test]
    fn graph_invariants() {
        let atoms = vec![Atom::new("C"), Atom::new("O")];
        let c = vec![[0.0; 3], [1.2, 0.0, 0.0]];
        assert!(AtomGraph::new(atoms.clone(), vec![Bond::new(0, 0, BondOrder::Single)], c.clone()).is_err());
        assert!(AtomGraph::new(atoms.clone(), vec![Bond::new(0, 2, BondOrder::Single)], c.clone()).is_err());
        let dup = vec![Bond::new(0, 1, BondOrder::Single), Bond::new(1, 0, BondOrder::Double)];
        assert!(AtomGraph::new(atoms.clone(), dup, c.clone()).is_err());
        assert!(AtomGraph::new(atoms.clone(), vec![], vec![[0.0; 3]]).is_err());
        assert!(AtomGraph::new(atoms.clone(), vec![], vec![[0.0; 3], [f64::NAN, 0.0, 0.0]]).is_err());
        assert!(AtomGraph::new(vec![Atom::new("H")], vec![], vec![[0.0; 3]]).is_err());
    }

    #[test]
    fn json_round_trip() {
        let g = AtomGraph::new(
            vec![Atom::new("C"), Atom::new("O")],
            vec![Bond::new(0, 1, BondOrder::Double)],
            vec![[0.0; 3], [1.2, 0.0, 0.0]],
        )
        .unwrap();
        let text = g.to_json().unwrap();
        assert!(text.contains("\"double\""));
        assert_eq!(AtomGraph::from_json(&text).unwrap(), g);
    }
}
