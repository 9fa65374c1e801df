use crate::molio::AtomGraph;
use crate::motif::MotifGraph;

use super::vocab::{atom_class, element_index, motif_class, Side};

/// Nodes of one hierarchy level of a complex, compound nodes first.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelInput {
    pub n_compound: usize,
    pub positions: Vec<[f64; 3]>,
    /// Node class per node; pairs of classes select the edge type.
    pub classes: Vec<usize>,
    /// Element embedding row of every underlying atom (compound then protein).
    pub atom_elements: Vec<usize>,
    pub atom_sides: Vec<usize>,
    /// For motif levels: member atoms of each node, indexing `atom_elements`.
    pub members: Option<Vec<Vec<usize>>>,
    /// Atoms whose element fell back to the `UNK` embedding.
    pub unknown_elements: usize,
}

fn atom_features(compound: &AtomGraph, protein: &AtomGraph) -> (Vec<usize>, Vec<usize>, usize) {
    let mut elements = Vec::with_capacity(compound.len() + protein.len());
    let mut sides = Vec::with_capacity(elements.capacity());
    let mut unknown = 0;
    for (g, side) in [(compound, Side::Compound), (protein, Side::Protein)] {
        for a in &g.atoms {
            let (k, unk) = element_index(&a.element);
            unknown += unk as usize;
            elements.push(k);
            sides.push(side as usize);
        }
    }
    (elements, sides, unknown)
}

impl LevelInput {
    /// Atom level. `compound_coords` replaces the compound's stored coordinates.
    pub fn atoms(compound: &AtomGraph, compound_coords: &[[f64; 3]], protein: &AtomGraph) -> Self {
        let (atom_elements, atom_sides, unknown_elements) = atom_features(compound, protein);
        let mut positions = compound_coords.to_vec();
        positions.extend_from_slice(&protein.coords);
        let classes = compound
            .atoms
            .iter()
            .map(|a| atom_class(&a.element, Side::Compound))
            .chain(protein.atoms.iter().map(|a| atom_class(&a.element, Side::Protein)))
            .collect();
        LevelInput {
            n_compound: compound.len(),
            positions,
            classes,
            atom_elements,
            atom_sides,
            members: None,
            unknown_elements,
        }
    }

    /// Motif level: nodes sit at the centroids of `compound_coords` /
    /// protein coordinates.
    pub fn motifs(
        compound: &AtomGraph,
        compound_motifs: &MotifGraph,
        compound_coords: &[[f64; 3]],
        protein: &AtomGraph,
        protein_motifs: &MotifGraph,
    ) -> Self {
        let (atom_elements, atom_sides, unknown_elements) = atom_features(compound, protein);
        let mut positions = compound_motifs.centroids_for(compound_coords);
        positions.extend(protein_motifs.centroids_for(&protein.coords));
        let offset = compound.len();
        let members = compound_motifs
            .motifs
            .iter()
            .cloned()
            .chain(protein_motifs.motifs.iter().map(|m| m.iter().map(|a| a + offset).collect()))
            .collect();
        let classes = compound_motifs
            .kinds
            .iter()
            .map(|k| motif_class(*k, Side::Compound))
            .chain(protein_motifs.kinds.iter().map(|k| motif_class(*k, Side::Protein)))
            .collect();
        LevelInput {
            n_compound: compound_motifs.len(),
            positions,
            classes,
            atom_elements,
            atom_sides,
            members: Some(members),
            unknown_elements,
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn n_protein(&self) -> usize {
        self.len() - self.n_compound
    }
}
