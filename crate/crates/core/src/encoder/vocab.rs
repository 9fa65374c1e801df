//! Node vocabularies: element embeddings and the node classes that decide
//! edge types for the distance encoding.

use crate::motif::MotifKind;

/// Elements with their own embedding row; everything else maps to `UNK`.
pub const ELEMENTS: [&str; 24] = [
    "C", "N", "O", "S", "P", "F", "Cl", "Br", "I", "B", "Si", "Se", "Fe", "Zn", "Mg", "Ca", "Mn", "Na", "K", "Cu",
    "Co", "Ni", "Hg", "Cd",
];

pub const UNK_ELEMENT: usize = ELEMENTS.len();
pub const ELEMENT_VOCAB: usize = ELEMENTS.len() + 1;

/// Embedding row for `symbol`, and whether it fell back to `UNK`.
pub fn element_index(symbol: &str) -> (usize, bool) {
    match ELEMENTS.iter().position(|e| *e == symbol) {
        Some(k) => (k, false),
        None => (UNK_ELEMENT, true),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Compound = 0,
    Protein = 1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ElementBucket {
    Carbon,
    Nitrogen,
    Oxygen,
    Sulfur,
    Phosphorus,
    Halogen,
    Metal,
    Other,
}

pub const ELEMENT_BUCKETS: usize = 8;
pub const ATOM_CLASSES: usize = ELEMENT_BUCKETS * 2;
pub const MOTIF_CLASSES: usize = 3 * 2;

const METALS: [&str; 20] = [
    "Li", "Na", "K", "Mg", "Ca", "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Cd", "Hg", "Pt", "Sr", "Ba", "Al", "Ga", "Cs",
    "Rb",
];

pub fn element_bucket(symbol: &str) -> ElementBucket {
    match symbol {
        "C" => ElementBucket::Carbon,
        "N" => ElementBucket::Nitrogen,
        "O" => ElementBucket::Oxygen,
        "S" => ElementBucket::Sulfur,
        "P" => ElementBucket::Phosphorus,
        "F" | "Cl" | "Br" | "I" | "At" => ElementBucket::Halogen,
        s if METALS.contains(&s) => ElementBucket::Metal,
        _ => ElementBucket::Other,
    }
}

pub fn atom_class(symbol: &str, side: Side) -> usize {
    element_bucket(symbol) as usize + ELEMENT_BUCKETS * side as usize
}

pub fn motif_class(kind: MotifKind, side: Side) -> usize {
    let k = match kind {
        MotifKind::Ring => 0,
        MotifKind::Chain => 1,
        MotifKind::Backbone => 2,
    };
    k + 3 * side as usize
}

/// Number of unordered class pairs.
pub fn edge_type_count(classes: usize) -> usize {
    classes * (classes + 1) / 2
}

/// Symmetric edge type of an unordered class pair.
pub fn edge_type(a: usize, b: usize) -> usize {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi * (hi + 1) / 2 + lo
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edge_types_are_symmetric_and_total() {
        let mut seen = std::collections::HashSet::new();
        for a in 0..ATOM_CLASSES {
            for b in 0..ATOM_CLASSES {
                assert_eq!(edge_type(a, b), edge_type(b, a));
                assert!(edge_type(a, b) < edge_type_count(ATOM_CLASSES));
                seen.insert(edge_type(a, b));
            }
        }
        assert_eq!(seen.len(), edge_type_count(ATOM_CLASSES));
    }

    #[test]
    fn buckets() {
        assert_eq!(element_bucket("Br"), ElementBucket::Halogen);
        assert_eq!(element_bucket("Zn"), ElementBucket::Metal);
        assert_eq!(element_bucket("Se"), ElementBucket::Other);
        assert_eq!(atom_class("C", Side::Protein), 8);
        assert_eq!(element_index("Xx"), (UNK_ELEMENT, true));
        assert_eq!(element_index("N"), (1, false));
    }
}
