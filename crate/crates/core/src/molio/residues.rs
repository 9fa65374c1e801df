//! Heavy-atom bond templates for the 20 standard amino acids.

use super::graph::BondOrder::{self, Aromatic as Ar, Double as D, Single as S};

pub const BACKBONE_NAMES: [&str; 4] = ["N", "CA", "C", "O"];

const BACKBONE: &[(&str, &str, BondOrder)] = &[("N", "CA", S), ("CA", "C", S), ("C", "O", D), ("C", "OXT", S)];

const PHE_RING: &[(&str, &str, BondOrder)] = &[
    ("CG", "CD1", Ar),
    ("CG", "CD2", Ar),
    ("CD1", "CE1", Ar),
    ("CD2", "CE2", Ar),
    ("CE1", "CZ", Ar),
    ("CE2", "CZ", Ar),
];

/// Sidechain bonds (including CA–CB) for a standard residue.
fn sidechain(residue: &str) -> Option<&'static [(&'static str, &'static str, BondOrder)]> {
    let bonds: &'static [(&str, &str, BondOrder)] = match residue {
        "GLY" => &[],
        "ALA" => &[("CA", "CB", S)],
        "SER" => &[("CA", "CB", S), ("CB", "OG", S)],
        "CYS" => &[("CA", "CB", S), ("CB", "SG", S)],
        "VAL" => &[("CA", "CB", S), ("CB", "CG1", S), ("CB", "CG2", S)],
        "THR" => &[("CA", "CB", S), ("CB", "OG1", S), ("CB", "CG2", S)],
        "LEU" => &[("CA", "CB", S), ("CB", "CG", S), ("CG", "CD1", S), ("CG", "CD2", S)],
        "ILE" => &[("CA", "CB", S), ("CB", "CG1", S), ("CB", "CG2", S), ("CG1", "CD1", S)],
        "MET" => &[("CA", "CB", S), ("CB", "CG", S), ("CG", "SD", S), ("SD", "CE", S)],
        "PRO" => &[("CA", "CB", S), ("CB", "CG", S), ("CG", "CD", S), ("CD", "N", S)],
        "PHE" | "TYR" => &[("CA", "CB", S), ("CB", "CG", S)],
        "TRP" => &[
            ("CA", "CB", S),
            ("CB", "CG", S),
            ("CG", "CD1", Ar),
            ("CG", "CD2", Ar),
            ("CD1", "NE1", Ar),
            ("NE1", "CE2", Ar),
            ("CD2", "CE2", Ar),
            ("CE2", "CZ2", Ar),
            ("CD2", "CE3", Ar),
            ("CE3", "CZ3", Ar),
            ("CZ2", "CH2", Ar),
            ("CZ3", "CH2", Ar),
        ],
        "HIS" => &[
            ("CA", "CB", S),
            ("CB", "CG", S),
            ("CG", "ND1", Ar),
            ("CG", "CD2", Ar),
            ("ND1", "CE1", Ar),
            ("CD2", "NE2", Ar),
            ("CE1", "NE2", Ar),
        ],
        "ASP" => &[("CA", "CB", S), ("CB", "CG", S), ("CG", "OD1", D), ("CG", "OD2", S)],
        "GLU" => &[("CA", "CB", S), ("CB", "CG", S), ("CG", "CD", S), ("CD", "OE1", D), ("CD", "OE2", S)],
        "ASN" => &[("CA", "CB", S), ("CB", "CG", S), ("CG", "OD1", D), ("CG", "ND2", S)],
        "GLN" => &[("CA", "CB", S), ("CB", "CG", S), ("CG", "CD", S), ("CD", "OE1", D), ("CD", "NE2", S)],
        "LYS" => &[("CA", "CB", S), ("CB", "CG", S), ("CG", "CD", S), ("CD", "CE", S), ("CE", "NZ", S)],
        "ARG" => &[
            ("CA", "CB", S),
            ("CB", "CG", S),
            ("CG", "CD", S),
            ("CD", "NE", S),
            ("NE", "CZ", S),
            ("CZ", "NH1", S),
            ("CZ", "NH2", D),
        ],
        _ => return None,
    };
    Some(bonds)
}

/// Full intra-residue template, `None` for nonstandard residue names.
pub fn template(residue: &str) -> Option<Vec<(&'static str, &'static str, BondOrder)>> {
    let side = sidechain(residue)?;
    let mut bonds: Vec<_> = BACKBONE.to_vec();
    bonds.extend_from_slice(side);
    match residue {
        "PHE" => bonds.extend_from_slice(PHE_RING),
        "TYR" => {
            bonds.extend_from_slice(PHE_RING);
            bonds.push(("CZ", "OH", S));
        }
        _ => {}
    }
    Some(bonds)
}

/// Heavy atom names of a standard residue in PDB order (without OXT).
pub fn atom_names(residue: &str) -> Option<Vec<&'static str>> {
    let bonds = template(residue)?;
    let mut names: Vec<&'static str> = BACKBONE_NAMES.to_vec();
    for (a, b, _) in bonds {
        for n in [a, b] {
            if n != "OXT" && !names.contains(&n) {
                names.push(n);
            }
        }
    }
    Some(names)
}

pub const STANDARD_RESIDUES: [&str; 20] = [
    "ALA", "ARG", "ASN", "ASP", "CYS", "GLN", "GLU", "GLY", "HIS", "ILE", "LEU", "LYS", "MET", "PHE", "PRO", "SER",
    "THR", "TRP", "TYR", "VAL",
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_standard_residue_has_a_template() {
        for r in STANDARD_RESIDUES {
            let t = template(r).unwrap();
            let names = atom_names(r).unwrap();
            for (a, b, _) in &t {
                assert!(*a == "OXT" || names.contains(a), "{r} {a}");
                assert!(*b == "OXT" || names.contains(b), "{r} {b}");
            }
        }
        assert!(template("HOH").is_none());
    }

    #[test]
    fn heavy_atom_counts() {
        let count = |r| atom_names(r).unwrap().len();
        assert_eq!(count("GLY"), 4);
        assert_eq!(count("ALA"), 5);
        assert_eq!(count("PHE"), 11);
        assert_eq!(count("TRP"), 14);
        assert_eq!(count("ARG"), 11);
    }
}
