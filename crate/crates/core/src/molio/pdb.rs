//! Fixed-column PDB `ATOM` record reader and writer.
//!
//! PDB files carry no bond block, so bonds are inferred: intra-residue bonds
//! come from the standard residue templates (or a 1.9 Å distance rule for
//! nonstandard residues) and the peptide bond C(i)–N(i+1) is added when the
//! two atoms are closer than 2.0 Å.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use super::graph::{distance, is_hydrogen_symbol, Atom, AtomGraph, Bond, BondOrder};
use super::residues::{self, BACKBONE_NAMES};
use super::sdf::normalize_symbol;
use super::MolIoError;

pub const PEPTIDE_BOND_CUTOFF: f64 = 2.0;
pub const NONSTANDARD_BOND_CUTOFF: f64 = 1.9;

fn col(line: &str, start: usize, end: usize) -> &str {
    let end = end.min(line.len());
    if start >= end {
        return "";
    }
    line.get(start..end).unwrap_or("")
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct ResidueKey {
    chain: String,
    seq: i32,
    icode: String,
    name: String,
}

fn is_backbone_name(name: &str) -> bool {
    BACKBONE_NAMES.contains(&name) || name == "OXT"
}

fn element_from_name(name: &str) -> String {
    name.chars().find(|c| c.is_ascii_alphabetic()).map(|c| c.to_ascii_uppercase().to_string()).unwrap_or_default()
}

/// Parses the `ATOM` records of the first model.
pub fn parse_pdb(text: &str) -> Result<AtomGraph, MolIoError> {
    let mut atoms = Vec::new();
    let mut coords = Vec::new();
    let mut keys: Vec<ResidueKey> = Vec::new();

    for (k, line) in text.lines().enumerate() {
        let lineno = k + 1;
        if line.starts_with("ENDMDL") {
            break;
        }
        if !line.starts_with("ATOM") {
            continue;
        }
        let alt = col(line, 16, 17);
        if !(alt.trim().is_empty() || alt == "A") {
            continue;
        }
        let name = col(line, 12, 16).trim().to_string();
        if name.is_empty() {
            return Err(MolIoError::Parse { line: lineno, msg: "empty atom name".into() });
        }
        let mut xyz = [0.0; 3];
        for (axis, (a, b)) in [(30, 38), (38, 46), (46, 54)].into_iter().enumerate() {
            let field = col(line, a, b).trim();
            xyz[axis] = field
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| MolIoError::Parse { line: lineno, msg: format!("non-numeric coordinate {field:?}") })?;
        }
        let element = match col(line, 76, 78).trim() {
            "" => element_from_name(&name),
            e => normalize_symbol(e),
        };
        if is_hydrogen_symbol(&element) {
            continue;
        }
        let residue_name = col(line, 17, 20).trim().to_string();
        let chain = col(line, 21, 22).trim().to_string();
        let seq_field = col(line, 22, 26).trim();
        let seq = seq_field
            .parse::<i32>()
            .map_err(|_| MolIoError::Parse { line: lineno, msg: format!("bad residue number {seq_field:?}") })?;
        let icode = col(line, 26, 27).trim().to_string();

        atoms.push(Atom {
            element,
            backbone_flag: Some(is_backbone_name(&name)),
            name: Some(name),
            chain_id: (!chain.is_empty()).then(|| chain.clone()),
            residue_id: Some(seq),
            residue_name: Some(residue_name.clone()),
        });
        coords.push(xyz);
        keys.push(ResidueKey { chain, seq, icode, name: residue_name });
    }

    if atoms.is_empty() {
        return Err(MolIoError::NoAtomRecords);
    }

    let residues = group_runs(&keys);
    let mut bonds = Vec::new();
    let mut seen = HashSet::new();
    let mut push = |i: usize, j: usize, order: BondOrder, bonds: &mut Vec<Bond>| {
        if i != j && seen.insert((i.min(j), i.max(j))) {
            bonds.push(Bond::new(i.min(j), i.max(j), order));
        }
    };

    for range in &residues {
        let res_name = &keys[range.start].name;
        let by_name: HashMap<&str, usize> =
            range.clone().rev().map(|a| (atoms[a].name.as_deref().unwrap_or(""), a)).collect();
        match residues::template(res_name) {
            Some(template) => {
                for (a, b, order) in template {
                    if let (Some(&i), Some(&j)) = (by_name.get(a), by_name.get(b)) {
                        push(i, j, order, &mut bonds);
                    }
                }
            }
            None => {
                for i in range.clone() {
                    for j in (i + 1)..range.end {
                        if distance(&coords[i], &coords[j]) < NONSTANDARD_BOND_CUTOFF {
                            push(i, j, BondOrder::Single, &mut bonds);
                        }
                    }
                }
            }
        }
    }

    let find = |range: &std::ops::Range<usize>, n: &str| range.clone().find(|&a| atoms[a].name.as_deref() == Some(n));
    for pair in residues.windows(2) {
        if keys[pair[0].start].chain != keys[pair[1].start].chain {
            continue;
        }
        if let (Some(c), Some(n)) = (find(&pair[0], "C"), find(&pair[1], "N")) {
            if distance(&coords[c], &coords[n]) < PEPTIDE_BOND_CUTOFF {
                push(c, n, BondOrder::Single, &mut bonds);
            }
        }
    }

    AtomGraph::new(atoms, bonds, coords)
}

fn group_runs(keys: &[ResidueKey]) -> Vec<std::ops::Range<usize>> {
    let mut runs = Vec::new();
    let mut start = 0;
    for k in 1..=keys.len() {
        if k == keys.len() || keys[k] != keys[start] {
            runs.push(start..k);
            start = k;
        }
    }
    runs
}

fn format_name(name: &str, element: &str) -> String {
    if name.len() < 4 && element.len() == 1 {
        format!(" {name:<3}")
    } else {
        format!("{name:<4}")
    }
}

/// Writes `ATOM` records. Atoms without names get `<element><index>`.
pub fn write_pdb(g: &AtomGraph) -> String {
    let mut out = String::new();
    for (k, (atom, p)) in g.atoms.iter().zip(&g.coords).enumerate() {
        let name = atom.name.clone().unwrap_or_else(|| format!("{}{}", atom.element, k % 100));
        let _ = writeln!(
            out,
            "ATOM  {:>5} {} {:>3} {:1}{:>4}{:1}   {:>8.3}{:>8.3}{:>8.3}{:>6.2}{:>6.2}          {:>2}",
            (k + 1) % 100_000,
            format_name(&name, &atom.element),
            atom.residue_name.as_deref().unwrap_or("UNK"),
            atom.chain_id.as_deref().unwrap_or(" "),
            atom.residue_id.unwrap_or(1),
            " ",
            p[0],
            p[1],
            p[2],
            1.0,
            0.0,
            atom.element.to_ascii_uppercase()
        );
    }
    out.push_str("END\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const GLY_GLY: &str = "\
ATOM      1  N   GLY A   1       0.000   0.000   0.000  1.00  0.00           N
ATOM      2  CA  GLY A   1       1.458   0.000   0.000  1.00  0.00           C
ATOM      3  C   GLY A   1       2.009   1.420   0.000  1.00  0.00           C
ATOM      4  O   GLY A   1       1.251   2.390   0.000  1.00  0.00           O
ATOM      5  H   GLY A   1      -0.500  -0.800   0.000  1.00  0.00           H
ATOM      6  N   GLY A   2       3.332   1.536   0.000  1.00  0.00           N
ATOM      7  CA  GLY A   2       3.988   2.839   0.000  1.00  0.00           C
ATOM      8  C   GLY A   2       5.504   2.693   0.000  1.00  0.00           C
ATOM      9  O   GLY A   2       6.030   1.580   0.000  1.00  0.00           O
END
";

    const ALA: &str = "\
ATOM      1  N   ALA A   1      -0.677  -1.230  -0.491  1.00  0.00           N
ATOM      2  CA  ALA A   1      -0.001   0.064  -0.491  1.00  0.00           C
ATOM      3  C   ALA A   1       1.499  -0.110  -0.491  1.00  0.00           C
ATOM      4  O   ALA A   1       2.030  -1.227  -0.502  1.00  0.00           O
ATOM      5  CB  ALA A   1      -0.509   0.856   0.727  1.00  0.00           C
";

    fn has_bond(g: &AtomGraph, a: &str, ra: i32, b: &str, rb: i32) -> bool {
        let idx = |n: &str, r: i32| {
            g.atoms.iter().position(|x| x.name.as_deref() == Some(n) && x.residue_id == Some(r)).unwrap()
        };
        let (i, j) = (idx(a, ra), idx(b, rb));
        g.bonds.iter().any(|bd| (bd.i == i && bd.j == j) || (bd.i == j && bd.j == i))
    }

    #[test]
    fn glycine_dipeptide() {
        let g = parse_pdb(GLY_GLY).unwrap();
        assert_eq!(g.atoms.len(), 8);
        assert!(g.atoms.iter().all(|a| a.backbone_flag == Some(true)));
        // 3 template bonds per residue plus the peptide bond.
        assert_eq!(g.bonds.len(), 7);
        assert!(has_bond(&g, "C", 1, "N", 2));
        assert!(has_bond(&g, "C", 1, "O", 1));
        assert!(!has_bond(&g, "N", 1, "N", 2));
        assert_eq!(g.atoms[4].residue_id, Some(2));
        assert_eq!(g.atoms[4].residue_name.as_deref(), Some("GLY"));
    }

    #[test]
    fn alanine_sidechain() {
        let g = parse_pdb(ALA).unwrap();
        assert_eq!(g.atoms.len(), 5);
        let cb = g.atoms.iter().position(|a| a.name.as_deref() == Some("CB")).unwrap();
        assert_eq!(g.atoms[cb].backbone_flag, Some(false));
        assert!(has_bond(&g, "CA", 1, "CB", 1));
        assert_eq!(g.bonds.len(), 4);
    }

    #[test]
    fn distant_residues_get_no_peptide_bond() {
        let shifted: String = GLY_GLY
            .lines()
            .map(|l| {
                if l.contains("GLY A   2") {
                    let x: f64 = l[30..38].trim().parse::<f64>().unwrap() + 5.0;
                    format!("{}{:>8.3}{}", &l[..30], x, &l[38..])
                } else {
                    l.to_string()
                }
            })
            .collect::<Vec<_>>()
            .join("\n");
        let g = parse_pdb(&shifted).unwrap();
        assert_eq!(g.bonds.len(), 6);
    }

    #[test]
    fn empty_input() {
        assert!(matches!(parse_pdb(""), Err(MolIoError::NoAtomRecords)));
        let e = parse_pdb("HEADER x\nEND\n").unwrap_err();
        assert_eq!(e.to_string(), "no ATOM records");
    }

    #[test]
    fn bad_coordinate() {
        let text = ALA.replace("  -0.677", "   abcde");
        assert!(matches!(parse_pdb(&text), Err(MolIoError::Parse { line: 1, .. })));
    }

    #[test]
    fn nonstandard_residue_uses_distance_rule() {
        let text = "\
ATOM      1  C1  LIG A   1       0.000   0.000   0.000  1.00  0.00           C
ATOM      2  C2  LIG A   1       1.500   0.000   0.000  1.00  0.00           C
ATOM      3  O3  LIG A   1       3.500   0.000   0.000  1.00  0.00           O
";
        let g = parse_pdb(text).unwrap();
        assert_eq!(g.bonds, vec![Bond::new(0, 1, BondOrder::Single)]);
    }

    #[test]
    fn write_then_parse_is_stable() {
        let g = parse_pdb(GLY_GLY).unwrap();
        let again = parse_pdb(&write_pdb(&g)).unwrap();
        assert_eq!(g, again);
    }
}
