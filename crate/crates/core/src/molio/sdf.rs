//! MDL molfile / SD file (V2000 subset) reader and writer.
//!
//! Only the first record of an SD file is read. Charges, isotopes and stereo
//! columns are accepted but not stored. Hydrogens are removed and the bond
//! block is re-indexed over the remaining heavy atoms.

use std::fmt::Write as _;

use super::graph::{is_hydrogen_symbol, Atom, AtomGraph, Bond, BondOrder};
use super::MolIoError;

fn err(line: usize, msg: impl Into<String>) -> MolIoError {
    MolIoError::Parse { line, msg: msg.into() }
}

/// Reads `width` columns starting at `start`, tolerating short lines.
fn column(line: &str, start: usize, width: usize) -> &str {
    let end = (start + width).min(line.len());
    if start >= end {
        return "";
    }
    line.get(start..end).unwrap_or("").trim()
}

fn parse_counts(line: &str, lineno: usize) -> Result<(usize, usize), MolIoError> {
    if line.contains("V3000") {
        return Err(err(lineno, "V3000 molfiles are not supported"));
    }
    let fixed = (column(line, 0, 3).parse::<usize>(), column(line, 3, 3).parse::<usize>());
    if let (Ok(a), Ok(b)) = fixed {
        return Ok((a, b));
    }
    let mut fields = line.split_whitespace();
    let atoms = fields.next().and_then(|s| s.parse().ok());
    let bonds = fields.next().and_then(|s| s.parse().ok());
    match (atoms, bonds) {
        (Some(a), Some(b)) => Ok((a, b)),
        _ => Err(err(lineno, format!("malformed counts line {line:?}"))),
    }
}

fn parse_atom_line(line: &str, lineno: usize) -> Result<(String, [f64; 3]), MolIoError> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() < 4 {
        return Err(err(lineno, "atom line has fewer than 4 fields (atom/bond count mismatch?)"));
    }
    let mut xyz = [0.0; 3];
    for (k, v) in xyz.iter_mut().enumerate() {
        *v = fields[k].parse::<f64>().map_err(|_| err(lineno, format!("bad coordinate {:?}", fields[k])))?;
        if !v.is_finite() {
            return Err(err(lineno, "non-finite coordinate"));
        }
    }
    let symbol = fields[3];
    if !symbol.chars().next().is_some_and(|c| c.is_ascii_alphabetic()) {
        return Err(err(lineno, format!("bad element symbol {symbol:?}")));
    }
    Ok((normalize_symbol(symbol), xyz))
}

pub(crate) fn normalize_symbol(symbol: &str) -> String {
    let mut chars = symbol.chars();
    match chars.next() {
        Some(first) => {
            let mut s = first.to_ascii_uppercase().to_string();
            s.extend(chars.map(|c| c.to_ascii_lowercase()));
            s
        }
        None => String::new(),
    }
}

fn parse_bond_line(line: &str, lineno: usize, n_atoms: usize) -> Result<(usize, usize, BondOrder), MolIoError> {
    let fixed =
        (column(line, 0, 3).parse::<usize>(), column(line, 3, 3).parse::<usize>(), column(line, 6, 3).parse::<u8>());
    let (a, b, code) = match fixed {
        (Ok(a), Ok(b), Ok(c)) => (a, b, c),
        _ => {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() < 3 {
                return Err(err(lineno, "bond line has fewer than 3 fields (atom/bond count mismatch?)"));
            }
            let p = |s: &str| s.parse::<usize>().map_err(|_| err(lineno, format!("bad bond field {s:?}")));
            let code = f[2].parse::<u8>().map_err(|_| err(lineno, format!("bad bond type {:?}", f[2])))?;
            (p(f[0])?, p(f[1])?, code)
        }
    };
    if a == 0 || b == 0 || a > n_atoms || b > n_atoms {
        return Err(err(lineno, format!("bond references atom out of range 1..={n_atoms}: {a} {b}")));
    }
    let order = BondOrder::from_mdl_code(code).ok_or_else(|| err(lineno, format!("unknown bond type code {code}")))?;
    Ok((a - 1, b - 1, order))
}

/// Parses the first V2000 record of an SD/MOL text.
pub fn parse_sdf(text: &str) -> Result<AtomGraph, MolIoError> {
    let lines: Vec<&str> = text.lines().collect();
    if lines.len() < 4 {
        return Err(err(lines.len().max(1), "record ends before the counts line"));
    }
    let (n_atoms, n_bonds) = parse_counts(lines[3], 4)?;
    let atom_start = 4;
    let bond_start = atom_start + n_atoms;
    let needed = bond_start + n_bonds;
    if lines.len() < needed {
        return Err(err(
            lines.len(),
            format!("counts line declares {n_atoms} atoms and {n_bonds} bonds but the record ends early"),
        ));
    }

    let mut raw_atoms = Vec::with_capacity(n_atoms);
    for (k, line) in lines[atom_start..bond_start].iter().enumerate() {
        raw_atoms.push(parse_atom_line(line, atom_start + k + 1)?);
    }

    let mut remap = vec![usize::MAX; n_atoms];
    let mut atoms = Vec::new();
    let mut coords = Vec::new();
    for (k, (symbol, xyz)) in raw_atoms.into_iter().enumerate() {
        if is_hydrogen_symbol(&symbol) {
            continue;
        }
        remap[k] = atoms.len();
        atoms.push(Atom::new(symbol));
        coords.push(xyz);
    }

    let mut bonds = Vec::with_capacity(n_bonds);
    let mut seen = std::collections::HashSet::new();
    for (k, line) in lines[bond_start..needed].iter().enumerate() {
        let lineno = bond_start + k + 1;
        let (a, b, order) = parse_bond_line(line, lineno, n_atoms)?;
        if a == b {
            return Err(err(lineno, format!("bond from atom {} to itself", a + 1)));
        }
        if remap[a] == usize::MAX || remap[b] == usize::MAX {
            continue;
        }
        let (i, j) = (remap[a], remap[b]);
        if !seen.insert((i.min(j), i.max(j))) {
            return Err(err(lineno, format!("duplicate bond {} {}", a + 1, b + 1)));
        }
        bonds.push(Bond::new(i, j, order));
    }

    AtomGraph::new(atoms, bonds, coords)
}

/// Writes a V2000 record. Coordinates are printed with four decimals.
pub fn write_sdf(g: &AtomGraph, title: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{title}");
    let _ = writeln!(out, "  hiercpi");
    let _ = writeln!(out);
    let _ = writeln!(out, "{:>3}{:>3}  0  0  0  0  0  0  0  0999 V2000", g.atoms.len(), g.bonds.len());
    for (atom, p) in g.atoms.iter().zip(&g.coords) {
        let _ = writeln!(
            out,
            "{:>10.4}{:>10.4}{:>10.4} {:<3} 0  0  0  0  0  0  0  0  0  0  0  0",
            p[0], p[1], p[2], atom.element
        );
    }
    for b in &g.bonds {
        let _ = writeln!(out, "{:>3}{:>3}{:>3}  0", b.i + 1, b.j + 1, b.order.mdl_code());
    }
    out.push_str("M  END\n$$$$\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const ETHANE: &str = "ethane\n  test\n\n  8  7  0  0  0  0  0  0  0  0999 V2000
    0.7620    0.0000    0.0000 C   0  0  0  0  0  0  0  0  0  0  0  0
   -0.7620    0.0000    0.0000 C   0  0  0  0  0  0  0  0  0  0  0  0
    1.1560    1.0270    0.0000 H   0  0  0  0  0  0  0  0  0  0  0  0
    1.1560   -0.5140    0.8900 H   0  0  0  0  0  0  0  0  0  0  0  0
    1.1560   -0.5140   -0.8900 H   0  0  0  0  0  0  0  0  0  0  0  0
   -1.1560   -1.0270    0.0000 H   0  0  0  0  0  0  0  0  0  0  0  0
   -1.1560    0.5140    0.8900 H   0  0  0  0  0  0  0  0  0  0  0  0
   -1.1560    0.5140   -0.8900 H   0  0  0  0  0  0  0  0  0  0  0  0
  1  2  1  0
  1  3  1  0
  1  4  1  0
  1  5  1  0
  2  6  1  0
  2  7  1  0
  2  8  1  0
M  END
$$$$
";

    /// Benzene assembled from the V2000 column layout: a regular hexagon of
    /// radius 1.39 Å with aromatic (type 4) bonds between neighbours.
    fn benzene_record() -> String {
        let mut s = String::from("benzene\n  hand\n\n  6  6  0  0  0  0  0  0  0  0999 V2000\n");
        for k in 0..6 {
            let a = std::f64::consts::PI / 3.0 * k as f64;
            s.push_str(&format!(
                "{:>10.4}{:>10.4}{:>10.4} C   0  0  0  0  0  0  0  0  0  0  0  0\n",
                1.39 * a.cos(),
                1.39 * a.sin(),
                0.0
            ));
        }
        for k in 0..6 {
            s.push_str(&format!("{:>3}{:>3}  4  0\n", k + 1, (k + 1) % 6 + 1));
        }
        s.push_str("M  END\n");
        s
    }

    #[test]
    fn ethane_drops_hydrogens() {
        let g = parse_sdf(ETHANE).unwrap();
        assert_eq!(g.atoms.len(), 2);
        assert_eq!(g.bonds, vec![Bond::new(0, 1, BondOrder::Single)]);
        assert_eq!(g.coords[1], [-0.762, 0.0, 0.0]);
    }

    #[test]
    fn benzene_aromatic_round_trip() {
        let g = parse_sdf(&benzene_record()).unwrap();
        assert_eq!(g.atoms.len(), 6);
        assert_eq!(g.bonds.len(), 6);
        assert!(g.bonds.iter().all(|b| b.order == BondOrder::Aromatic));
        let again = parse_sdf(&write_sdf(&g, "benzene")).unwrap();
        assert_eq!(g, again);
    }

    #[test]
    fn zero_atom_index_is_rejected() {
        let text = ETHANE.replace("  1  2  1  0", "  0  2  1  0");
        match parse_sdf(&text) {
            Err(MolIoError::Parse { line, msg }) => {
                assert_eq!(line, 13);
                assert!(msg.contains("out of range"), "{msg}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_bond_code_names_line() {
        let text = ETHANE.replace("  1  2  1  0", "  1  2  9  0");
        match parse_sdf(&text) {
            Err(MolIoError::Parse { line: 13, msg }) => assert!(msg.contains("unknown bond type code 9")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_counts_line() {
        let text = ETHANE.replace("  8  7  0", "  x  y  0");
        assert!(matches!(parse_sdf(&text), Err(MolIoError::Parse { line: 4, .. })));
    }

    #[test]
    fn truncated_record_is_count_mismatch() {
        let text: String = ETHANE.lines().take(10).collect::<Vec<_>>().join("\n");
        assert!(matches!(parse_sdf(&text), Err(MolIoError::Parse { .. })));
        let text = ETHANE.replace("  8  7  0  0", "  9  7  0  0");
        assert!(parse_sdf(&text).is_err());
    }

    #[test]
    fn v3000_rejected() {
        let text = ETHANE.replace("V2000", "V3000");
        assert!(parse_sdf(&text).is_err());
    }
}
