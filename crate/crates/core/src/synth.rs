//! Random small compound–protein complexes for tests and demos.
//!
//! Compounds are an optional irregular six-membered ring with a random tree
//! of at least two substituents. Proteins are chains of acyclic standard
//! residues laid out by a self-avoiding random walk over their bond
//! templates. The compound is slid towards a random protein atom until the
//! closest contact is about 4.4 Å. Labels are a fixed function of the
//! structure.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::molio::{
    distance, min_cross_distance, parse_pdb, parse_sdf, residues, validate_complex, write_pdb, write_sdf, Atom,
    AtomGraph, Bond, BondOrder, Complex,
};
use crate::motif::{decompose_compound, MotifKind};
use crate::training::{write_manifest, ManifestEntry, ManifestError, RigidTransform};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOptions {
    pub compound_atoms: (usize, usize),
    pub protein_atoms: (usize, usize),
}

impl Default for SynthOptions {
    fn default() -> Self {
        SynthOptions { compound_atoms: (5, 20), protein_atoms: (20, 60) }
    }
}

const RESIDUES: [&str; 15] =
    ["GLY", "ALA", "SER", "CYS", "VAL", "THR", "LEU", "ILE", "MET", "ASP", "GLU", "ASN", "GLN", "LYS", "ARG"];
const MIN_NONBONDED: f64 = 2.3;

fn random_unit(rng: &mut impl Rng) -> [f64; 3] {
    loop {
        let p: [f64; 3] = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let n = p.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > 0.1 && n <= 1.0 {
            return p.map(|v| v / n);
        }
    }
}

/// A point `len` Å from `coords[from]` that keeps `MIN_NONBONDED` from every
/// other placed atom, or `None` after a bounded number of tries.
fn place(rng: &mut impl Rng, coords: &[[f64; 3]], from: usize, len: f64) -> Option<[f64; 3]> {
    for _ in 0..200 {
        let u = random_unit(rng);
        let o = coords[from];
        let p = [o[0] + len * u[0], o[1] + len * u[1], o[2] + len * u[2]];
        if coords.iter().enumerate().all(|(k, q)| k == from || distance(&p, q) >= MIN_NONBONDED) {
            return Some(p);
        }
    }
    None
}

fn pick_element(rng: &mut impl Rng) -> &'static str {
    let r: f64 = rng.gen();
    match r {
        r if r < 0.6 => "C",
        r if r < 0.75 => "N",
        r if r < 0.9 => "O",
        r if r < 0.95 => "S",
        _ => "Cl",
    }
}

pub fn synth_compound(rng: &mut impl Rng, atoms: (usize, usize)) -> AtomGraph {
    loop {
        if let Some(g) = try_compound(rng, atoms) {
            return g;
        }
    }
}

fn try_compound(rng: &mut impl Rng, atoms: (usize, usize)) -> Option<AtomGraph> {
    let target = rng.gen_range(atoms.0..=atoms.1);
    let mut elements: Vec<&str> = Vec::new();
    let mut coords: Vec<[f64; 3]> = Vec::new();
    let mut bonds = Vec::new();
    if target >= 8 && rng.gen_bool(0.6) {
        let order = if rng.gen_bool(0.5) { BondOrder::Aromatic } else { BondOrder::Single };
        // Irregular puckered ring: no two ring atoms are related by an isometry.
        for k in 0..6 {
            let a = std::f64::consts::TAU * k as f64 / 6.0 + rng.gen_range(-0.15..0.15);
            let r = rng.gen_range(1.3..1.5);
            let z = if k % 2 == 0 { 0.25 } else { -0.25 } + rng.gen_range(-0.15..0.15);
            elements.push(if k == 3 && rng.gen_bool(0.3) { "N" } else { "C" });
            coords.push([r * a.cos(), r * a.sin(), z]);
            bonds.push(Bond::new(k, (k + 1) % 6, order));
        }
    } else {
        elements.push("C");
        coords.push([0.0; 3]);
    }
    let mut degree = vec![0usize; elements.len()];
    for b in &bonds {
        degree[b.i] += 1;
        degree[b.j] += 1;
    }
    while elements.len() < target {
        let open: Vec<usize> = (0..elements.len()).filter(|&k| degree[k] < 3 && elements[k] != "Cl").collect();
        let &parent = open.choose(rng)?;
        let el = pick_element(rng);
        let p = place(rng, &coords, parent, 1.5)?;
        let order = if el == "O" && elements[parent] == "C" && degree[parent] < 2 && rng.gen_bool(0.5) {
            BondOrder::Double
        } else {
            BondOrder::Single
        };
        bonds.push(Bond::new(parent, elements.len(), order));
        degree[parent] += 1;
        degree.push(1);
        elements.push(el);
        coords.push(p);
    }
    AtomGraph::new(elements.into_iter().map(Atom::new).collect(), bonds, coords).ok()
}

pub fn synth_protein(rng: &mut impl Rng, atoms: (usize, usize)) -> AtomGraph {
    loop {
        if let Some(g) = try_protein(rng, atoms) {
            return g;
        }
    }
}

fn try_protein(rng: &mut impl Rng, atoms: (usize, usize)) -> Option<AtomGraph> {
    let target = rng.gen_range(atoms.0..=atoms.1);
    let mut out_atoms: Vec<Atom> = Vec::new();
    let mut coords: Vec<[f64; 3]> = Vec::new();
    let mut prev_c: Option<usize> = None;
    let mut res_id = 1;
    while out_atoms.len() < target {
        let room = atoms.1 - out_atoms.len();
        let fitting: Vec<&str> =
            RESIDUES.iter().copied().filter(|r| residues::atom_names(r).map_or(0, |n| n.len()) <= room).collect();
        let &res = fitting.choose(rng)?;
        let names = residues::atom_names(res)?;
        let template = residues::template(res)?;
        let start = out_atoms.len();
        let index_of = |name: &str| names.iter().position(|n| *n == name).map(|k| start + k);
        let mut placed = vec![false; names.len()];
        let mut pos = vec![[0.0; 3]; names.len()];
        // N first: bonded to the previous carbonyl carbon, or at the origin.
        pos[0] = match prev_c {
            Some(c) => place(rng, &coords, c, 1.33)?,
            None => [0.0; 3],
        };
        placed[0] = true;
        let mut all = coords.clone();
        all.push(pos[0]);
        let mut slot_of = vec![usize::MAX; names.len()];
        slot_of[0] = all.len() - 1;
        let mut progress = true;
        while progress {
            progress = false;
            for (a, b, _) in &template {
                let (Some(ia), Some(ib)) = (index_of(a), index_of(b)) else { continue };
                let (ka, kb) = (ia - start, ib - start);
                for (from, to) in [(ka, kb), (kb, ka)] {
                    if placed[from] && !placed[to] {
                        let p = place(rng, &all, slot_of[from], 1.5)?;
                        pos[to] = p;
                        placed[to] = true;
                        all.push(p);
                        slot_of[to] = all.len() - 1;
                        progress = true;
                    }
                }
            }
        }
        if placed.iter().any(|p| !p) {
            return None;
        }
        for (k, name) in names.iter().enumerate() {
            let mut a = Atom::new(&name[..1]);
            a.name = Some(name.to_string());
            a.chain_id = Some("A".into());
            a.residue_id = Some(res_id);
            a.residue_name = Some(res.to_string());
            a.backbone_flag = Some(residues::BACKBONE_NAMES.contains(name));
            out_atoms.push(a);
            coords.push(pos[k]);
        }
        prev_c = index_of("C");
        res_id += 1;
    }
    if out_atoms.len() < atoms.0 {
        return None;
    }
    // Bonds are rebuilt from the templates when the text is parsed back.
    let text = write_pdb(&AtomGraph { atoms: out_atoms, bonds: vec![], coords });
    parse_pdb(&text).ok()
}

/// Deterministic label in pKa units from size, rings and close contacts.
pub fn pseudo_affinity(compound: &AtomGraph, protein: &AtomGraph) -> f64 {
    let rings = decompose_compound(compound).kinds.iter().filter(|k| **k == MotifKind::Ring).count();
    let close =
        compound.coords.iter().map(|a| protein.coords.iter().filter(|b| distance(a, b) < 8.0).count()).sum::<usize>();
    let hetero = compound.atoms.iter().filter(|a| a.element != "C").count();
    let v = 3.0
        + 0.15 * compound.len() as f64
        + 0.8 * rings as f64
        + 0.4 * hetero as f64
        + 4.0 * close as f64 / (compound.len() * protein.len()) as f64;
    (v * 1000.0).round() / 1000.0
}

/// One valid complex, already in the exact form its SDF/PDB text parses to.
pub fn synth_complex(rng: &mut impl Rng, id: &str, opts: &SynthOptions) -> Complex {
    let protein = synth_protein(rng, opts.protein_atoms);
    loop {
        let mut compound = synth_compound(rng, opts.compound_atoms);
        let spin = RigidTransform::sample(rng.gen());
        let c0 = compound.coords.clone();
        let anchor = protein.coords[rng.gen_range(0..protein.len())];
        let u = random_unit(rng);
        let mean = {
            let mut m = [0.0; 3];
            for p in &c0 {
                for k in 0..3 {
                    m[k] += p[k] / c0.len() as f64;
                }
            }
            m
        };
        let centred: Vec<[f64; 3]> = c0.iter().map(|p| [p[0] - mean[0], p[1] - mean[1], p[2] - mean[2]]).collect();
        let rotated = RigidTransform { translation: [0.0; 3], ..spin }.apply(&centred);
        let mut s = 30.0;
        let mut ok = false;
        while s > 0.0 {
            compound.coords = rotated
                .iter()
                .map(|p| [p[0] + anchor[0] + s * u[0], p[1] + anchor[1] + s * u[1], p[2] + anchor[2] + s * u[2]])
                .collect();
            let d = min_cross_distance(&compound, &protein);
            if d <= 4.5 {
                ok = d >= 3.0;
                break;
            }
            s -= 0.1;
        }
        if !ok {
            continue;
        }
        let Ok(compound) = parse_sdf(&write_sdf(&compound, id)) else { continue };
        let affinity = pseudo_affinity(&compound, &protein);
        if let Ok(c) = validate_complex(id, compound, protein.clone(), Some(affinity)) {
            return c;
        }
    }
}

/// Writes `n` complexes as `<id>.sdf` / `<id>.pdb` plus `manifest.jsonl` in `dir`.
pub fn write_dataset(dir: &Path, n: usize, seed: u64, opts: &SynthOptions) -> Result<Vec<Complex>, ManifestError> {
    let io = |path: &Path, source| ManifestError::Io { path: path.to_path_buf(), source };
    fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries = Vec::with_capacity(n);
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let id = format!("syn{k:04}");
        let c = synth_complex(&mut rng, &id, opts);
        let (sdf, pdb) = (format!("{id}.sdf"), format!("{id}.pdb"));
        fs::write(dir.join(&sdf), write_sdf(&c.compound, &id)).map_err(|e| io(&dir.join(&sdf), e))?;
        fs::write(dir.join(&pdb), write_pdb(&c.protein)).map_err(|e| io(&dir.join(&pdb), e))?;
        entries.push(ManifestEntry { id: id.clone(), compound_path: sdf, protein_path: pdb, affinity: c.affinity });
        out.push(c);
    }
    write_manifest(&dir.join("manifest.jsonl"), &entries)?;
    Ok(out)
}

/// `n` complexes generated in memory with the same stream as [`write_dataset`].
pub fn synth_set(n: usize, seed: u64, opts: &SynthOptions) -> Vec<Complex> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|k| synth_complex(&mut rng, &format!("syn{k:04}"), opts)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complexes_are_valid_and_in_range() {
        let opts = SynthOptions::default();
        for c in synth_set(12, 1, &opts) {
            assert!((5..=20).contains(&c.compound.len()), "{}", c.compound.len());
            assert!((20..=60).contains(&c.protein.len()), "{}", c.protein.len());
            let d = min_cross_distance(&c.compound, &c.protein);
            assert!((2.9..=4.6).contains(&d));
            assert!(c.affinity.unwrap().is_finite());
            assert!(c.protein.atoms.iter().all(|a| a.residue_name.is_some()));
        }
    }

    #[test]
    fn text_round_trip_is_exact() {
        for c in synth_set(6, 2, &SynthOptions::default()) {
            assert_eq!(parse_sdf(&write_sdf(&c.compound, &c.id)).unwrap(), c.compound);
            assert_eq!(parse_pdb(&write_pdb(&c.protein)).unwrap(), c.protein);
        }
    }

    #[test]
    fn same_seed_same_set() {
        let a = synth_set(3, 9, &SynthOptions::default());
        let b = synth_set(3, 9, &SynthOptions::default());
        assert_eq!(a, b);
    }

    #[test]
    fn dataset_loads_back() {
        let dir = std::env::temp_dir().join(format!("hiercpi-synth-{}", std::process::id()));
        let made = write_dataset(&dir, 3, 4, &SynthOptions::default()).unwrap();
        let entries = crate::training::read_manifest(&dir.join("manifest.jsonl")).unwrap();
        for (e, c) in entries.iter().zip(&made) {
            assert_eq!(&crate::training::load_complex(&dir, e).unwrap(), c);
        }
        fs::remove_dir_all(&dir).unwrap();
    }
}
