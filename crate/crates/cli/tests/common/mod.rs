#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hiercpi::molio::residues::atom_names;
use hiercpi::molio::{parse_pdb, write_sdf, Atom, AtomGraph, Bond, BondOrder};

pub fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_hiercpi"));
    c.env("RUST_LOG", "warn");
    c
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

/// Heavy-atom compound graph from elements, bonds `(i, j, order)` and a
/// loose zig-zag layout. Decomposition only looks at topology.
pub fn compound(elements: &[&str], bonds: &[(usize, usize, u8)]) -> AtomGraph {
    let atoms = elements.iter().map(|e| Atom::new(*e)).collect();
    let bonds =
        bonds.iter().map(|&(i, j, o)| Bond::new(i, j, BondOrder::from_mdl_code(o).expect("bond order"))).collect();
    let coords = (0..elements.len()).map(|k| [1.4 * k as f64, 0.8 * (k % 2) as f64, 0.1 * (k % 3) as f64]).collect();
    AtomGraph::new(atoms, bonds, coords).unwrap()
}

pub fn ethane() -> AtomGraph {
    compound(&["C", "C"], &[(0, 1, 1)])
}

pub fn benzene() -> AtomGraph {
    let mut g = compound(&["C"; 6], &[(0, 1, 4), (1, 2, 4), (2, 3, 4), (3, 4, 4), (4, 5, 4), (5, 0, 4)]);
    for k in 0..6 {
        let a = k as f64 * std::f64::consts::PI / 3.0;
        g.coords[k] = [1.39 * a.cos(), 1.39 * a.sin(), 0.0];
    }
    g
}

pub fn sdf(g: &AtomGraph) -> String {
    write_sdf(g, "fixture")
}

/// ATOM records for a chain of standard residues. Residue `i` starts at
/// x = 3.8·i so that C(i)–N(i+1) falls inside the peptide-bond cutoff;
/// sidechain atoms hang below CA.
pub fn peptide_pdb(residues: &[&str], offset: [f64; 3]) -> String {
    let mut out = String::new();
    let mut serial = 1;
    for (r, res) in residues.iter().enumerate() {
        let x0 = 3.8 * r as f64;
        for (k, name) in atom_names(res).expect("standard residue").iter().enumerate() {
            let p = match *name {
                "N" => [x0, 0.0, 0.0],
                "CA" => [x0 + 1.46, 0.0, 0.0],
                "C" => [x0 + 2.5, 0.9, 0.0],
                "O" => [x0 + 2.5, 2.1, 0.0],
                _ => [x0 + 1.46 + 0.3 * (k % 2) as f64, -1.5 * (k as f64 - 3.0), 0.4 * (k % 3) as f64],
            };
            let elem = &name[..1];
            out.push_str(&format!(
                "ATOM  {serial:>5} {:<4} {res:>3} A{:>4}    {:>8.3}{:>8.3}{:>8.3}  1.00  0.00          {elem:>2}\n",
                if name.len() < 4 { format!(" {name}") } else { name.to_string() },
                r + 1,
                p[0] + offset[0],
                p[1] + offset[1],
                p[2] + offset[2],
            ));
            serial += 1;
        }
    }
    out.push_str("END\n");
    out
}

pub fn peptide(residues: &[&str]) -> AtomGraph {
    parse_pdb(&peptide_pdb(residues, [0.0; 3])).unwrap()
}

/// A three-atom compound (C–O–C) sitting 3.5 Å above a glycine.
pub fn tiny_complex(dir: &Path) -> (PathBuf, PathBuf) {
    let mut g = compound(&["C", "O", "C"], &[(0, 1, 1), (1, 2, 1)]);
    g.coords = vec![[0.2, 0.5, 3.5], [1.4, 0.9, 3.6], [2.5, 0.3, 3.4]];
    (write(dir, "tiny.sdf", &sdf(&g)), write(dir, "gly.pdb", &peptide_pdb(&["GLY"], [0.0; 3])))
}

/// TOML run config with a small model.
pub fn tiny_config(dir: &Path, name: &str, manifest: &Path, optim: &str) -> PathBuf {
    let text = format!(
        "seed = 11\n\
         [model]\nlayers = 1\nheads = 2\nd_model = 8\nkernels = 4\nffn_dim = 16\nhead_hidden = 8\n\
         [optim]\nlr = 0.01\nthreads = 1\n{optim}\n\
         [paths]\nmanifest = {:?}\ncheckpoint_dir = {:?}\nreport_dir = {:?}\n",
        manifest,
        dir.join(format!("{name}_ck")),
        dir.join(format!("{name}_rep")),
    );
    write(dir, &format!("{name}.toml"), &text)
}

/// Bonds from a list such as `"0-1 1=2 2#3 3:4"`: `-` single, `=` double,
/// `#` triple, `:` aromatic.
pub fn bonds(list: &str) -> Vec<(usize, usize, u8)> {
    list.split_whitespace()
        .map(|b| {
            let k = b.find(['-', '=', '#', ':']).expect("bond symbol");
            let order = match &b[k..k + 1] {
                "-" => 1,
                "=" => 2,
                "#" => 3,
                _ => 4,
            };
            (b[..k].parse().unwrap(), b[k + 1..].parse().unwrap(), order)
        })
        .collect()
}
