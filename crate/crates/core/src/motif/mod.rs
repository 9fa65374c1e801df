//! Motif-graph construction.
//!
//! A compound is fragmented by breaking every single bond that is not part of
//! a ring; double, triple, aromatic and ring bonds are kept. Each connected
//! component of the kept bonds is one motif, positioned at the centroid of its
//! atoms. Proteins keep one backbone motif `{N, CA, C, O}` per residue and
//! fragment only the sidechains, always cutting CA–CB.

mod rings;

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::molio::{AtomGraph, BondOrder};

pub use rings::{find_bridges, find_ring_bonds};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MotifKind {
    Ring,
    Chain,
    Backbone,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotifGraph {
    /// Atom indices of each motif, ascending; motifs ordered by first member.
    pub motifs: Vec<Vec<usize>>,
    #[serde(rename = "edges")]
    pub motif_edges: Vec<[usize; 2]>,
    pub centroids: Vec<[f64; 3]>,
    pub kinds: Vec<MotifKind>,
    /// Motif index for every atom.
    #[serde(skip)]
    pub parent: Vec<usize>,
    /// Bond indices of the original graph that were broken.
    #[serde(skip)]
    pub cut_bonds: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl MotifGraph {
    pub fn len(&self) -> usize {
        self.motifs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.motifs.is_empty()
    }

    /// Recomputes centroids for new coordinates of the same atoms.
    pub fn centroids_for(&self, coords: &[[f64; 3]]) -> Vec<[f64; 3]> {
        self.motifs.iter().map(|m| centroid(m, coords)).collect()
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }
}

pub fn centroid(members: &[usize], coords: &[[f64; 3]]) -> [f64; 3] {
    let mut c = [0.0; 3];
    for &a in members {
        for k in 0..3 {
            c[k] += coords[a][k];
        }
    }
    let n = members.len() as f64;
    c.map(|v| v / n)
}

/// Partitions atoms into connected components of the kept bonds and builds
/// the quotient edge set from the remaining bonds.
fn build(
    g: &AtomGraph,
    keep: &[bool],
    ring: &BTreeSet<usize>,
    kind_of: impl Fn(&[usize], bool) -> MotifKind,
) -> MotifGraph {
    let n = g.atoms.len();
    let adj = g.adjacency();
    let mut parent = vec![usize::MAX; n];
    let mut motifs = Vec::new();
    let mut has_ring = Vec::new();
    for start in 0..n {
        if parent[start] != usize::MAX {
            continue;
        }
        let id = motifs.len();
        let mut members = vec![start];
        let mut ringy = false;
        parent[start] = id;
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            for &(w, bond) in &adj[v] {
                if !keep[bond] {
                    continue;
                }
                ringy |= ring.contains(&bond);
                if parent[w] == usize::MAX {
                    parent[w] = id;
                    members.push(w);
                    queue.push_back(w);
                }
            }
        }
        members.sort_unstable();
        motifs.push(members);
        has_ring.push(ringy);
    }

    let mut cut_bonds = Vec::new();
    let mut edges = BTreeSet::new();
    for (k, b) in g.bonds.iter().enumerate() {
        if keep[k] {
            continue;
        }
        cut_bonds.push(k);
        let (a, c) = (parent[b.i], parent[b.j]);
        if a != c {
            edges.insert([a.min(c), a.max(c)]);
        }
    }

    let kinds = motifs.iter().zip(&has_ring).map(|(m, &r)| kind_of(m, r)).collect();
    MotifGraph {
        centroids: motifs.iter().map(|m| centroid(m, &g.coords)).collect(),
        motifs,
        motif_edges: edges.into_iter().collect(),
        kinds,
        parent,
        cut_bonds,
        warnings: Vec::new(),
    }
}

fn compound_keeps(order: BondOrder, in_ring: bool) -> bool {
    order != BondOrder::Single || in_ring
}

/// Breaks every non-ring single bond; keeps multiple, aromatic and ring bonds.
pub fn decompose_compound(g: &AtomGraph) -> MotifGraph {
    let ring = find_ring_bonds(g);
    let keep: Vec<bool> = g.bonds.iter().enumerate().map(|(k, b)| compound_keeps(b.order, ring.contains(&k))).collect();
    build(g, &keep, &ring, |_, r| if r { MotifKind::Ring } else { MotifKind::Chain })
}

/// Residue index per atom: consecutive runs of equal (chain, id, name).
fn residue_runs(g: &AtomGraph) -> Vec<usize> {
    let mut out = Vec::with_capacity(g.atoms.len());
    let mut current = 0;
    for (k, a) in g.atoms.iter().enumerate() {
        if k > 0 {
            let p = &g.atoms[k - 1];
            if (&p.chain_id, p.residue_id, &p.residue_name) != (&a.chain_id, a.residue_id, &a.residue_name) {
                current += 1;
            }
        }
        out.push(current);
    }
    out
}

/// Per-residue backbone motifs; sidechains fragmented with the compound rule.
pub fn decompose_protein(g: &AtomGraph) -> MotifGraph {
    let ring = find_ring_bonds(g);
    let residue = residue_runs(g);
    let n_res = residue.last().map_or(0, |r| r + 1);
    let mut has_backbone = vec![false; n_res];
    for (a, atom) in g.atoms.iter().enumerate() {
        if atom.is_backbone() {
            has_backbone[residue[a]] = true;
        }
    }
    let mut warnings = Vec::new();
    for (r, &ok) in has_backbone.iter().enumerate() {
        if !ok {
            let first = residue.iter().position(|&x| x == r).unwrap_or(0);
            let atom = &g.atoms[first];
            warnings.push(format!(
                "residue {} {} has no backbone atoms; fragmented with the compound rule",
                atom.residue_name.as_deref().unwrap_or("?"),
                atom.residue_id.map_or("?".to_string(), |v| v.to_string())
            ));
        }
    }
    let is_bb = |a: usize| g.atoms[a].is_backbone() && has_backbone[residue[a]];

    let keep: Vec<bool> = g
        .bonds
        .iter()
        .enumerate()
        .map(|(k, b)| {
            if residue[b.i] != residue[b.j] {
                return false;
            }
            match (is_bb(b.i), is_bb(b.j)) {
                (true, true) => true,
                (false, false) => compound_keeps(b.order, ring.contains(&k)),
                _ => false,
            }
        })
        .collect();

    let mut mg = build(g, &keep, &ring, |m, r| {
        if m.iter().all(|&a| is_bb(a)) {
            MotifKind::Backbone
        } else if r {
            MotifKind::Ring
        } else {
            MotifKind::Chain
        }
    });
    mg.warnings = warnings;
    mg
}

/// Mean of member-atom vectors for every motif.
pub fn motif_init_embedding(mg: &MotifGraph, atom_embeddings: &[Vec<f64>]) -> Vec<Vec<f64>> {
    mg.motifs
        .iter()
        .map(|m| {
            let dim = atom_embeddings[m[0]].len();
            let mut acc = vec![0.0; dim];
            for &a in m {
                for (s, v) in acc.iter_mut().zip(&atom_embeddings[a]) {
                    *s += v;
                }
            }
            acc.iter().map(|v| v / m.len() as f64).collect()
        })
        .collect()
}
