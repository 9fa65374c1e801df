use serde::{Deserialize, Serialize};

use super::MolIoError;

/// Bond multiplicity as read from the input file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    pub fn from_mdl_code(code: u8) -> Option<Self> {
        match code {
            1 => Some(BondOrder::Single),
            2 => Some(BondOrder::Double),
            3 => Some(BondOrder::Triple),
            4 => Some(BondOrder::Aromatic),
            _ => None,
        }
    }

    pub fn mdl_code(self) -> u8 {
        match self {
            BondOrder::Single => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
            BondOrder::Aromatic => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub element: String,
    /// PDB atom name (`CA`, `OG1`, ...); absent for ligand records.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chain_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residue_id: Option<i32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residue_name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backbone_flag: Option<bool>,
}

impl Atom {
    pub fn new(element: impl Into<String>) -> Self {
        Atom {
            element: element.into(),
            name: None,
            chain_id: None,
            residue_id: None,
            residue_name: None,
            backbone_flag: None,
        }
    }

    pub fn is_hydrogen(&self) -> bool {
        is_hydrogen_symbol(&self.element)
    }

    pub fn is_backbone(&self) -> bool {
        self.backbone_flag.unwrap_or(false)
    }
}

pub(crate) fn is_hydrogen_symbol(symbol: &str) -> bool {
    matches!(symbol, "H" | "D" | "T")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bond {
    pub i: usize,
    pub j: usize,
    pub order: BondOrder,
}

impl Bond {
    pub fn new(i: usize, j: usize, order: BondOrder) -> Self {
        Bond { i, j, order }
    }

    pub fn other(&self, atom: usize) -> usize {
        if self.i == atom {
            self.j
        } else {
            self.i
        }
    }
}

/// Heavy-atom molecular graph with 3-D coordinates in Å.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AtomGraph {
    pub atoms: Vec<Atom>,
    pub bonds: Vec<Bond>,
    pub coords: Vec<[f64; 3]>,
}

impl AtomGraph {
    /// Builds a graph and checks every structural invariant.
    pub fn new(atoms: Vec<Atom>, bonds: Vec<Bond>, coords: Vec<[f64; 3]>) -> Result<Self, MolIoError> {
        let g = AtomGraph { atoms, bonds, coords };
        g.validate()?;
        Ok(g)
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn validate(&self) -> Result<(), MolIoError> {
        let n = self.atoms.len();
        if self.coords.len() != n {
            return Err(MolIoError::Invalid(format!("{} coordinates for {} atoms", self.coords.len(), n)));
        }
        if let Some(k) = self.coords.iter().position(|p| p.iter().any(|v| !v.is_finite())) {
            return Err(MolIoError::Invalid(format!("atom {k} has a non-finite coordinate")));
        }
        if let Some(k) = self.atoms.iter().position(Atom::is_hydrogen) {
            return Err(MolIoError::Invalid(format!("atom {k} is a hydrogen")));
        }
        let mut seen = std::collections::HashSet::with_capacity(self.bonds.len());
        for (k, b) in self.bonds.iter().enumerate() {
            if b.i >= n || b.j >= n {
                return Err(MolIoError::Invalid(format!("bond {k} ({}, {}) out of range for {n} atoms", b.i, b.j)));
            }
            if b.i == b.j {
                return Err(MolIoError::Invalid(format!("bond {k} is a self-loop on atom {}", b.i)));
            }
            if !seen.insert((b.i.min(b.j), b.i.max(b.j))) {
                return Err(MolIoError::Invalid(format!("duplicate bond between atoms {} and {}", b.i, b.j)));
            }
        }
        Ok(())
    }

    /// Per-atom list of `(neighbour, bond index)`.
    pub fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.atoms.len()];
        for (k, b) in self.bonds.iter().enumerate() {
            adj[b.i].push((b.j, k));
            adj[b.j].push((b.i, k));
        }
        adj
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }

    pub fn from_json(text: &str) -> Result<Self, MolIoError> {
        let g: AtomGraph = serde_json::from_str(text).map_err(|e| MolIoError::Invalid(format!("graph JSON: {e}")))?;
        g.validate()?;
        Ok(g)
    }
}

pub fn distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}
