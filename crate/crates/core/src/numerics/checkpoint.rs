use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::params::ParamStore;
use super::{NumericsError, Tensor};

pub const CHECKPOINT_FORMAT: &str = "hiercpi-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredTensor {
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

/// Versioned JSON map `name -> {shape, values}` plus free-form metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    #[serde(default)]
    pub meta: serde_json::Value,
    pub params: BTreeMap<String, StoredTensor>,
}

impl Checkpoint {
    pub fn from_store(store: &ParamStore, meta: serde_json::Value) -> Self {
        let params = store
            .iter()
            .map(|(_, p)| {
                (p.name.clone(), StoredTensor { shape: p.tensor.shape().to_vec(), values: p.tensor.data().to_vec() })
            })
            .collect();
        Checkpoint { format: CHECKPOINT_FORMAT.into(), version: CHECKPOINT_VERSION, meta, params }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serialises")
    }

    pub fn from_json(text: &str) -> Result<Self, NumericsError> {
        let ck: Checkpoint =
            serde_json::from_str(text).map_err(|e| NumericsError::Checkpoint(format!("malformed checkpoint: {e}")))?;
        if ck.format != CHECKPOINT_FORMAT {
            return Err(NumericsError::Checkpoint(format!("unknown format {:?}", ck.format)));
        }
        if ck.version != CHECKPOINT_VERSION {
            return Err(NumericsError::Checkpoint(format!("unsupported version {}", ck.version)));
        }
        Ok(ck)
    }

    /// Overwrites every parameter of `store`; names and shapes must match exactly.
    pub fn load_into(&self, store: &mut ParamStore) -> Result<(), NumericsError> {
        let mut mismatches = Vec::new();
        for (_, p) in store.iter() {
            match self.params.get(&p.name) {
                None => mismatches.push(format!("{}: missing from checkpoint", p.name)),
                Some(s) if s.shape != p.tensor.shape() => mismatches.push(format!(
                    "{}: checkpoint shape {:?}, model shape {:?}",
                    p.name,
                    s.shape,
                    p.tensor.shape()
                )),
                Some(_) => {}
            }
        }
        for name in self.params.keys() {
            if store.id(name).is_none() {
                mismatches.push(format!("{name}: not a model parameter"));
            }
        }
        if !mismatches.is_empty() {
            return Err(NumericsError::Checkpoint(format!("shape mismatch: {}", mismatches.join("; "))));
        }
        let ids: Vec<_> = store.ids().collect();
        for id in ids {
            let s = &self.params[&store.get(id).name];
            *store.tensor_mut(id) = Tensor::new(s.shape.clone(), s.values.clone())?;
        }
        Ok(())
    }
}
