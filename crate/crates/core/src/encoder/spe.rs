//! Gaussian spatial positional encoding and its blocked layout.

use crate::numerics::{kernel, Tensor};

use super::EncoderError;

/// Distances entering the encoding are snapped to a 2⁻¹⁶ Å grid so that the
/// encoding of a rigidly moved structure is reproduced bit for bit.
pub const DISTANCE_GRID: f64 = 65536.0;

pub fn snap_distance(d: f64) -> f64 {
    (d * DISTANCE_GRID).round() / DISTANCE_GRID
}

/// How compound–protein blocks of the encoding are filled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MaskPolicy {
    /// Cross pairs carry a learned mask vector instead of their distance.
    Masked,
    /// Cross pairs carry the Gaussian encoding of their true distance.
    Full,
    /// Cross pairs are masked; motif-prior channels carry the encoding of the
    /// parent motifs' centroid distance.
    Prior,
}

impl MaskPolicy {
    pub fn hides_cross_distances(self) -> bool {
        matches!(self, MaskPolicy::Masked | MaskPolicy::Prior)
    }
}

/// Kernel-bank values of one encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeParams {
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

impl SpeParams {
    pub fn kernels(&self) -> usize {
        self.mu.len()
    }

    /// Evenly spaced means on `[mu_min, mu_max]`, widths equal to the spacing,
    /// identity affine map for every edge type.
    pub fn initial(kernels: usize, mu_min: f64, mu_max: f64, edge_types: usize) -> Self {
        let spacing = if kernels > 1 { (mu_max - mu_min) / (kernels - 1) as f64 } else { mu_max - mu_min };
        let spacing = if spacing > 0.0 { spacing } else { 1.0 };
        SpeParams {
            mu: (0..kernels).map(|k| mu_min + spacing * k as f64).collect(),
            sigma: vec![spacing; kernels],
            alpha: vec![1.0; edge_types],
            beta: vec![0.0; edge_types],
        }
    }
}

/// `s_k = G(alpha_t * d + beta_t, mu_k, sigma_k)` for every kernel `k`.
pub fn gaussian_spe(d: f64, edge_type: usize, params: &SpeParams) -> Result<Vec<f64>, EncoderError> {
    if d < 0.0 || !d.is_finite() {
        return Err(EncoderError::NegativeDistance(d));
    }
    if edge_type >= params.alpha.len() {
        return Err(EncoderError::UnknownEdgeType(edge_type));
    }
    let x = params.alpha[edge_type] * d + params.beta[edge_type];
    Ok(params.mu.iter().zip(&params.sigma).map(|(m, s)| kernel(x, *m, *s)).collect())
}

/// Blocked view of a `(m+n) × (m+n) × C` encoding tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeBlocks {
    pub compound: Tensor,
    pub protein: Tensor,
    pub compound_protein: Tensor,
    pub protein_compound: Tensor,
    pub mask_policy: MaskPolicy,
}

impl SpeBlocks {
    /// Splits a flattened `N² × C` encoding whose first `m` nodes are compound.
    pub fn from_flat(flat: &Tensor, m: usize, mask_policy: MaskPolicy) -> Self {
        let c = flat.cols();
        let n_total = (flat.rows() as f64).sqrt().round() as usize;
        let n = n_total - m;
        let block = |rows: std::ops::Range<usize>, cols: std::ops::Range<usize>| {
            let mut data = Vec::with_capacity(rows.len() * cols.len() * c);
            for i in rows.clone() {
                for j in cols.clone() {
                    let r = i * n_total + j;
                    data.extend_from_slice(&flat.data()[r * c..(r + 1) * c]);
                }
            }
            Tensor::new(vec![rows.len(), cols.len(), c], data).expect("block shape")
        };
        SpeBlocks {
            compound: block(0..m, 0..m),
            protein: block(m..m + n, m..m + n),
            compound_protein: block(0..m, m..m + n),
            protein_compound: block(m..m + n, 0..m),
            mask_policy,
        }
    }

    /// Channel vector of the compound–protein pair `(i, j)`.
    pub fn cross(&self, i: usize, j: usize) -> &[f64] {
        let s = self.compound_protein.shape();
        let c = s[2];
        let r = i * s[1] + j;
        &self.compound_protein.data()[r * c..(r + 1) * c]
    }
}
