//! Graph transformer encoder with Gaussian distance-encoding attention bias.
//!
//! A forward pass maps one hierarchy level of a complex to node
//! representations:
//!
//! 1. `X` = element embedding + side embedding per atom (averaged over member
//!    atoms for motif nodes);
//! 2. `S` = per-pair Gaussian kernel bank over snapped Euclidean distances,
//!    laid out as a `(m+n)² × C` table with compound/protein/cross blocks;
//! 3. `L` post-norm transformer blocks whose attention logits receive a
//!    learned `C → heads` projection of `S` as additive bias.
//!
//! The conditioned encoder carries a second channel set holding the encoding
//! of the parent-motif centroid distance for every compound–protein atom pair.

mod input;
pub mod spe;
pub mod vocab;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{NumericsError, ParamId, ParamStore, Tape, Tensor, Var};

pub use input::LevelInput;
pub use spe::{gaussian_spe, snap_distance, MaskPolicy, SpeBlocks, SpeParams};

/// Distance the head predicts for every pair before training, Å. Starting
/// near the middle of the target range keeps the hidden ReLUs from being
/// driven dead by the first large updates.
pub const INITIAL_DISTANCE: f64 = 12.0;

fn inverse_softplus(y: f64) -> f64 {
    y + (-(-y).exp_m1()).ln()
}

#[derive(Debug, Error)]
pub enum EncoderError {
    #[error("negative distance {0}")]
    NegativeDistance(f64),
    #[error("edge type {0} not in table")]
    UnknownEdgeType(usize),
    #[error("the motif-conditioned encoder needs motif prior distances")]
    MissingPrior,
    #[error("prior policy requested on an encoder without prior channels")]
    NotConditioned,
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub layers: usize,
    pub heads: usize,
    pub d_model: usize,
    pub kernels: usize,
    pub ffn_dim: usize,
    pub head_hidden: usize,
    pub mu_min: f64,
    pub mu_max: f64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            layers: 4,
            heads: 8,
            d_model: 128,
            kernels: 16,
            ffn_dim: 512,
            head_hidden: 128,
            mu_min: 0.0,
            mu_max: 12.0,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<(), EncoderError> {
        let positive = [
            ("heads", self.heads),
            ("d_model", self.d_model),
            ("kernels", self.kernels),
            ("ffn_dim", self.ffn_dim),
            ("head_hidden", self.head_hidden),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(EncoderError::Input(format!("{name} must be positive")));
        }
        if !self.d_model.is_multiple_of(self.heads) {
            return Err(EncoderError::Input(format!(
                "d_model {} is not divisible by heads {}",
                self.d_model, self.heads
            )));
        }
        if self.mu_max.partial_cmp(&self.mu_min) != Some(std::cmp::Ordering::Greater) {
            return Err(EncoderError::Input("mu_max must exceed mu_min".into()));
        }
        Ok(())
    }
}

/// Which node-class vocabulary the encoder types its edges with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Atom,
    Motif,
}

impl Level {
    pub fn classes(self) -> usize {
        match self {
            Level::Atom => vocab::ATOM_CLASSES,
            Level::Motif => vocab::MOTIF_CLASSES,
        }
    }
}

#[derive(Debug, Clone)]
struct LayerParams {
    wq: ParamId,
    wk: ParamId,
    wv: ParamId,
    wo: ParamId,
    bo: ParamId,
    bias_proj: ParamId,
    bias_proj_b: ParamId,
    ln1_g: ParamId,
    ln1_b: ParamId,
    ff1: ParamId,
    ff1_b: ParamId,
    ff2: ParamId,
    ff2_b: ParamId,
    ln2_g: ParamId,
    ln2_b: ParamId,
}

#[derive(Debug, Clone)]
struct HeadParams {
    w_first: ParamId,
    w_second: ParamId,
    w_prod: ParamId,
    b1: ParamId,
    w2: ParamId,
    b2: ParamId,
}

/// Node representations `H` with the compound rows first.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeRepresentations {
    pub h: Tensor,
    pub n_compound: usize,
}

impl NodeRepresentations {
    fn rows(&self, start: usize, len: usize) -> Tensor {
        let c = self.h.cols();
        Tensor::matrix(len, c, self.h.data()[start * c..(start + len) * c].to_vec()).expect("row slice")
    }

    pub fn compound(&self) -> Tensor {
        self.rows(0, self.n_compound)
    }

    pub fn protein(&self) -> Tensor {
        self.rows(self.n_compound, self.h.rows() - self.n_compound)
    }
}

#[derive(Debug, Clone)]
pub struct Encoder {
    pub name: String,
    pub config: EncoderConfig,
    pub level: Level,
    pub conditioned: bool,
    /// Ablation switch: when false the prior channels are fed zeros.
    pub prior_enabled: bool,
    elem_emb: ParamId,
    side_emb: ParamId,
    alpha: ParamId,
    beta: ParamId,
    mu: ParamId,
    log_sigma: ParamId,
    mask: ParamId,
    layers: Vec<LayerParams>,
    head: HeadParams,
}

impl Encoder {
    /// Registers all parameters under `name.` in `store`.
    pub fn new(
        store: &mut ParamStore,
        rng: &mut impl Rng,
        name: &str,
        config: &EncoderConfig,
        level: Level,
        conditioned: bool,
    ) -> Result<Self, EncoderError> {
        config.validate()?;
        let d = config.d_model;
        let c = config.kernels;
        let edge_types = vocab::edge_type_count(level.classes());
        let spe_channels = if conditioned { 2 * c } else { c };
        let p = |s: &str| format!("{name}.{s}");
        let init = SpeParams::initial(c, config.mu_min, config.mu_max, edge_types);

        let elem_emb = store.add_uniform(p("element_embedding"), vocab::ELEMENT_VOCAB, d, d, rng)?;
        let side_emb = store.add_uniform(p("side_embedding"), 2, d, d, rng)?;
        let alpha = store.add(p("spe.alpha"), Tensor::row(init.alpha))?;
        let beta = store.add(p("spe.beta"), Tensor::row(init.beta))?;
        let mu = store.add(p("spe.mu"), Tensor::row(init.mu))?;
        let log_sigma = store.add(p("spe.log_sigma"), Tensor::row(init.sigma.iter().map(|s| s.ln()).collect()))?;
        let mask = store.add_uniform(p("spe.mask"), 1, c, c, rng)?;

        let mut layers = Vec::with_capacity(config.layers);
        for l in 0..config.layers {
            let q = |s: &str| format!("{name}.layer{l}.{s}");
            layers.push(LayerParams {
                wq: store.add_uniform(q("wq"), d, d, d, rng)?,
                wk: store.add_uniform(q("wk"), d, d, d, rng)?,
                wv: store.add_uniform(q("wv"), d, d, d, rng)?,
                wo: store.add_uniform(q("wo"), d, d, d, rng)?,
                bo: store.add(q("bo"), Tensor::zeros(1, d))?,
                bias_proj: store.add_uniform(q("bias_proj"), spe_channels, config.heads, spe_channels, rng)?,
                bias_proj_b: store.add(q("bias_proj_b"), Tensor::zeros(1, config.heads))?,
                ln1_g: store.add(q("ln1_g"), Tensor::full(1, d, 1.0))?,
                ln1_b: store.add(q("ln1_b"), Tensor::zeros(1, d))?,
                ff1: store.add_uniform(q("ff1"), d, config.ffn_dim, d, rng)?,
                ff1_b: store.add(q("ff1_b"), Tensor::zeros(1, config.ffn_dim))?,
                ff2: store.add_uniform(q("ff2"), config.ffn_dim, d, config.ffn_dim, rng)?,
                ff2_b: store.add(q("ff2_b"), Tensor::zeros(1, d))?,
                ln2_g: store.add(q("ln2_g"), Tensor::full(1, d, 1.0))?,
                ln2_b: store.add(q("ln2_b"), Tensor::zeros(1, d))?,
            });
        }
        let k = config.head_hidden;
        let fan = 3 * d;
        let head = HeadParams {
            w_first: store.add_uniform(p("head.w_first"), d, k, fan, rng)?,
            w_second: store.add_uniform(p("head.w_second"), d, k, fan, rng)?,
            w_prod: store.add_uniform(p("head.w_prod"), d, k, fan, rng)?,
            b1: store.add(p("head.b1"), Tensor::zeros(1, k))?,
            w2: store.add_uniform(p("head.w2"), k, 1, k, rng)?,
            b2: store.add(p("head.b2"), Tensor::scalar(inverse_softplus(INITIAL_DISTANCE)))?,
        };
        Ok(Encoder {
            name: name.to_string(),
            config: config.clone(),
            level,
            conditioned,
            prior_enabled: true,
            elem_emb,
            side_emb,
            alpha,
            beta,
            mu,
            log_sigma,
            mask,
            layers,
            head,
        })
    }

    pub fn spe_channels(&self) -> usize {
        if self.conditioned {
            2 * self.config.kernels
        } else {
            self.config.kernels
        }
    }

    /// Current kernel-bank values.
    pub fn spe_params(&self, store: &ParamStore) -> SpeParams {
        SpeParams {
            mu: store.tensor(self.mu).data().to_vec(),
            sigma: store.tensor(self.log_sigma).data().iter().map(|v| v.exp()).collect(),
            alpha: store.tensor(self.alpha).data().to_vec(),
            beta: store.tensor(self.beta).data().to_vec(),
        }
    }

    pub fn mask_vector(&self, store: &ParamStore) -> Vec<f64> {
        store.tensor(self.mask).data().to_vec()
    }

    /// Parameter ids owned by this encoder.
    pub fn param_ids(&self) -> Vec<ParamId> {
        let mut ids = vec![self.elem_emb, self.side_emb, self.alpha, self.beta, self.mu, self.log_sigma, self.mask];
        for l in &self.layers {
            ids.extend([
                l.wq,
                l.wk,
                l.wv,
                l.wo,
                l.bo,
                l.bias_proj,
                l.bias_proj_b,
                l.ln1_g,
                l.ln1_b,
                l.ff1,
                l.ff1_b,
                l.ff2,
                l.ff2_b,
                l.ln2_g,
                l.ln2_b,
            ]);
        }
        let h = &self.head;
        ids.extend([h.w_first, h.w_second, h.w_prod, h.b1, h.w2, h.b2]);
        ids
    }

    /// Node embedding matrix `X`.
    pub fn embed(&self, tape: &mut Tape, store: &ParamStore, input: &LevelInput) -> Result<Var, EncoderError> {
        let table = tape.param(store, self.elem_emb);
        let sides = tape.param(store, self.side_emb);
        let e = tape.gather_rows(table, &input.atom_elements)?;
        let s = tape.gather_rows(sides, &input.atom_sides)?;
        let atoms = tape.add(e, s)?;
        match &input.members {
            None => Ok(atoms),
            Some(members) => {
                let n_atoms = input.atom_elements.len();
                let mut avg = vec![0.0; members.len() * n_atoms];
                for (m, mem) in members.iter().enumerate() {
                    if mem.is_empty() {
                        return Err(EncoderError::Input(format!("motif {m} has no atoms")));
                    }
                    for &a in mem {
                        avg[m * n_atoms + a] = 1.0 / mem.len() as f64;
                    }
                }
                let avg = tape.constant(Tensor::matrix(members.len(), n_atoms, avg)?);
                Ok(tape.matmul(avg, atoms)?)
            }
        }
    }

    /// Flattened `(m+n)² × channels` encoding. Row `i*(m+n) + j` holds pair `(i, j)`.
    pub fn spe(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        input: &LevelInput,
        policy: MaskPolicy,
        prior: Option<&[f64]>,
    ) -> Result<Var, EncoderError> {
        let n_total = input.len();
        let m = input.n_compound;
        let n = input.n_protein();
        if input.classes.len() != n_total {
            return Err(EncoderError::Input("one node class per node required".into()));
        }
        if policy == MaskPolicy::Prior && !self.conditioned {
            return Err(EncoderError::NotConditioned);
        }
        let classes = self.level.classes();
        if let Some(c) = input.classes.iter().find(|&&c| c >= classes) {
            return Err(EncoderError::UnknownEdgeType(*c));
        }
        let is_cross = |i: usize, j: usize| (i < m) != (j < m);
        let hide = policy.hides_cross_distances();

        let mut dist = Vec::new();
        let mut types = Vec::new();
        let mut slot = vec![usize::MAX; n_total * n_total];
        for i in 0..n_total {
            for j in i..n_total {
                if hide && is_cross(i, j) {
                    continue;
                }
                let d = snap_distance(crate::molio::distance(&input.positions[i], &input.positions[j]));
                slot[i * n_total + j] = dist.len();
                slot[j * n_total + i] = dist.len();
                dist.push(d);
                types.push(vocab::edge_type(input.classes[i], input.classes[j]));
            }
        }
        let mask_row = dist.len();
        for s in slot.iter_mut() {
            if *s == usize::MAX {
                *s = mask_row;
            }
        }

        let alpha = tape.param(store, self.alpha);
        let beta = tape.param(store, self.beta);
        let mu = tape.param(store, self.mu);
        let log_sigma = tape.param(store, self.log_sigma);
        let g = tape.gaussian(&dist, &types, alpha, beta, mu, log_sigma)?;
        let table = if hide {
            let mask = tape.param(store, self.mask);
            tape.concat_rows(&[g, mask])?
        } else {
            g
        };
        let regular = tape.gather_rows(table, &slot)?;
        if !self.conditioned {
            return Ok(regular);
        }

        let c = self.config.kernels;
        let prior = prior.ok_or(EncoderError::MissingPrior)?;
        if prior.len() != m * n {
            return Err(EncoderError::Input(format!("{} prior distances for {m}x{n} cross pairs", prior.len())));
        }
        let prior_block = if self.prior_enabled && m * n > 0 {
            let mut pd = Vec::with_capacity(m * n);
            let mut pt = Vec::with_capacity(m * n);
            for i in 0..m {
                for j in 0..n {
                    let d = prior[i * n + j];
                    if d < 0.0 || !d.is_finite() {
                        return Err(EncoderError::NegativeDistance(d));
                    }
                    pd.push(snap_distance(d));
                    pt.push(vocab::edge_type(input.classes[i], input.classes[m + j]));
                }
            }
            let gp = tape.gaussian(&pd, &pt, alpha, beta, mu, log_sigma)?;
            let zero = tape.constant(Tensor::zeros(1, c));
            let table = tape.concat_rows(&[gp, zero])?;
            let zero_row = m * n;
            let idx: Vec<usize> = (0..n_total * n_total)
                .map(|r| {
                    let (i, j) = (r / n_total, r % n_total);
                    match (i < m, j < m) {
                        (true, false) => i * n + (j - m),
                        (false, true) => j * n + (i - m),
                        _ => zero_row,
                    }
                })
                .collect();
            tape.gather_rows(table, &idx)?
        } else {
            tape.constant(Tensor::zeros(n_total * n_total, c))
        };
        Ok(tape.concat_cols(&[regular, prior_block])?)
    }

    /// Row-stochastic attention weights of one head.
    pub fn attention_weights(
        tape: &mut Tape,
        x: Var,
        wq: Var,
        wk: Var,
        bias: Var,
        head_dim: usize,
    ) -> Result<Var, EncoderError> {
        let q = tape.matmul(x, wq)?;
        let k = tape.matmul(x, wk)?;
        let kt = tape.transpose(k)?;
        let logits = tape.matmul(q, kt)?;
        let logits = tape.scale(logits, 1.0 / (head_dim as f64).sqrt())?;
        let logits = tape.add(logits, bias)?;
        Ok(tape.softmax(logits)?)
    }

    /// Per-head `(m+n) × (m+n)` attention biases of layer `layer`.
    pub fn attention_bias(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        layer: usize,
        s: Var,
        n_nodes: usize,
    ) -> Result<Vec<Var>, EncoderError> {
        let lp = &self.layers[layer];
        let proj = tape.param(store, lp.bias_proj);
        let proj_b = tape.param(store, lp.bias_proj_b);
        let b = tape.matmul(s, proj)?;
        let b = tape.add_row(b, proj_b)?;
        (0..self.config.heads)
            .map(|h| {
                let col = tape.slice_cols(b, h, 1)?;
                Ok(tape.reshape(col, n_nodes, n_nodes)?)
            })
            .collect()
    }

    /// The transformer stack `H = GE(X, S)`.
    pub fn encode(&self, tape: &mut Tape, store: &ParamStore, x: Var, s: Var) -> Result<Var, EncoderError> {
        let (n_nodes, d) = tape.shape(x);
        let heads = self.config.heads;
        let dh = d / heads;
        let mut h = x;
        for (l, lp) in self.layers.iter().enumerate() {
            let biases = self.attention_bias(tape, store, l, s, n_nodes)?;
            let wq = tape.param(store, lp.wq);
            let wk = tape.param(store, lp.wk);
            let wv = tape.param(store, lp.wv);
            let mut outs = Vec::with_capacity(heads);
            for (hd, bias) in biases.into_iter().enumerate() {
                let wq_h = tape.slice_cols(wq, hd * dh, dh)?;
                let wk_h = tape.slice_cols(wk, hd * dh, dh)?;
                let wv_h = tape.slice_cols(wv, hd * dh, dh)?;
                let att = Self::attention_weights(tape, h, wq_h, wk_h, bias, dh)?;
                let v = tape.matmul(h, wv_h)?;
                outs.push(tape.matmul(att, v)?);
            }
            let cat = tape.concat_cols(&outs)?;
            let wo = tape.param(store, lp.wo);
            let bo = tape.param(store, lp.bo);
            let o = tape.matmul(cat, wo)?;
            let o = tape.add_row(o, bo)?;
            let r = tape.add(h, o)?;
            let g1 = tape.param(store, lp.ln1_g);
            let b1 = tape.param(store, lp.ln1_b);
            let r = tape.layer_norm(r, g1, b1)?;

            let w1 = tape.param(store, lp.ff1);
            let c1 = tape.param(store, lp.ff1_b);
            let w2 = tape.param(store, lp.ff2);
            let c2 = tape.param(store, lp.ff2_b);
            let f = tape.matmul(r, w1)?;
            let f = tape.add_row(f, c1)?;
            let f = tape.relu(f)?;
            let f = tape.matmul(f, w2)?;
            let f = tape.add_row(f, c2)?;
            let r2 = tape.add(r, f)?;
            let g2 = tape.param(store, lp.ln2_g);
            let b2 = tape.param(store, lp.ln2_b);
            h = tape.layer_norm(r2, g2, b2)?;
        }
        Ok(h)
    }

    /// `embed` + `spe` + `encode`.
    pub fn forward(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        input: &LevelInput,
        policy: MaskPolicy,
        prior: Option<&[f64]>,
    ) -> Result<Var, EncoderError> {
        let x = self.embed(tape, store, input)?;
        let s = self.spe(tape, store, input, policy, prior)?;
        self.encode(tape, store, x, s)
    }

    /// `softplus(relu(pre + b1)·w2 + b2)` on pre-activations of the head.
    fn head_output(&self, tape: &mut Tape, store: &ParamStore, pre: Var) -> Result<Var, EncoderError> {
        let b1 = tape.param(store, self.head.b1);
        let w2 = tape.param(store, self.head.w2);
        let b2 = tape.param(store, self.head.b2);
        let pre = tape.add_row(pre, b1)?;
        let hidden = tape.relu(pre)?;
        let out = tape.matmul(hidden, w2)?;
        let out = tape.add_row(out, b2)?;
        Ok(tape.softplus(out)?)
    }

    /// Symmetrised distances `½(f(a_i, b_j) + f(b_j, a_i))` as an `a × b` matrix,
    /// where `f(x, y) = softplus(relu(x·Wf + y·Ws + (x⊙y)·Wp + b1)·w2 + b2)`.
    pub fn predict_pairs(&self, tape: &mut Tape, store: &ParamStore, a: Var, b: Var) -> Result<Var, EncoderError> {
        let (m, _) = tape.shape(a);
        let (n, _) = tape.shape(b);
        let wf = tape.param(store, self.head.w_first);
        let ws = tape.param(store, self.head.w_second);
        let wp = tape.param(store, self.head.w_prod);
        let prod = tape.pair_mul(a, b)?;
        let prod = tape.matmul(prod, wp)?;

        let af = tape.matmul(a, wf)?;
        let bs = tape.matmul(b, ws)?;
        let pre = tape.pair_add(af, bs)?;
        let pre = tape.add(pre, prod)?;
        let forward = self.head_output(tape, store, pre)?;

        let as_ = tape.matmul(a, ws)?;
        let bf = tape.matmul(b, wf)?;
        let pre = tape.pair_add(as_, bf)?;
        let pre = tape.add(pre, prod)?;
        let backward = self.head_output(tape, store, pre)?;

        let sum = tape.add(forward, backward)?;
        let avg = tape.scale(sum, 0.5)?;
        Ok(tape.reshape(avg, m, n)?)
    }

    /// Predicted compound × protein distance matrix from `H`.
    pub fn predict_cross(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        h: Var,
        n_compound: usize,
    ) -> Result<Var, EncoderError> {
        let (rows, _) = tape.shape(h);
        let hc = tape.slice_rows(h, 0, n_compound)?;
        let hp = tape.slice_rows(h, n_compound, rows - n_compound)?;
        self.predict_pairs(tape, store, hc, hp)
    }

    /// Predicted distance between two node representations (`1 × d` each).
    pub fn predict_distance(&self, tape: &mut Tape, store: &ParamStore, hi: Var, hj: Var) -> Result<Var, EncoderError> {
        self.predict_pairs(tape, store, hi, hj)
    }

    /// Values-only forward pass.
    pub fn represent(
        &self,
        store: &ParamStore,
        input: &LevelInput,
        policy: MaskPolicy,
        prior: Option<&[f64]>,
    ) -> Result<NodeRepresentations, EncoderError> {
        let mut tape = Tape::new();
        let h = self.forward(&mut tape, store, input, policy, prior)?;
        Ok(NodeRepresentations { h: tape.value(h).clone(), n_compound: input.n_compound })
    }

    /// Values-only blocked encoding.
    pub fn spe_blocks(
        &self,
        store: &ParamStore,
        input: &LevelInput,
        policy: MaskPolicy,
        prior: Option<&[f64]>,
    ) -> Result<SpeBlocks, EncoderError> {
        let mut tape = Tape::new();
        let s = self.spe(&mut tape, store, input, policy, prior)?;
        Ok(SpeBlocks::from_flat(tape.value(s), input.n_compound, policy))
    }
}
