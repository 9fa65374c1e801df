//! Self-supervised pre-training, affinity fine-tuning and evaluation.
//!
//! Pre-training hides every compound–protein distance from three encoders
//! and asks each to predict the cross-distance matrix:
//!
//! * the atom encoder, at atom resolution;
//! * the motif encoder, between motif centroids;
//! * the conditioned atom encoder, which additionally sees the true distance
//!   between the parent motifs of each atom pair.
//!
//! Targets always come from the unperturbed coordinates.

mod manifest;
mod metrics;
mod rigid;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoder::{Encoder, EncoderConfig, EncoderError, Level, LevelInput, MaskPolicy};
use crate::molio::{distance, AtomGraph, Complex};
use crate::motif::{decompose_compound, decompose_protein, MotifGraph};
use crate::numerics::{Adam, Checkpoint, Gradients, NumericsError, ParamId, ParamStore, Tape, Tensor, Var};

pub use manifest::{load_complex, parse_manifest_line, read_manifest, write_manifest, ManifestEntry, ManifestError};
pub use metrics::{finetune_loss, metric_pearson, metric_rmse, Pearson};
pub use rigid::{perturb_compound, uniform_in_ball, uniform_quaternion, RigidTransform, TRANSLATION_RADIUS};

#[derive(Debug, Error)]
pub enum TrainingError {
    #[error("complex {id}: {source}")]
    Complex { id: String, source: EncoderError },
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("complex {0} has no affinity label")]
    MissingLabel(String),
    #[error("{0} and {1} values")]
    LengthMismatch(usize, usize),
    #[error("empty {0}")]
    Empty(&'static str),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

/// Loss options shared by the three distance objectives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    /// Targets above this are clipped; `None` disables clipping.
    pub d_max: Option<f64>,
    pub w_atom: f64,
    pub w_motif: f64,
    pub w_cond: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig { d_max: Some(20.0), w_atom: 1.0, w_motif: 1.0, w_cond: 1.0 }
    }
}

/// Constant learning rate, then a linear ramp down to `final_fraction` of it
/// once `decay_start` (a fraction of the run) has passed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub base: f64,
    pub decay_start: f64,
    pub final_fraction: f64,
}

impl LrSchedule {
    pub fn constant(base: f64) -> Self {
        LrSchedule { base, decay_start: 1.0, final_fraction: 1.0 }
    }

    pub fn at(&self, step: usize, total: usize) -> f64 {
        let frac = step as f64 / total.max(1) as f64;
        if frac < self.decay_start || self.decay_start >= 1.0 {
            return self.base;
        }
        let t = (frac - self.decay_start) / (1.0 - self.decay_start);
        self.base * (1.0 - (1.0 - self.final_fraction) * t.min(1.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reduction {
    /// Sum of squared errors over all cross pairs.
    Sum,
    /// The same sum divided by the number of cross pairs.
    Mean,
}

/// Weighted loss components and their sum, averaged over a batch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossBundle {
    pub l_atom: f64,
    pub l_motif: f64,
    pub l_cond: f64,
    pub total: f64,
}

impl LossBundle {
    pub fn new(l_atom: f64, l_motif: f64, l_cond: f64) -> Self {
        LossBundle { l_atom, l_motif, l_cond, total: l_atom + l_motif + l_cond }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AffinityPrediction {
    pub complex_id: String,
    pub value: f64,
}

/// A complex with its motif graphs and the atom → motif maps precomputed.
#[derive(Debug, Clone)]
pub struct PreparedComplex {
    pub complex: Complex,
    pub compound_motifs: MotifGraph,
    pub protein_motifs: MotifGraph,
}

fn clip(d: f64, d_max: Option<f64>) -> f64 {
    match d_max {
        Some(m) => d.min(m),
        None => d,
    }
}

impl PreparedComplex {
    pub fn new(complex: Complex) -> Self {
        let compound_motifs = decompose_compound(&complex.compound);
        let protein_motifs = decompose_protein(&complex.protein);
        PreparedComplex { complex, compound_motifs, protein_motifs }
    }

    pub fn id(&self) -> &str {
        &self.complex.id
    }

    pub fn compound(&self) -> &AtomGraph {
        &self.complex.compound
    }

    pub fn protein(&self) -> &AtomGraph {
        &self.complex.protein
    }

    pub fn n_compound_atoms(&self) -> usize {
        self.complex.compound.len()
    }

    pub fn n_protein_atoms(&self) -> usize {
        self.complex.protein.len()
    }

    /// True compound × protein atom distances (row-major), clipped.
    pub fn atom_targets(&self, d_max: Option<f64>) -> Vec<f64> {
        let (c, p) = (&self.complex.compound.coords, &self.complex.protein.coords);
        c.iter().flat_map(|a| p.iter().map(move |b| clip(distance(a, b), d_max))).collect()
    }

    /// True compound × protein motif-centroid distances, clipped.
    pub fn motif_targets(&self, d_max: Option<f64>) -> Vec<f64> {
        let c = &self.compound_motifs.centroids;
        let p = &self.protein_motifs.centroids;
        c.iter().flat_map(|a| p.iter().map(move |b| clip(distance(a, b), d_max))).collect()
    }

    /// For every atom pair, the true distance between the centroids of the
    /// two atoms' motifs.
    pub fn motif_prior(&self) -> Vec<f64> {
        let c = &self.compound_motifs;
        let p = &self.protein_motifs;
        let mut out = Vec::with_capacity(self.n_compound_atoms() * self.n_protein_atoms());
        for &pi in &c.parent {
            for &pj in &p.parent {
                out.push(distance(&c.centroids[pi], &p.centroids[pj]));
            }
        }
        out
    }

    pub fn atom_input(&self, pose: &[[f64; 3]]) -> LevelInput {
        LevelInput::atoms(&self.complex.compound, pose, &self.complex.protein)
    }

    pub fn motif_input(&self, pose: &[[f64; 3]]) -> LevelInput {
        LevelInput::motifs(
            &self.complex.compound,
            &self.compound_motifs,
            pose,
            &self.complex.protein,
            &self.protein_motifs,
        )
    }
}

/// Which of the three encoders produced a prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Atom,
    Motif,
    Conditioned,
}

/// Atom, motif and conditioned-atom encoders plus the affinity head.
#[derive(Debug, Clone)]
pub struct Model {
    pub config: EncoderConfig,
    pub store: ParamStore,
    pub atom: Encoder,
    pub motif: Encoder,
    pub cond: Encoder,
    head_w: ParamId,
    head_b: ParamId,
}

impl Model {
    pub fn new(config: &EncoderConfig, rng: &mut impl Rng) -> Result<Self, TrainingError> {
        let mut store = ParamStore::new();
        let atom = Encoder::new(&mut store, rng, "atom", config, Level::Atom, false)?;
        let motif = Encoder::new(&mut store, rng, "motif", config, Level::Motif, false)?;
        let cond = Encoder::new(&mut store, rng, "cond", config, Level::Atom, true)?;
        let head_w = store.add("affinity.w", Tensor::zeros(6 * config.d_model, 1))?;
        let head_b = store.add("affinity.b", Tensor::zeros(1, 1))?;
        Ok(Model { config: config.clone(), store, atom, motif, cond, head_w, head_b })
    }

    pub fn encoder(&self, branch: Branch) -> &Encoder {
        match branch {
            Branch::Atom => &self.atom,
            Branch::Motif => &self.motif,
            Branch::Conditioned => &self.cond,
        }
    }

    pub fn head_weights(&self) -> ParamId {
        self.head_w
    }

    pub fn head_bias(&self) -> ParamId {
        self.head_b
    }

    /// Ablation switch for the motif-prior channels of the conditioned encoder.
    pub fn set_prior_enabled(&mut self, on: bool) {
        self.cond.prior_enabled = on;
    }

    pub fn checkpoint(&self, extra: serde_json::Value) -> Checkpoint {
        let meta = serde_json::json!({ "encoder": self.config, "extra": extra });
        Checkpoint::from_store(&self.store, meta)
    }

    /// Rebuilds a model from the architecture stored in `ck` and loads its weights.
    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self, TrainingError> {
        let config: EncoderConfig = serde_json::from_value(ck.meta["encoder"].clone())
            .map_err(|e| TrainingError::Checkpoint(format!("missing or invalid architecture: {e}")))?;
        let mut model = Model::new(&config, &mut ChaCha8Rng::seed_from_u64(0))?;
        ck.load_into(&mut model.store)?;
        Ok(model)
    }

    /// Predicted cross-distance matrix (`m × n` at the branch's resolution).
    pub fn cross_distances(
        &self,
        tape: &mut Tape,
        pc: &PreparedComplex,
        branch: Branch,
        pose: &[[f64; 3]],
        policy: MaskPolicy,
    ) -> Result<Var, EncoderError> {
        let enc = self.encoder(branch);
        let (input, prior) = match branch {
            Branch::Atom => (pc.atom_input(pose), None),
            Branch::Motif => (pc.motif_input(pose), None),
            Branch::Conditioned => (pc.atom_input(pose), Some(pc.motif_prior())),
        };
        let h = enc.forward(tape, &self.store, &input, policy, prior.as_deref())?;
        enc.predict_cross(tape, &self.store, h, input.n_compound)
    }

    /// Values-only cross-distance matrix; masked for the atom and motif
    /// branches, prior-conditioned for the third.
    pub fn predict_cross(
        &self,
        pc: &PreparedComplex,
        branch: Branch,
        pose: &[[f64; 3]],
    ) -> Result<Tensor, EncoderError> {
        let mut tape = Tape::new();
        let v = self.cross_distances(&mut tape, pc, branch, pose, pretrain_policy(branch))?;
        Ok(tape.value(v).clone())
    }

    /// Affinity for one complex with full information on all three encoders.
    pub fn affinity(&self, tape: &mut Tape, pc: &PreparedComplex) -> Result<Var, EncoderError> {
        let pose = &pc.compound().coords;
        let prior = pc.motif_prior();
        let inputs = [
            (&self.atom, pc.atom_input(pose), None),
            (&self.motif, pc.motif_input(pose), None),
            (&self.cond, pc.atom_input(pose), Some(prior.as_slice())),
        ];
        let mut pooled = Vec::with_capacity(6);
        for (enc, input, prior) in &inputs {
            let h = enc.forward(tape, &self.store, input, MaskPolicy::Full, *prior)?;
            let (m, n) = (input.n_compound, input.n_protein());
            let mut w = vec![0.0; 2 * (m + n)];
            w[..m].fill(1.0 / m as f64);
            w[2 * m + n..].fill(1.0 / n as f64);
            let pool = tape.constant(Tensor::matrix(2, m + n, w)?);
            let ph = tape.matmul(pool, h)?;
            pooled.push(tape.slice_rows(ph, 0, 1)?);
            pooled.push(tape.slice_rows(ph, 1, 1)?);
        }
        let z = tape.concat_cols(&pooled)?;
        let w = tape.param(&self.store, self.head_w);
        let b = tape.param(&self.store, self.head_b);
        let y = tape.matmul(z, w)?;
        Ok(tape.add(y, b)?)
    }
}

fn pretrain_policy(branch: Branch) -> MaskPolicy {
    match branch {
        Branch::Conditioned => MaskPolicy::Prior,
        _ => MaskPolicy::Masked,
    }
}

fn targets(pc: &PreparedComplex, branch: Branch, d_max: Option<f64>) -> Vec<f64> {
    match branch {
        Branch::Motif => pc.motif_targets(d_max),
        _ => pc.atom_targets(d_max),
    }
}

/// Squared-error objective of one branch on the tape.
pub fn distance_loss(
    tape: &mut Tape,
    model: &Model,
    pc: &PreparedComplex,
    branch: Branch,
    pose: &[[f64; 3]],
    cfg: &LossConfig,
    reduction: Reduction,
) -> Result<Var, EncoderError> {
    let pred = model.cross_distances(tape, pc, branch, pose, pretrain_policy(branch))?;
    let (m, n) = tape.shape(pred);
    Ok(squared_error(tape, pred, Tensor::matrix(m, n, targets(pc, branch, cfg.d_max))?, reduction)?)
}

/// `Σ (pred − target)²`, or its mean.
pub fn squared_error(tape: &mut Tape, pred: Var, target: Tensor, reduction: Reduction) -> Result<Var, NumericsError> {
    let t = tape.constant(target);
    let diff = tape.sub(pred, t)?;
    let sq = tape.square(diff)?;
    match reduction {
        Reduction::Sum => tape.sum(sq),
        Reduction::Mean => tape.mean(sq),
    }
}

fn branch_loss(
    model: &Model,
    pc: &PreparedComplex,
    branch: Branch,
    pose: &[[f64; 3]],
    cfg: &LossConfig,
    reduction: Reduction,
) -> Result<f64, TrainingError> {
    let mut tape = Tape::new();
    let l = distance_loss(&mut tape, model, pc, branch, pose, cfg, reduction)
        .map_err(|source| TrainingError::Complex { id: pc.id().to_string(), source })?;
    Ok(tape.value(l).item())
}

/// Atom-level objective with the compound at `pose`.
pub fn loss_atom(
    model: &Model,
    pc: &PreparedComplex,
    pose: &[[f64; 3]],
    cfg: &LossConfig,
    reduction: Reduction,
) -> Result<f64, TrainingError> {
    branch_loss(model, pc, Branch::Atom, pose, cfg, reduction)
}

/// Motif-level objective with the compound at `pose`.
pub fn loss_motif(
    model: &Model,
    pc: &PreparedComplex,
    pose: &[[f64; 3]],
    cfg: &LossConfig,
    reduction: Reduction,
) -> Result<f64, TrainingError> {
    branch_loss(model, pc, Branch::Motif, pose, cfg, reduction)
}

/// Atom-level objective of the motif-conditioned encoder.
pub fn loss_conditioned(
    model: &Model,
    pc: &PreparedComplex,
    pose: &[[f64; 3]],
    cfg: &LossConfig,
    reduction: Reduction,
) -> Result<f64, TrainingError> {
    branch_loss(model, pc, Branch::Conditioned, pose, cfg, reduction)
}

/// Weighted, pair-normalised pre-training objective for one complex:
/// the loss variable and its three weighted components.
pub fn pretrain_objective(
    tape: &mut Tape,
    model: &Model,
    pc: &PreparedComplex,
    pose: &[[f64; 3]],
    cfg: &LossConfig,
) -> Result<(Var, [f64; 3]), EncoderError> {
    let mut terms = Vec::with_capacity(3);
    let mut parts = [0.0; 3];
    for (k, (branch, w)) in
        [(Branch::Atom, cfg.w_atom), (Branch::Motif, cfg.w_motif), (Branch::Conditioned, cfg.w_cond)]
            .into_iter()
            .enumerate()
    {
        let l = distance_loss(tape, model, pc, branch, pose, cfg, Reduction::Mean)?;
        let l = tape.scale(l, w)?;
        parts[k] = tape.value(l).item();
        terms.push(l);
    }
    let s = tape.add(terms[0], terms[1])?;
    Ok((tape.add(s, terms[2])?, parts))
}

fn per_complex<T: Send>(
    batch: &[PreparedComplex],
    f: impl Fn(usize, &PreparedComplex) -> Result<T, TrainingError> + Sync,
) -> Result<Vec<T>, TrainingError> {
    batch.par_iter().enumerate().map(|(k, pc)| f(k, pc)).collect()
}

/// Perturbs every compound, evaluates the three objectives, and applies one
/// optimiser step. Returns the bundle computed before the step.
pub fn pretrain_step(
    model: &mut Model,
    batch: &[PreparedComplex],
    opt: &mut Adam,
    rng: &mut impl Rng,
    cfg: &LossConfig,
) -> Result<LossBundle, TrainingError> {
    if batch.is_empty() {
        return Err(TrainingError::Empty("batch"));
    }
    let transforms: Vec<RigidTransform> = batch.iter().map(|_| RigidTransform::sample(rng.gen())).collect();
    let results = per_complex(batch, |k, pc| {
        let pose = transforms[k].apply(&pc.compound().coords);
        let mut tape = Tape::new();
        let (loss, parts) = pretrain_objective(&mut tape, model, pc, &pose, cfg)
            .map_err(|source| TrainingError::Complex { id: pc.id().to_string(), source })?;
        let grads = tape.backward(loss)?;
        Ok((parts, grads))
    })?;
    let scale = 1.0 / batch.len() as f64;
    let mut sums = [0.0; 3];
    let mut grads = Gradients::new();
    for (parts, g) in &results {
        for k in 0..3 {
            sums[k] += parts[k];
        }
        grads.add_scaled(g, scale);
    }
    opt.step(&mut model.store, &grads);
    Ok(LossBundle::new(sums[0] * scale, sums[1] * scale, sums[2] * scale))
}

/// Predicted affinity with full information on all three encoders.
pub fn finetune_forward(model: &Model, pc: &PreparedComplex) -> Result<AffinityPrediction, TrainingError> {
    let mut tape = Tape::new();
    let y =
        model.affinity(&mut tape, pc).map_err(|source| TrainingError::Complex { id: pc.id().to_string(), source })?;
    Ok(AffinityPrediction { complex_id: pc.id().to_string(), value: tape.value(y).item() })
}

pub fn labels(batch: &[PreparedComplex]) -> Result<Vec<f64>, TrainingError> {
    batch.iter().map(|pc| pc.complex.affinity.ok_or_else(|| TrainingError::MissingLabel(pc.id().to_string()))).collect()
}

/// Squared affinity error of one labelled complex on the tape.
pub fn affinity_loss(tape: &mut Tape, model: &Model, pc: &PreparedComplex, label: f64) -> Result<Var, EncoderError> {
    let y = model.affinity(tape, pc)?;
    let t = tape.constant(Tensor::scalar(label));
    let d = tape.sub(y, t)?;
    Ok(tape.square(d)?)
}

/// One optimiser step on the batch MSE. Returns the MSE before the step.
pub fn finetune_step(model: &mut Model, batch: &[PreparedComplex], opt: &mut Adam) -> Result<f64, TrainingError> {
    if batch.is_empty() {
        return Err(TrainingError::Empty("batch"));
    }
    let labels = labels(batch)?;
    let results = per_complex(batch, |k, pc| {
        let mut tape = Tape::new();
        let l = affinity_loss(&mut tape, model, pc, labels[k])
            .map_err(|source| TrainingError::Complex { id: pc.id().to_string(), source })?;
        let v = tape.value(l).item();
        Ok((v, tape.backward(l)?))
    })?;
    let scale = 1.0 / batch.len() as f64;
    let mut total = 0.0;
    let mut grads = Gradients::new();
    for (v, g) in &results {
        total += v;
        grads.add_scaled(g, scale);
    }
    opt.step(&mut model.store, &grads);
    Ok(total * scale)
}

pub fn predict_all(model: &Model, batch: &[PreparedComplex]) -> Result<Vec<f64>, TrainingError> {
    per_complex(batch, |_, pc| Ok(finetune_forward(model, pc)?.value))
}

/// Sets the affinity bias to the mean training label. Used when fine-tuning
/// starts from a zero head so the first steps fit deviations, not the offset.
pub fn center_affinity_head(model: &mut Model, labels: &[f64]) {
    if labels.is_empty() {
        return;
    }
    let mean = labels.iter().sum::<f64>() / labels.len() as f64;
    let b = model.head_b;
    model.store.tensor_mut(b).data_mut()[0] = mean;
}
