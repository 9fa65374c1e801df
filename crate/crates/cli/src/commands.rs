use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use hiercpi::molio::{parse_pdb, parse_sdf, validate_complex, AtomGraph, MolIoError};
use hiercpi::motif::{decompose_compound, decompose_protein, MotifGraph};
use hiercpi::numerics::{Adam, Checkpoint, Tensor};
use hiercpi::synth::{write_dataset, SynthOptions};
use hiercpi::training::{
    center_affinity_head, finetune_forward, finetune_step, metric_pearson, metric_rmse, predict_all, pretrain_step,
    Branch, LossBundle, Model, Pearson, PreparedComplex,
};
use log::{info, warn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::RunConfig;
use crate::data::{load_manifest, require_labels};
use crate::error::{io_err, CliError, CliResult};

pub const PRETRAIN_CSV: &str = "pretrain_loss.csv";
pub const FINETUNE_CSV: &str = "finetune_metrics.csv";
pub const PRETRAIN_FINAL: &str = "pretrain_final.json";
pub const FINETUNE_FINAL: &str = "finetune_final.json";
pub const CONFIG_ECHO: &str = "config.json";

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn read_molecule(path: &Path, parse: fn(&str) -> Result<AtomGraph, MolIoError>) -> CliResult<AtomGraph> {
    parse(&read_text(path)?).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn create_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path).map_err(io_err(path))
}

fn write_file(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(io_err(path))
}

fn csv_writer(path: &Path, header: &[&str]) -> CliResult<csv::Writer<fs::File>> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    Ok(w)
}

fn csv_err(path: &Path, e: csv::Error) -> CliError {
    CliError::runtime(format!("{}: {e}", path.display()))
}

fn thread_pool(threads: usize) -> CliResult<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::runtime(format!("thread pool: {e}")))
}

pub fn load_checkpoint(path: &Path) -> CliResult<Model> {
    let ck =
        Checkpoint::from_json(&read_text(path)?).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    Model::from_checkpoint(&ck).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn save_checkpoint(model: &Model, path: &Path, extra: serde_json::Value) -> CliResult<()> {
    write_file(path, &model.checkpoint(extra).to_json())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MotifSummary {
    pub motifs: usize,
    pub cut_bonds: usize,
    /// Motif size → number of motifs of that size.
    pub size_histogram: BTreeMap<usize, usize>,
}

impl MotifSummary {
    pub fn of(mg: &MotifGraph) -> Self {
        let mut size_histogram = BTreeMap::new();
        for m in &mg.motifs {
            *size_histogram.entry(m.len()).or_insert(0) += 1;
        }
        MotifSummary { motifs: mg.len(), cut_bonds: mg.cut_bonds.len(), size_histogram }
    }

    /// For example "2 motifs, 1 cut bond; sizes 1:2".
    pub fn line(&self) -> String {
        let plural = |n: usize, word: &str| if n == 1 { format!("{n} {word}") } else { format!("{n} {word}s") };
        let sizes: Vec<String> = self.size_histogram.iter().map(|(s, c)| format!("{s}:{c}")).collect();
        format!("{}, {}; sizes {}", plural(self.motifs, "motif"), plural(self.cut_bonds, "cut bond"), sizes.join(" "))
    }
}

#[derive(Debug, Default, Serialize)]
struct DecomposeOutput {
    #[serde(skip_serializing_if = "Option::is_none")]
    compound: Option<MotifGraph>,
    #[serde(skip_serializing_if = "Option::is_none")]
    protein: Option<MotifGraph>,
}

/// Decomposes the given molecules, optionally writing the motif graphs as
/// JSON, and returns one summary line per molecule.
pub fn decompose(compound: Option<&Path>, protein: Option<&Path>, out: Option<&Path>) -> CliResult<Vec<String>> {
    if compound.is_none() && protein.is_none() {
        return Err(CliError::input("decompose needs --compound and/or --protein"));
    }
    let mut output = DecomposeOutput::default();
    let mut lines = Vec::new();
    if let Some(p) = compound {
        let mg = decompose_compound(&read_molecule(p, parse_sdf)?);
        lines.push(format!("compound: {}", MotifSummary::of(&mg).line()));
        output.compound = Some(mg);
    }
    if let Some(p) = protein {
        let mg = decompose_protein(&read_molecule(p, parse_pdb)?);
        for w in &mg.warnings {
            warn!("{}: {w}", p.display());
        }
        lines.push(format!("protein: {}", MotifSummary::of(&mg).line()));
        output.protein = Some(mg);
    }
    if let Some(out) = out {
        write_file(out, &serde_json::to_string_pretty(&output).expect("motif graphs serialise"))?;
    }
    Ok(lines)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PretrainSummary {
    pub complexes: usize,
    pub skipped: usize,
    pub steps: usize,
    pub first: Option<LossBundle>,
    pub last: Option<LossBundle>,
    pub csv: PathBuf,
    pub checkpoint: PathBuf,
}

fn echo_config(cfg: &RunConfig) -> CliResult<()> {
    create_dir(&cfg.paths.report_dir)?;
    create_dir(&cfg.paths.checkpoint_dir)?;
    write_file(&cfg.paths.report_dir.join(CONFIG_ECHO), &cfg.to_json())
}

/// Draws batches by walking a shuffled order, reshuffling after each pass.
struct Batcher {
    order: Vec<usize>,
    cursor: usize,
    size: usize,
}

impl Batcher {
    fn new(n: usize, size: usize) -> Self {
        Batcher { order: (0..n).collect(), cursor: n, size: size.min(n) }
    }

    fn next(&mut self, rng: &mut ChaCha8Rng) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.size);
        while out.len() < self.size {
            if self.cursor == self.order.len() {
                self.order.shuffle(rng);
                self.cursor = 0;
            }
            out.push(self.order[self.cursor]);
            self.cursor += 1;
        }
        out.sort_unstable();
        out
    }
}

fn gather(set: &[PreparedComplex], idx: &[usize]) -> Vec<PreparedComplex> {
    idx.iter().map(|&i| set[i].clone()).collect()
}

pub fn pretrain(cfg: &RunConfig) -> CliResult<PretrainSummary> {
    echo_config(cfg)?;
    let data = load_manifest(&cfg.paths.manifest)?;
    let set = &data.complexes;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = Model::new(&cfg.model.encoder_config(), &mut rng).map_err(|e| CliError::input(e.to_string()))?;
    let o = &cfg.optim;
    let mut opt = Adam::with_betas(o.lr, o.beta1, o.beta2, o.eps);
    let schedule = o.schedule();
    let loss_cfg = cfg.loss.loss_config();
    let csv_path = cfg.paths.report_dir.join(PRETRAIN_CSV);
    let mut csv = csv_writer(&csv_path, &["step", "l_atom", "l_motif", "l_cond", "total"])?;
    let pool = thread_pool(o.threads)?;
    let mut batcher = Batcher::new(set.len(), o.batch_size);
    let (mut first, mut last) = (None, None);
    for step in 0..o.steps {
        let idx = batcher.next(&mut rng);
        let gathered;
        let batch: &[PreparedComplex] = if idx.len() == set.len() {
            set
        } else {
            gathered = gather(set, &idx);
            &gathered
        };
        opt.lr = schedule.at(step, o.steps);
        let b = pool
            .install(|| pretrain_step(&mut model, batch, &mut opt, &mut rng, &loss_cfg))
            .map_err(|e| CliError::runtime(format!("step {step}: {e}")))?;
        csv.serialize((step, b.l_atom, b.l_motif, b.l_cond, b.total)).map_err(|e| csv_err(&csv_path, e))?;
        if step % 50 == 0 || step + 1 == o.steps {
            info!(
                "step {step}: total {:.6} (atom {:.6}, motif {:.6}, cond {:.6})",
                b.total, b.l_atom, b.l_motif, b.l_cond
            );
        }
        first.get_or_insert(b);
        last = Some(b);
        if (step + 1) % o.checkpoint_every == 0 {
            let path = cfg.paths.checkpoint_dir.join(format!("pretrain_step{:06}.json", step + 1));
            save_checkpoint(
                &model,
                &path,
                serde_json::json!({ "stage": "pretrain", "step": step + 1, "seed": cfg.seed }),
            )?;
        }
    }
    csv.flush().map_err(io_err(&csv_path))?;
    let checkpoint = cfg.paths.checkpoint_dir.join(PRETRAIN_FINAL);
    save_checkpoint(
        &model,
        &checkpoint,
        serde_json::json!({ "stage": "pretrain", "step": o.steps, "seed": cfg.seed }),
    )?;
    Ok(PretrainSummary {
        complexes: set.len(),
        skipped: data.skipped,
        steps: o.steps,
        first,
        last,
        csv: csv_path,
        checkpoint,
    })
}

/// Where finetuning takes its initial weights from.
#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    Scratch,
    Checkpoint(PathBuf),
}

impl Init {
    /// `scratch` or a checkpoint path.
    pub fn parse(s: &str) -> Self {
        if s == "scratch" {
            Init::Scratch
        } else {
            Init::Checkpoint(s.into())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_mse: f64,
    pub val_rmse: f64,
    pub val_pearson: Pearson,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FinetuneSummary {
    pub complexes: usize,
    pub skipped: usize,
    pub epochs: Vec<EpochMetrics>,
    pub csv: PathBuf,
    pub checkpoint: PathBuf,
}

pub fn finetune(cfg: &RunConfig, init: Option<Init>) -> CliResult<FinetuneSummary> {
    let init = init.unwrap_or_else(|| match &cfg.paths.init_checkpoint {
        Some(p) => Init::Checkpoint(p.clone()),
        None => Init::Scratch,
    });
    let data = load_manifest(&cfg.paths.manifest)?;
    let train = &data.complexes;
    let train_labels = require_labels(train, &cfg.paths.manifest)?;
    let val_data = match &cfg.paths.val_manifest {
        Some(p) => {
            let v = load_manifest(p)?;
            require_labels(&v.complexes, p)?;
            Some(v)
        }
        None => {
            warn!("no val_manifest configured; validation metrics are computed on the training set");
            None
        }
    };
    let val = val_data.as_ref().map_or(train, |v| &v.complexes);
    let val_labels: Vec<f64> = val.iter().filter_map(|pc| pc.complex.affinity).collect();
    echo_config(cfg)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = match &init {
        Init::Scratch => {
            Model::new(&cfg.model.encoder_config(), &mut rng).map_err(|e| CliError::input(e.to_string()))?
        }
        Init::Checkpoint(p) => {
            let m = load_checkpoint(p)?;
            if m.config != cfg.model.encoder_config() {
                warn!("{}: architecture differs from [model]; using the checkpoint's", p.display());
            }
            m
        }
    };
    center_affinity_head(&mut model, &train_labels);

    let o = &cfg.optim;
    let mut opt = Adam::with_betas(o.lr, o.beta1, o.beta2, o.eps);
    let schedule = o.schedule();
    let batches_per_epoch = train.len().div_ceil(o.batch_size);
    let total_steps = o.epochs * batches_per_epoch;
    let csv_path = cfg.paths.report_dir.join(FINETUNE_CSV);
    let mut csv = csv_writer(&csv_path, &["epoch", "train_mse", "val_rmse", "val_pearson"])?;
    let mut epochs = Vec::with_capacity(o.epochs);
    let pool = thread_pool(o.threads)?;
    let mut batcher = Batcher::new(train.len(), o.batch_size);
    let mut step = 0;
    for epoch in 0..o.epochs {
        let (mut se, mut count) = (0.0, 0);
        for _ in 0..batches_per_epoch {
            let idx = batcher.next(&mut rng);
            let gathered;
            let batch: &[PreparedComplex] = if idx.len() == train.len() {
                train
            } else {
                gathered = gather(train, &idx);
                &gathered
            };
            opt.lr = schedule.at(step, total_steps);
            let mse = pool
                .install(|| finetune_step(&mut model, batch, &mut opt))
                .map_err(|e| CliError::runtime(format!("epoch {epoch}: {e}")))?;
            se += mse * batch.len() as f64;
            count += batch.len();
            step += 1;
        }
        let preds = pool.install(|| predict_all(&model, val)).map_err(|e| CliError::runtime(e.to_string()))?;
        let m = EpochMetrics {
            epoch,
            train_mse: se / count as f64,
            val_rmse: metric_rmse(&preds, &val_labels).map_err(|e| CliError::runtime(e.to_string()))?,
            val_pearson: metric_pearson(&preds, &val_labels).map_err(|e| CliError::runtime(e.to_string()))?,
        };
        csv.write_record([
            m.epoch.to_string(),
            m.train_mse.to_string(),
            m.val_rmse.to_string(),
            m.val_pearson.to_string(),
        ])
        .map_err(|e| csv_err(&csv_path, e))?;
        if epoch % 50 == 0 || epoch + 1 == o.epochs {
            info!(
                "epoch {epoch}: train mse {:.6}, val rmse {:.6}, val pearson {}",
                m.train_mse, m.val_rmse, m.val_pearson
            );
        }
        epochs.push(m);
    }
    csv.flush().map_err(io_err(&csv_path))?;
    let checkpoint = cfg.paths.checkpoint_dir.join(FINETUNE_FINAL);
    let init_meta = match &init {
        Init::Scratch => "scratch".to_string(),
        Init::Checkpoint(p) => p.display().to_string(),
    };
    save_checkpoint(
        &model,
        &checkpoint,
        serde_json::json!({ "stage": "finetune", "epochs": o.epochs, "seed": cfg.seed, "init": init_meta }),
    )?;
    Ok(FinetuneSummary { complexes: train.len(), skipped: data.skipped, epochs, csv: csv_path, checkpoint })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvalReport {
    pub rmse: f64,
    pub pearson: Pearson,
    pub n: usize,
}

pub fn evaluate(checkpoint: &Path, manifest: &Path, out: Option<&Path>) -> CliResult<EvalReport> {
    let model = load_checkpoint(checkpoint)?;
    let data = load_manifest(manifest)?;
    let labels = require_labels(&data.complexes, manifest)?;
    let preds = predict_all(&model, &data.complexes).map_err(|e| CliError::runtime(e.to_string()))?;
    let report = EvalReport {
        rmse: metric_rmse(&preds, &labels).map_err(|e| CliError::runtime(e.to_string()))?,
        pearson: metric_pearson(&preds, &labels).map_err(|e| CliError::runtime(e.to_string()))?,
        n: preds.len(),
    };
    if let Some(out) = out {
        write_file(out, &serde_json::to_string_pretty(&report).expect("report serialises"))?;
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictReport {
    pub id: String,
    pub pka: f64,
    /// Predicted compound × protein distances, atom then motif level.
    pub distances: Option<(Tensor, Tensor)>,
}

/// Atom- and motif-level cross distances as the distance heads infer them
/// from intramolecular geometry alone.
pub fn predicted_distances(model: &Model, pc: &PreparedComplex) -> CliResult<(Tensor, Tensor)> {
    let pose = &pc.compound().coords;
    let run = |b| model.predict_cross(pc, b, pose).map_err(|e| CliError::runtime(format!("{}: {e}", pc.id())));
    Ok((run(Branch::Atom)?, run(Branch::Motif)?))
}

pub fn write_matrix(path: &Path, t: &Tensor) -> CliResult<()> {
    let (rows, cols) = (t.rows(), t.cols());
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path).map_err(|e| csv_err(path, e))?;
    for i in 0..rows {
        w.write_record((0..cols).map(|j| t.get(i, j).to_string())).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn predict(checkpoint: &Path, compound: &Path, protein: &Path, dump: Option<&Path>) -> CliResult<PredictReport> {
    let model = load_checkpoint(checkpoint)?;
    let c = read_molecule(compound, parse_sdf)?;
    let p = read_molecule(protein, parse_pdb)?;
    let id = compound.file_stem().map_or("complex".into(), |s| s.to_string_lossy().into_owned());
    let complex = validate_complex(id.clone(), c, p, None).map_err(|e| CliError::input(format!("{id}: {e}")))?;
    let pc = PreparedComplex::new(complex);
    let pka = finetune_forward(&model, &pc).map_err(|e| CliError::runtime(e.to_string()))?.value;
    let distances = match dump {
        Some(dir) => {
            create_dir(dir)?;
            let (atom, motif) = predicted_distances(&model, &pc)?;
            write_matrix(&dir.join("atom_distances.csv"), &atom)?;
            write_matrix(&dir.join("motif_distances.csv"), &motif)?;
            Some((atom, motif))
        }
        None => None,
    };
    Ok(PredictReport { id, pka, distances })
}

/// Writes `n` synthetic labeled complexes plus `manifest.jsonl` into `dir`.
pub fn synth(dir: &Path, n: usize, seed: u64, opts: &SynthOptions) -> CliResult<PathBuf> {
    if opts.compound_atoms.0 == 0 || opts.compound_atoms.0 > opts.compound_atoms.1 {
        return Err(CliError::input("invalid compound atom range"));
    }
    if opts.protein_atoms.0 == 0 || opts.protein_atoms.0 > opts.protein_atoms.1 {
        return Err(CliError::input("invalid protein atom range"));
    }
    create_dir(dir)?;
    write_dataset(dir, n, seed, opts).map_err(|e| CliError::runtime(e.to_string()))?;
    Ok(dir.join("manifest.jsonl"))
}
