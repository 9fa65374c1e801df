use std::path::{Path, PathBuf};

use hiercpi::encoder::EncoderConfig;
use hiercpi::training::{LossConfig, LrSchedule};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Everything a pretrain or finetune run reads from its config file.
///
/// The file is TOML-style `[section]` / `key = value` text; a JSON document
/// with the same shape (such as the echoed `config.json`) is accepted too.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub loss: LossSection,
    #[serde(default)]
    pub optim: OptimSection,
    pub paths: PathsSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub layers: usize,
    pub heads: usize,
    pub d_model: usize,
    pub kernels: usize,
    pub ffn_dim: usize,
    pub head_hidden: usize,
    pub mu_min: f64,
    pub mu_max: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        let c = EncoderConfig::default();
        ModelSection {
            layers: c.layers,
            heads: c.heads,
            d_model: c.d_model,
            kernels: c.kernels,
            ffn_dim: c.ffn_dim,
            head_hidden: c.head_hidden,
            mu_min: c.mu_min,
            mu_max: c.mu_max,
        }
    }
}

impl ModelSection {
    pub fn encoder_config(&self) -> EncoderConfig {
        EncoderConfig {
            layers: self.layers,
            heads: self.heads,
            d_model: self.d_model,
            kernels: self.kernels,
            ffn_dim: self.ffn_dim,
            head_hidden: self.head_hidden,
            mu_min: self.mu_min,
            mu_max: self.mu_max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossSection {
    pub clip_targets: bool,
    pub d_max: f64,
    pub w_atom: f64,
    pub w_motif: f64,
    pub w_cond: f64,
}

impl Default for LossSection {
    fn default() -> Self {
        LossSection { clip_targets: true, d_max: 20.0, w_atom: 1.0, w_motif: 1.0, w_cond: 1.0 }
    }
}

impl LossSection {
    pub fn loss_config(&self) -> LossConfig {
        LossConfig {
            d_max: self.clip_targets.then_some(self.d_max),
            w_atom: self.w_atom,
            w_motif: self.w_motif,
            w_cond: self.w_cond,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimSection {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Pretraining optimizer steps.
    pub steps: usize,
    /// Finetuning passes over the training manifest.
    pub epochs: usize,
    pub batch_size: usize,
    /// Fraction of the run after which the learning rate ramps down linearly.
    pub lr_decay_start: f64,
    pub lr_final_fraction: f64,
    pub checkpoint_every: usize,
    /// Worker threads; 0 lets the runtime decide.
    pub threads: usize,
}

impl Default for OptimSection {
    fn default() -> Self {
        OptimSection {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            steps: 1000,
            epochs: 100,
            batch_size: 8,
            lr_decay_start: 1.0,
            lr_final_fraction: 0.1,
            checkpoint_every: 100,
            threads: 0,
        }
    }
}

impl OptimSection {
    pub fn schedule(&self) -> LrSchedule {
        LrSchedule { base: self.lr, decay_start: self.lr_decay_start, final_fraction: self.lr_final_fraction }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsSection {
    pub manifest: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub val_manifest: Option<PathBuf>,
    pub checkpoint_dir: PathBuf,
    pub report_dir: PathBuf,
    /// Checkpoint finetuning starts from when `--init` is not given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init_checkpoint: Option<PathBuf>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        let cfg: RunConfig = if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| e.to_string())?
        } else {
            toml::from_str(text).map_err(|e| e.to_string())?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config and resolves relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        let mut cfg = RunConfig::parse(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut cfg.paths.manifest);
        fix(&mut cfg.paths.checkpoint_dir);
        fix(&mut cfg.paths.report_dir);
        cfg.paths.val_manifest.as_mut().map(fix);
        cfg.paths.init_checkpoint.as_mut().map(fix);
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), String> {
        self.model.encoder_config().validate().map_err(|e| e.to_string())?;
        let o = &self.optim;
        let l = &self.loss;
        let checks = [
            (o.lr.is_finite() && o.lr >= 0.0, "optim.lr must be finite and non-negative"),
            ((0.0..1.0).contains(&o.beta1), "optim.beta1 must lie in [0, 1)"),
            ((0.0..1.0).contains(&o.beta2), "optim.beta2 must lie in [0, 1)"),
            (o.eps > 0.0, "optim.eps must be positive"),
            (o.batch_size > 0, "optim.batch_size must be positive"),
            (o.checkpoint_every > 0, "optim.checkpoint_every must be positive"),
            ((0.0..=1.0).contains(&o.lr_decay_start), "optim.lr_decay_start must lie in [0, 1]"),
            ((0.0..=1.0).contains(&o.lr_final_fraction), "optim.lr_final_fraction must lie in [0, 1]"),
            (l.d_max > 0.0, "loss.d_max must be positive"),
            (
                [l.w_atom, l.w_motif, l.w_cond].iter().all(|w| w.is_finite() && *w >= 0.0),
                "loss weights must be finite and non-negative",
            ),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, msg)) => Err(msg.to_string()),
            None => Ok(()),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "seed = 3\n[paths]\nmanifest = \"m.jsonl\"\ncheckpoint_dir = \"ck\"\nreport_dir = \"rep\"\n";

    #[test]
    fn defaults_fill_missing_sections() {
        let c = RunConfig::parse(MINIMAL).unwrap();
        assert_eq!(c.seed, 3);
        assert_eq!(c.model, ModelSection::default());
        assert_eq!(c.loss.loss_config(), LossConfig::default());
    }

    #[test]
    fn seed_is_mandatory() {
        let e = RunConfig::parse(&MINIMAL.replace("seed = 3\n", "")).unwrap_err();
        assert!(e.contains("seed"), "{e}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let e = RunConfig::parse(&format!("{MINIMAL}[optim]\nlearning_rate = 0.1\n")).unwrap_err();
        assert!(e.contains("learning_rate"), "{e}");
        assert!(RunConfig::parse(&format!("colour = 1\n{MINIMAL}")).is_err());
    }

    #[test]
    fn invalid_values_are_rejected() {
        let e = RunConfig::parse(&format!("{MINIMAL}[model]\nd_model = 10\nheads = 4\n")).unwrap_err();
        assert!(e.contains("heads"), "{e}");
        assert!(RunConfig::parse(&format!("{MINIMAL}[optim]\nbatch_size = 0\n")).is_err());
        assert!(RunConfig::parse(&format!("{MINIMAL}[optim]\nlr = -1.0\n")).is_err());
    }

    #[test]
    fn json_echo_round_trips() {
        let text = format!("{MINIMAL}[loss]\nclip_targets = false\n[optim]\nlr = 0.0125\nsteps = 7\n");
        let c = RunConfig::parse(&text).unwrap();
        assert_eq!(RunConfig::parse(&c.to_json()).unwrap(), c);
        assert_eq!(c.loss.loss_config().d_max, None);
    }
}
