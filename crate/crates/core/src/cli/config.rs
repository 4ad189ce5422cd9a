use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::encoders::{AlignmentHeads, LossWeights, ModelConfig, PretrainSchedule, SequenceEncoderConfig};
use crate::error::{Error, Result};
use crate::ppinet::{GinConfig, PairHeadConfig, PpiTrainConfig};
use crate::splitbench::SplitMethod;

/// Alignment heads, loss weights and hierarchy level weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlignmentConfig {
    pub tau: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub proj_dim: usize,
    pub match_hidden: usize,
    pub annotation_hidden: usize,
    pub w_hc: f64,
    pub w_sac: f64,
    pub w_sam: f64,
    /// One weight per hierarchy level, root first; all ones when absent.
    pub level_weights: Option<Vec<f64>>,
}

impl Default for AlignmentConfig {
    fn default() -> Self {
        let h = AlignmentHeads::default();
        Self {
            tau: h.tau,
            alpha: h.alpha,
            gamma: h.gamma,
            proj_dim: h.proj_dim,
            match_hidden: h.match_hidden,
            annotation_hidden: 64,
            w_hc: 1.0,
            w_sac: 1.0,
            w_sam: 1.0,
            level_weights: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub seed: u64,
    /// Only `"f64"` is supported.
    pub precision: String,
    pub pretrain_steps: usize,
    pub pretrain_batch_size: usize,
    pub pretrain_lr: f64,
    pub ppi_epochs: usize,
    pub ppi_lr: f64,
    pub threshold: f64,
    pub freeze_projection: bool,
    pub split_method: SplitMethod,
    pub test_fraction: f64,
    /// Share of all edges held out for validation.
    pub val_fraction: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        let s = PretrainSchedule::default();
        let p = PpiTrainConfig::default();
        Self {
            seed: 1,
            precision: "f64".into(),
            pretrain_steps: s.steps,
            pretrain_batch_size: s.batch_size,
            pretrain_lr: s.lr,
            ppi_epochs: p.epochs,
            ppi_lr: p.lr,
            threshold: p.threshold,
            freeze_projection: p.freeze_projection,
            split_method: SplitMethod::Bfs,
            test_fraction: 0.2,
            val_fraction: 0.16,
        }
    }
}

/// File locations; not part of the config hash.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub fasta: Option<PathBuf>,
    pub annotations: Option<PathBuf>,
    pub hierarchy: Option<PathBuf>,
    pub edges: Option<PathBuf>,
    pub sites: Option<PathBuf>,
    pub split: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub encoder: SequenceEncoderConfig,
    pub alignment: AlignmentConfig,
    pub gin: GinConfig,
    pub pair_head: PairHeadConfig,
    pub training: TrainingConfig,
    pub paths: PathsConfig,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.training.precision != "f64" {
            return Err(Error::Config(format!(
                "precision `{}` is not supported (only f64)",
                self.training.precision
            )));
        }
        self.model().validate()?;
        self.loss_weights().validate()?;
        self.gin.validate()?;
        if let Some(w) = &self.alignment.level_weights {
            if w.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
                return Err(Error::Config("level weights must be positive".into()));
            }
        }
        let t = &self.training;
        if t.pretrain_batch_size < 2 {
            return Err(Error::Config("pretrain_batch_size must be at least 2".into()));
        }
        if !(t.pretrain_lr > 0.0) || !(t.ppi_lr > 0.0) {
            return Err(Error::Config("learning rates must be positive".into()));
        }
        if !(t.threshold > 0.0 && t.threshold < 1.0) {
            return Err(Error::Config("threshold must lie in (0, 1)".into()));
        }
        Ok(())
    }

    pub fn model(&self) -> ModelConfig {
        let a = &self.alignment;
        ModelConfig {
            encoder: self.encoder.clone(),
            annotation_hidden: a.annotation_hidden,
            heads: AlignmentHeads {
                proj_dim: a.proj_dim,
                match_hidden: a.match_hidden,
                tau: a.tau,
                alpha: a.alpha,
                gamma: a.gamma,
            },
        }
    }

    pub fn loss_weights(&self) -> LossWeights {
        LossWeights {
            hc: self.alignment.w_hc,
            sac: self.alignment.w_sac,
            sam: self.alignment.w_sam,
        }
    }

    pub fn schedule(&self) -> PretrainSchedule {
        PretrainSchedule {
            steps: self.training.pretrain_steps,
            batch_size: self.training.pretrain_batch_size,
            lr: self.training.pretrain_lr,
            weights: self.loss_weights(),
        }
    }

    pub fn ppi_training(&self) -> PpiTrainConfig {
        PpiTrainConfig {
            epochs: self.training.ppi_epochs,
            lr: self.training.ppi_lr,
            threshold: self.training.threshold,
            freeze_projection: self.training.freeze_projection,
        }
    }

    /// Hex SHA-256 of the canonical JSON (sorted keys, no whitespace) of
    /// everything except `paths`.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let serde_json::Value::Object(m) = &mut v {
            m.remove("paths");
        }
        let canonical = serde_json::to_string(&canonicalize(v)).expect("value serializes");
        Sha256::digest(canonical.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

fn canonicalize(v: serde_json::Value) -> serde_json::Value {
    use serde_json::Value;
    match v {
        Value::Object(m) => {
            let sorted: std::collections::BTreeMap<String, Value> =
                m.into_iter().map(|(k, v)| (k, canonicalize(v))).collect();
            Value::Object(sorted.into_iter().collect())
        }
        Value::Array(a) => Value::Array(a.into_iter().map(canonicalize).collect()),
        other => other,
    }
}
