//! Experiment configuration (TOML).
//!
//! ```toml
//! seed = 0
//! out_dir = "runs/default"
//!
//! [data]
//! source = "synthetic"        # or "csv"
//! input_dim = 2
//! total_classes = 10
//! kkc_count = 6
//! uuc_count = 4
//! samples_per_class = 200
//! class_center_scale = 2.0
//! cluster_std = 0.2
//! kuc_mode = "uniform_box"    # ring | held_out_blobs | uniform_box
//! # seed = 0                  # defaults to the top-level seed
//! # source = "csv" takes train_known, background, test_known, test_unknown paths
//!
//! [model]
//! hidden = [32, 32]
//! latent_dim = 8
//! # head = "distance"         # defaults to the head the loss family needs
//! freeze_anchors = false
//!
//! [loss]
//! family = "class_inclusion"  # hsc | triplet | objectosphere | uniformity | energy | none
//! lambda = 1.0
//! triplet_margin = 1.0
//! # xi = 2.83                 # objectosphere; defaults to sqrt(latent_dim)
//! energy_m_in = -7.0
//! energy_m_out = -1.0
//!
//! [optim]
//! epochs = 300
//! batch_size_known = 64
//! batch_size_background = 64
//! lr_init = 0.01
//! warmup_epochs = 5
//! momentum = 0.9
//! checkpoint_every = 0
//!
//! [eval]
//! fpr_target = 0.1
//! tpr_target = 0.95
//! f1_acceptance_rate = 0.95   # τ accepting this share of train_known
//! # f1_threshold = -4.0       # fixed τ instead
//! ```
//!
//! Unknown keys are rejected. `validate` checks the whole file before any
//! work starts and names the offending key.

use std::path::{Path, PathBuf};

use openset_core::data::{KucMode, SyntheticSpec};
use openset_core::losses::{LossConfig, LossFamily};
use openset_core::model::HeadKind;
use openset_core::trainer::OptimConfig;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub data: DataConfig,
    pub model: ModelConfig,
    pub loss: LossSection,
    pub optim: OptimSection,
    pub eval: EvalConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub source: DataSource,
    pub input_dim: usize,
    pub total_classes: usize,
    pub kkc_count: usize,
    pub uuc_count: usize,
    pub samples_per_class: usize,
    pub class_center_scale: f64,
    pub cluster_std: f64,
    pub kuc_mode: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_known: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub background: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_known: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_unknown: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Synthetic,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub hidden: Vec<usize>,
    pub latent_dim: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub head: Option<String>,
    pub freeze_anchors: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossSection {
    pub family: String,
    pub lambda: f64,
    pub triplet_margin: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xi: Option<f64>,
    pub energy_m_in: f64,
    pub energy_m_out: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimSection {
    pub epochs: usize,
    pub batch_size_known: usize,
    pub batch_size_background: usize,
    pub lr_init: f64,
    pub warmup_epochs: usize,
    pub momentum: f64,
    pub checkpoint_every: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub fpr_target: f64,
    pub tpr_target: f64,
    pub f1_acceptance_rate: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f1_threshold: Option<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            out_dir: PathBuf::from("runs/default"),
            data: DataConfig::default(),
            model: ModelConfig::default(),
            loss: LossSection::default(),
            optim: OptimSection::default(),
            eval: EvalConfig::default(),
        }
    }
}

impl Default for DataConfig {
    fn default() -> Self {
        let s = SyntheticSpec::default();
        DataConfig {
            source: DataSource::Synthetic,
            input_dim: s.input_dim,
            total_classes: s.total_classes,
            kkc_count: s.kkc_count,
            uuc_count: s.uuc_count,
            samples_per_class: s.samples_per_class,
            class_center_scale: s.class_center_scale,
            cluster_std: s.cluster_std,
            kuc_mode: s.kuc_mode.name().into(),
            seed: None,
            train_known: None,
            background: None,
            test_known: None,
            test_unknown: None,
        }
    }
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            hidden: vec![32, 32],
            latent_dim: 8,
            head: None,
            freeze_anchors: false,
        }
    }
}

impl Default for LossSection {
    fn default() -> Self {
        let c = LossConfig::default();
        LossSection {
            family: c.family.name().into(),
            lambda: c.lambda,
            triplet_margin: c.triplet_margin,
            xi: c.xi,
            energy_m_in: c.energy_m_in,
            energy_m_out: c.energy_m_out,
        }
    }
}

impl Default for OptimSection {
    fn default() -> Self {
        let o = OptimConfig::default();
        OptimSection {
            epochs: o.epochs,
            batch_size_known: o.batch_size_known,
            batch_size_background: o.batch_size_background,
            lr_init: o.lr_init,
            warmup_epochs: o.warmup_epochs,
            momentum: o.momentum,
            checkpoint_every: o.checkpoint_every,
        }
    }
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            fpr_target: 0.1,
            tpr_target: 0.95,
            f1_acceptance_rate: 0.95,
            f1_threshold: None,
        }
    }
}

fn core_to_config(e: openset_core::Error) -> Error {
    match e {
        openset_core::Error::Invalid { field, reason } => Error::config(field, reason),
        other => Error::config("config", other.to_string()),
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::config("toml", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn data_seed(&self) -> u64 {
        self.data.seed.unwrap_or(self.seed)
    }

    pub fn synthetic_spec(&self) -> Result<SyntheticSpec> {
        let d = &self.data;
        let kuc_mode = KucMode::from_name(&d.kuc_mode)
            .ok_or_else(|| Error::config("data.kuc_mode", format!("unknown mode {:?}", d.kuc_mode)))?;
        Ok(SyntheticSpec {
            input_dim: d.input_dim,
            total_classes: d.total_classes,
            kkc_count: d.kkc_count,
            uuc_count: d.uuc_count,
            samples_per_class: d.samples_per_class,
            class_center_scale: d.class_center_scale,
            cluster_std: d.cluster_std,
            kuc_mode,
            seed: self.data_seed(),
        })
    }

    pub fn loss_config(&self) -> Result<LossConfig> {
        let l = &self.loss;
        let family = LossFamily::from_name(&l.family)
            .ok_or_else(|| Error::config("loss.family", format!("unknown family {:?}", l.family)))?;
        Ok(LossConfig {
            family,
            lambda: l.lambda,
            triplet_margin: l.triplet_margin,
            xi: l.xi,
            energy_m_in: l.energy_m_in,
            energy_m_out: l.energy_m_out,
        })
    }

    pub fn optim_config(&self) -> OptimConfig {
        let o = &self.optim;
        OptimConfig {
            epochs: o.epochs,
            batch_size_known: o.batch_size_known,
            batch_size_background: o.batch_size_background,
            lr_init: o.lr_init,
            warmup_epochs: o.warmup_epochs,
            momentum: o.momentum,
            seed: self.seed,
            checkpoint_every: o.checkpoint_every,
        }
    }

    /// Head type: explicit `model.head`, else whatever the loss family needs.
    pub fn head_kind(&self) -> Result<HeadKind> {
        let family = self.loss_config()?.family;
        match self.model.head.as_deref() {
            None => Ok(family.head_kind().unwrap_or(HeadKind::Distance)),
            Some("distance") => Ok(HeadKind::Distance),
            Some("softmax") => Ok(HeadKind::Softmax),
            Some(other) => Err(Error::config("model.head", format!("unknown head {other:?}"))),
        }
    }

    /// `[input_dim, hidden..., latent_dim]`.
    pub fn layer_sizes(&self, input_dim: usize) -> Vec<usize> {
        let mut sizes = vec![input_dim];
        sizes.extend(&self.model.hidden);
        sizes.push(self.model.latent_dim);
        sizes
    }

    pub fn validate(&self) -> Result<()> {
        match self.data.source {
            DataSource::Synthetic => {
                self.synthetic_spec()?.validate().map_err(core_to_config)?;
            }
            DataSource::Csv => {
                for (key, path) in [
                    ("data.train_known", &self.data.train_known),
                    ("data.background", &self.data.background),
                    ("data.test_known", &self.data.test_known),
                    ("data.test_unknown", &self.data.test_unknown),
                ] {
                    if path.is_none() {
                        return Err(Error::config(key, "required when data.source = \"csv\""));
                    }
                }
                if self.data.input_dim == 0 {
                    return Err(Error::config("data.input_dim", "must be at least 1"));
                }
            }
        }
        if self.model.latent_dim == 0 {
            return Err(Error::config("model.latent_dim", "must be at least 1"));
        }
        if self.model.hidden.contains(&0) {
            return Err(Error::config("model.hidden", "layer widths must be positive"));
        }
        let loss = self.loss_config()?;
        loss.validate().map_err(core_to_config)?;
        let head = self.head_kind()?;
        if let Some(needed) = loss.family.head_kind() {
            if needed != head {
                return Err(Error::config(
                    "model.head",
                    format!("loss family {} needs a {needed:?} head", loss.family.name()),
                ));
            }
        }
        self.optim_config().validate().map_err(core_to_config)?;
        let e = &self.eval;
        if !(e.fpr_target >= 0.0 && e.fpr_target <= 1.0) {
            return Err(Error::config("eval.fpr_target", "must lie in [0, 1]"));
        }
        if !(e.tpr_target > 0.0 && e.tpr_target <= 1.0) {
            return Err(Error::config("eval.tpr_target", "must lie in (0, 1]"));
        }
        if !(e.f1_acceptance_rate > 0.0 && e.f1_acceptance_rate <= 1.0) {
            return Err(Error::config("eval.f1_acceptance_rate", "must lie in (0, 1]"));
        }
        if e.f1_threshold.is_some_and(|t| !t.is_finite()) {
            return Err(Error::config("eval.f1_threshold", "must be finite"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = ExperimentConfig::from_toml("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.layer_sizes(2), vec![2, 32, 32, 8]);
        assert_eq!(cfg.head_kind().unwrap(), HeadKind::Distance);
    }

    #[test]
    fn toml_round_trip() {
        let mut cfg = ExperimentConfig::default();
        cfg.loss.xi = Some(2.5);
        cfg.eval.f1_threshold = Some(-3.0);
        let back = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for text in ["sed = 1", "[data]\nnoise = 1.0", "[optim]\nlr = 0.1", "[extra]\n"] {
            let err = ExperimentConfig::from_toml(text).unwrap_err();
            assert_eq!(err.exit_code(), 2, "{text}: {err}");
        }
    }

    #[test]
    fn softmax_family_selects_softmax_head() {
        let cfg = ExperimentConfig::from_toml("[loss]\nfamily = \"energy\"").unwrap();
        assert_eq!(cfg.head_kind().unwrap(), HeadKind::Softmax);
        let err = ExperimentConfig::from_toml("[loss]\nfamily = \"energy\"\n[model]\nhead = \"distance\"").unwrap_err();
        assert!(matches!(err, Error::Config { ref field, .. } if field == "model.head"));
    }
}
