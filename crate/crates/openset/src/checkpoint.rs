//! JSON checkpoints.
//!
//! ```json
//! {
//!   "format": "openset-checkpoint",
//!   "version": 1,
//!   "layer_sizes": [2, 32, 32, 8],
//!   "head": "distance",
//!   "classes": 6,
//!   "init_seed": 0,
//!   "freeze_anchors": false,
//!   "log_priors": [...],
//!   "parameters": [{"name": "layer0.weight", "shape": [2, 32], "data": [...]}, ...],
//!   "epochs_done": 300,
//!   "velocity": [{"name": ..., "shape": ..., "data": ...}, ...]
//! }
//! ```
//!
//! Parameters follow `Model::parameters` order: `layer{i}.weight`,
//! `layer{i}.bias` for every dense layer, then `anchors` (distance head) or
//! `head.weight`, `head.bias` (softmax head). Weights are `in × out`,
//! anchors `C × n`, the softmax weight `C × n`. Floats are written in
//! shortest round-trip form, so save/load is bitwise lossless.

use std::fs;
use std::path::Path;

use openset_core::model::{Dense, DistanceHead, Head, HeadKind, Mlp, Model, SoftmaxHead};
use openset_core::trainer::TrainState;
use openset_core::Tensor;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const FORMAT: &str = "openset-checkpoint";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadName {
    Distance,
    Softmax,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub layer_sizes: Vec<usize>,
    pub head: HeadName,
    pub classes: usize,
    pub init_seed: u64,
    pub freeze_anchors: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_priors: Option<Vec<f64>>,
    pub parameters: Vec<NamedTensor>,
    pub epochs_done: usize,
    pub velocity: Vec<NamedTensor>,
}

fn parameter_names(model: &Model) -> Vec<String> {
    let mut names = Vec::new();
    for i in 0..model.extractor().layers().len() {
        names.push(format!("layer{i}.weight"));
        names.push(format!("layer{i}.bias"));
    }
    match model.head_kind() {
        HeadKind::Distance => names.push("anchors".into()),
        HeadKind::Softmax => {
            names.push("head.weight".into());
            names.push("head.bias".into());
        }
    }
    names
}

fn named(names: &[String], tensors: &[&Tensor]) -> Vec<NamedTensor> {
    names
        .iter()
        .zip(tensors)
        .map(|(name, t)| NamedTensor {
            name: name.clone(),
            shape: t.shape().to_vec(),
            data: t.data().to_vec(),
        })
        .collect()
}

impl Checkpoint {
    pub fn from_state(state: &TrainState) -> Self {
        let model = &state.model;
        let names = parameter_names(model);
        let velocity: Vec<&Tensor> = state.velocity.iter().collect();
        Checkpoint {
            format: FORMAT.into(),
            version: VERSION,
            layer_sizes: model.extractor().sizes(),
            head: match model.head_kind() {
                HeadKind::Distance => HeadName::Distance,
                HeadKind::Softmax => HeadName::Softmax,
            },
            classes: model.classes(),
            init_seed: model.init_seed,
            freeze_anchors: model.freeze_anchors,
            log_priors: model.distance_head().map(|h| h.log_priors().to_vec()),
            parameters: named(&names, &model.parameters()),
            epochs_done: state.epochs_done,
            velocity: named(&names, &velocity),
        }
    }

    pub fn to_state(&self) -> std::result::Result<TrainState, String> {
        if self.format != FORMAT || self.version != VERSION {
            return Err(format!("not an {FORMAT} v{VERSION} file"));
        }
        let layers = self.layer_sizes.len().checked_sub(1).filter(|&l| l > 0).ok_or("need at least two layer sizes")?;
        let head_count = match self.head {
            HeadName::Distance => 1,
            HeadName::Softmax => 2,
        };
        if self.parameters.len() != 2 * layers + head_count {
            return Err(format!("expected {} parameter tensors, found {}", 2 * layers + head_count, self.parameters.len()));
        }
        let tensor = |t: &NamedTensor, shape: [usize; 2]| -> std::result::Result<Tensor, String> {
            if t.shape != shape {
                return Err(format!("{}: shape {:?}, expected {:?}", t.name, t.shape, shape));
            }
            Tensor::new(t.shape.clone(), t.data.clone()).map_err(|e| format!("{}: {e}", t.name))
        };
        let mut dense = Vec::with_capacity(layers);
        for i in 0..layers {
            let (fan_in, fan_out) = (self.layer_sizes[i], self.layer_sizes[i + 1]);
            dense.push(Dense {
                weight: tensor(&self.parameters[2 * i], [fan_in, fan_out])?,
                bias: tensor(&self.parameters[2 * i + 1], [1, fan_out])?,
            });
        }
        let n = self.layer_sizes[layers];
        let rest = &self.parameters[2 * layers..];
        let head = match self.head {
            HeadName::Distance => {
                let anchors = tensor(&rest[0], [self.classes, n])?;
                let head = match &self.log_priors {
                    Some(lp) => DistanceHead::with_log_priors(anchors, lp.clone()),
                    None => DistanceHead::new(anchors),
                };
                Head::Distance(head.map_err(|e| e.to_string())?)
            }
            HeadName::Softmax => Head::Softmax(
                SoftmaxHead::new(tensor(&rest[0], [self.classes, n])?, tensor(&rest[1], [1, self.classes])?)
                    .map_err(|e| e.to_string())?,
            ),
        };
        let extractor = Mlp::from_layers(dense).map_err(|e| e.to_string())?;
        let mut model = Model::new(extractor, head).map_err(|e| e.to_string())?;
        model.init_seed = self.init_seed;
        model.freeze_anchors = self.freeze_anchors;

        if self.velocity.len() != self.parameters.len() {
            return Err("velocity must have one buffer per parameter".into());
        }
        let velocity = self
            .velocity
            .iter()
            .zip(&self.parameters)
            .map(|(v, p)| {
                if v.shape != p.shape {
                    return Err(format!("velocity {}: shape {:?}, expected {:?}", v.name, v.shape, p.shape));
                }
                Tensor::new(v.shape.clone(), v.data.clone()).map_err(|e| e.to_string())
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(TrainState {
            model,
            velocity,
            epochs_done: self.epochs_done,
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("checkpoint serializes");
        s.push('\n');
        s
    }
}

pub fn save(path: &Path, state: &TrainState) -> Result<()> {
    fs::write(path, Checkpoint::from_state(state).to_json()).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<TrainState> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let format_err = |reason: String| Error::Format {
        path: path.to_path_buf(),
        reason,
    };
    let ckpt: Checkpoint = serde_json::from_str(&text).map_err(|e| format_err(e.to_string()))?;
    ckpt.to_state().map_err(format_err)
}
