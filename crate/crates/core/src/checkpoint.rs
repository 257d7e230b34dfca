//! Model checkpoints.
//!
//! A checkpoint is a JSON document:
//!
//! ```json
//! {
//!   "format": "textgcn-checkpoint",
//!   "version": 1,
//!   "kind": "gcn",
//!   "dims": [L1, L2, C],
//!   "seed": 7,
//!   "hyperparams": { "lr": 0.05, "epochs": 200, "seed": 7, "hidden": 16, "weight_decay": 0.0 },
//!   "theta1": [[...], ...],
//!   "theta2": [[...], ...],
//!   "normalize_features": false,
//!   "labeled": [3, 17, ...]
//! }
//! ```
//!
//! or, for the baseline, `"kind": "logreg"` with `dims: [L1, C]`,
//! `hyperparams` (`lr`, `epochs`, `l2`), `weights` (`L1 × C`) and `bias`.
//! Matrices are arrays of rows. Numbers are written in shortest round-trip
//! form and parsed exactly, so save/load/save is byte-stable. `labeled`
//! records the training split (when known) so that evaluation can score the
//! remaining nodes.

use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::baseline::{LogRegModel, LogRegParams};
use crate::gcn::{GcnModel, Hyperparams};
use crate::{Error, Result};

pub const FORMAT: &str = "textgcn-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum TrainedModel {
    Gcn {
        model: GcnModel,
        seed: u64,
        hyperparams: Hyperparams,
    },
    Logreg {
        model: LogRegModel,
        hyperparams: LogRegParams,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: TrainedModel,
    pub normalize_features: bool,
    pub labeled: Option<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct Wire {
    format: String,
    version: u32,
    #[serde(flatten)]
    body: WireBody,
    #[serde(default)]
    normalize_features: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labeled: Option<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum WireBody {
    Gcn {
        dims: [usize; 3],
        seed: u64,
        hyperparams: Hyperparams,
        theta1: Vec<Vec<f64>>,
        theta2: Vec<Vec<f64>>,
    },
    Logreg {
        dims: [usize; 2],
        hyperparams: LogRegParams,
        weights: Vec<Vec<f64>>,
        bias: Vec<f64>,
    },
}

fn rows_of(m: &Array2<f64>) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn matrix(rows: Vec<Vec<f64>>, shape: (usize, usize), name: &str) -> Result<Array2<f64>> {
    if rows.len() != shape.0 || rows.iter().any(|r| r.len() != shape.1) {
        return Err(Error::invalid(
            "checkpoint",
            format!("{name} does not have the declared shape {shape:?}"),
        ));
    }
    Ok(Array2::from_shape_vec(shape, rows.concat()).expect("shape checked"))
}

impl Checkpoint {
    pub fn to_json(&self) -> Result<String> {
        let body = match &self.model {
            TrainedModel::Gcn {
                model,
                seed,
                hyperparams,
            } => {
                let (l1, l2, c) = model.dims();
                WireBody::Gcn {
                    dims: [l1, l2, c],
                    seed: *seed,
                    hyperparams: *hyperparams,
                    theta1: rows_of(&model.theta1),
                    theta2: rows_of(&model.theta2),
                }
            }
            TrainedModel::Logreg { model, hyperparams } => WireBody::Logreg {
                dims: [model.dim(), model.classes()],
                hyperparams: *hyperparams,
                weights: rows_of(&model.w),
                bias: model.b.to_vec(),
            },
        };
        let wire = Wire {
            format: FORMAT.to_owned(),
            version: VERSION,
            body,
            normalize_features: self.normalize_features,
            labeled: self.labeled.clone(),
        };
        let mut text = serde_json::to_string_pretty(&wire)?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let wire: Wire = serde_json::from_str(text)?;
        if wire.format != FORMAT {
            return Err(Error::invalid("checkpoint", format!("unknown format `{}`", wire.format)));
        }
        if wire.version != VERSION {
            return Err(Error::invalid(
                "checkpoint",
                format!("unsupported version {} (expected {VERSION})", wire.version),
            ));
        }
        let model = match wire.body {
            WireBody::Gcn {
                dims: [l1, l2, c],
                seed,
                hyperparams,
                theta1,
                theta2,
            } => TrainedModel::Gcn {
                model: GcnModel::new(matrix(theta1, (l1, l2), "theta1")?, matrix(theta2, (l2, c), "theta2")?)?,
                seed,
                hyperparams,
            },
            WireBody::Logreg {
                dims: [l1, c],
                hyperparams,
                weights,
                bias,
            } => {
                if bias.len() != c {
                    return Err(Error::invalid("checkpoint", "bias length does not match class count"));
                }
                TrainedModel::Logreg {
                    model: LogRegModel::new(matrix(weights, (l1, c), "weights")?, Array1::from(bias))?,
                    hyperparams,
                }
            }
        };
        Ok(Checkpoint {
            model,
            normalize_features: wire.normalize_features,
            labeled: wire.labeled,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
