//! Label-budget sweep.
//!
//! For every budget `l` and repeat `r` the runner derives a seed
//! `base_seed ⊕ h(l, r)`, draws a split with it, trains every configured
//! model and scores it on all unlabeled nodes. The graph depends only on
//! `X`, so it is built once and shared by all cells. Cells run in parallel;
//! the report is assembled in a fixed order afterwards.
//!
//! # Config (JSON, `"version": 1`)
//!
//! ```json
//! {
//!   "version": 1,
//!   "dataset": { "synth": { "n": 300, "dim": 8, "classes": 3, "sep": 6.0, "seed": 1 } },
//!   "graph": { "method": "knn", "k": 5, "metric": "euclidean" },
//!   "models": ["gcn", "logreg"],
//!   "budgets": [9, 30],
//!   "repeats": 10,
//!   "base_seed": 0,
//!   "stratified": true,
//!   "normalize_features": false,
//!   "gcn": { "lr": 0.05, "epochs": 200, "hidden": 16, "weight_decay": 0.0 },
//!   "logreg": { "lr": 0.5, "epochs": 500, "l2": 0.0001 },
//!   "record_wall_time": false
//! }
//! ```
//!
//! `dataset` may instead be `{ "path": "embeddings.csv" }`; relative paths
//! are resolved against the config file's directory. Every field except
//! `version`, `dataset` and `budgets` is optional and defaults to the values
//! shown. With `record_wall_time` off the `wall_ms` column is written as 0
//! so that reruns produce byte-identical reports.

use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::{ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::accuracy;
use super::report::{EvalReport, ResultRow};
use crate::baseline::{predict_logreg, train_logreg, LogRegParams};
use crate::dataset::{build_label_matrix, load_dataset, make_split, synth_blobs, EmbeddingDataset, LabelMatrix, LabeledSplit};
use crate::gcn::{self, GcnModel, Hyperparams};
use crate::graph::{build_graph, normalize, GraphBuildConfig, PropagationMatrix};
use crate::rng::cell_seed;
use crate::{Error, Result};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlobSpec {
    pub n: usize,
    pub dim: usize,
    pub classes: usize,
    pub sep: f64,
    #[serde(default)]
    pub seed: u64,
}

impl BlobSpec {
    pub fn generate(&self) -> Result<EmbeddingDataset> {
        synth_blobs(self.n, self.dim, self.classes, self.sep, self.seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum DatasetSource {
    Path(PathBuf),
    Synth(BlobSpec),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Gcn,
    Logreg,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Gcn => "gcn",
            ModelKind::Logreg => "logreg",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gcn" => Ok(ModelKind::Gcn),
            "logreg" => Ok(ModelKind::Logreg),
            other => Err(Error::invalid("model", format!("unknown model `{other}`"))),
        }
    }
}

fn default_models() -> Vec<ModelKind> {
    vec![ModelKind::Gcn, ModelKind::Logreg]
}

fn default_repeats() -> usize {
    10
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub dataset: DatasetSource,
    #[serde(default)]
    pub graph: GraphBuildConfig,
    #[serde(default = "default_models")]
    pub models: Vec<ModelKind>,
    pub budgets: Vec<usize>,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "yes")]
    pub stratified: bool,
    #[serde(default)]
    pub normalize_features: bool,
    #[serde(default)]
    pub gcn: Hyperparams,
    #[serde(default)]
    pub logreg: LogRegParams,
    #[serde(default)]
    pub record_wall_time: bool,
}

impl ExperimentConfig {
    pub fn new(dataset: DatasetSource, budgets: Vec<usize>) -> Self {
        ExperimentConfig {
            version: CONFIG_VERSION,
            dataset,
            graph: GraphBuildConfig::default(),
            models: default_models(),
            budgets,
            repeats: default_repeats(),
            base_seed: 0,
            stratified: true,
            normalize_features: false,
            gcn: Hyperparams::default(),
            logreg: LogRegParams::default(),
            record_wall_time: false,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        if cfg.version != CONFIG_VERSION {
            return Err(Error::invalid(
                "experiment config",
                format!("unsupported version {} (expected {CONFIG_VERSION})", cfg.version),
            ));
        }
        Ok(cfg)
    }

    /// Reads a config file, resolving a relative dataset path against the
    /// file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_json(&text)?;
        if let DatasetSource::Path(p) = &mut cfg.dataset {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    fn validate_against(&self, n: usize, classes: usize) -> Result<()> {
        if self.repeats == 0 {
            return Err(Error::invalid("experiment config", "repeats must be >= 1"));
        }
        if self.models.is_empty() {
            return Err(Error::invalid("experiment config", "no models"));
        }
        if self.budgets.is_empty() {
            return Err(Error::invalid("experiment config", "no label budgets"));
        }
        if let Some(&l) = self.budgets.iter().find(|&&l| l < classes || l >= n) {
            return Err(Error::invalid(
                "experiment config",
                format!("budget {l} outside [C, n) = [{classes}, {n})"),
            ));
        }
        self.gcn.validate()?;
        self.logreg.validate()
    }
}

/// Everything a model sees for one cell. Ground truth of unlabeled nodes is
/// deliberately absent.
pub struct Task<'a> {
    pub x: ArrayView2<'a, f64>,
    pub s: &'a PropagationMatrix,
    pub split: &'a LabeledSplit,
    pub y: &'a LabelMatrix,
    pub seed: u64,
}

impl Task<'_> {
    pub fn labeled_classes(&self) -> Result<Vec<usize>> {
        self.split
            .labeled
            .iter()
            .map(|&i| {
                self.y
                    .class_of(i)
                    .ok_or_else(|| Error::invalid("label matrix", format!("labeled row {i} is not one-hot")))
            })
            .collect()
    }
}

/// A model that can take part in the sweep: fit on a [`Task`] and predict a
/// class for every node.
pub trait NodeClassifier: Sync {
    fn name(&self) -> &str;
    fn fit_predict(&self, task: &Task<'_>) -> Result<Vec<usize>>;
}

pub struct GcnClassifier(pub Hyperparams);

impl GcnClassifier {
    pub fn fit(&self, task: &Task<'_>) -> Result<GcnModel> {
        let hp = self.0;
        let init = GcnModel::init(task.x.ncols(), hp.hidden, task.y.classes(), task.seed)?;
        let (model, _) = gcn::train(&init, task.s, task.x, task.y, &task.split.labeled, &hp)?;
        Ok(model)
    }
}

impl NodeClassifier for GcnClassifier {
    fn name(&self) -> &str {
        "gcn"
    }

    fn fit_predict(&self, task: &Task<'_>) -> Result<Vec<usize>> {
        let model = self.fit(task)?;
        Ok(gcn::predict(&gcn::forward(&model, task.s, task.x)?))
    }
}

pub struct LogRegClassifier(pub LogRegParams);

impl NodeClassifier for LogRegClassifier {
    fn name(&self) -> &str {
        "logreg"
    }

    fn fit_predict(&self, task: &Task<'_>) -> Result<Vec<usize>> {
        let xl = task.x.select(Axis(0), &task.split.labeled);
        let yl = task.labeled_classes()?;
        let model = train_logreg(xl.view(), &yl, task.y.classes(), &self.0)?;
        predict_logreg(&model, task.x)
    }
}

/// Dataset, ground truth and propagation matrix shared by all cells.
pub struct Prepared {
    pub dataset: EmbeddingDataset,
    pub truth: Vec<usize>,
    pub s: PropagationMatrix,
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    let dataset = match &cfg.dataset {
        DatasetSource::Path(p) => load_dataset(p)?,
        DatasetSource::Synth(spec) => spec.generate()?,
    };
    let truth = dataset
        .complete_truth()
        .map_err(|e| Error::invalid("experiment", format!("scoring needs ground truth for every row ({e})")))?;
    cfg.validate_against(dataset.n(), dataset.classes)?;
    let dataset = if cfg.normalize_features {
        dataset.normalized_rows()
    } else {
        dataset
    };
    let adjacency = build_graph(&dataset, &cfg.graph)?;
    let s = normalize(&adjacency);
    Ok(Prepared { dataset, truth, s })
}

fn classifiers(cfg: &ExperimentConfig) -> Vec<Box<dyn NodeClassifier>> {
    cfg.models
        .iter()
        .map(|m| -> Box<dyn NodeClassifier> {
            match m {
                ModelKind::Gcn => Box::new(GcnClassifier(cfg.gcn)),
                ModelKind::Logreg => Box::new(LogRegClassifier(cfg.logreg)),
            }
        })
        .collect()
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<EvalReport> {
    let prepared = prepare(cfg)?;
    let models = classifiers(cfg);
    run_with(cfg, &prepared, &models)
}

/// Runs the sweep with an explicit model list, for classifiers beyond the
/// built-in ones.
pub fn run_with(cfg: &ExperimentConfig, prepared: &Prepared, models: &[Box<dyn NodeClassifier>]) -> Result<EvalReport> {
    let cells: Vec<(usize, usize)> = cfg
        .budgets
        .iter()
        .flat_map(|&l| (0..cfg.repeats).map(move |r| (l, r)))
        .collect();

    let results: Vec<Vec<ResultRow>> = cells
        .par_iter()
        .map(|&(budget, repeat)| run_cell(cfg, prepared, models, budget, repeat))
        .collect::<Result<_>>()?;

    // Model-major order: model, then budget, then repeat.
    let mut rows = Vec::with_capacity(cells.len() * models.len());
    for m in 0..models.len() {
        rows.extend(results.iter().map(|cell| cell[m].clone()));
    }
    Ok(EvalReport::from_rows(rows))
}

fn run_cell(
    cfg: &ExperimentConfig,
    prepared: &Prepared,
    models: &[Box<dyn NodeClassifier>],
    budget: usize,
    repeat: usize,
) -> Result<Vec<ResultRow>> {
    let seed = cell_seed(cfg.base_seed, budget, repeat);
    let ds = &prepared.dataset;
    let split = make_split(ds, budget, seed, cfg.stratified)?;
    let y = build_label_matrix(ds, &split)?;
    let task = Task {
        x: ds.x.view(),
        s: &prepared.s,
        split: &split,
        y: &y,
        seed,
    };
    let truth_u: Vec<usize> = split.unlabeled.iter().map(|&i| prepared.truth[i]).collect();

    models
        .iter()
        .map(|model| {
            let start = Instant::now();
            let pred = model.fit_predict(&task)?;
            let wall_ms = if cfg.record_wall_time {
                start.elapsed().as_millis() as u64
            } else {
                0
            };
            let pred_u: Vec<usize> = split.unlabeled.iter().map(|&i| pred[i]).collect();
            Ok(ResultRow {
                model: model.name().to_owned(),
                budget,
                repeat,
                seed,
                accuracy_pct: accuracy(&pred_u, &truth_u)?,
                wall_ms,
            })
        })
        .collect()
}
