use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand};
use ndarray::Axis;
use textgcn::baseline::{predict_logreg, train_logreg, LogRegParams};
use textgcn::checkpoint::{Checkpoint, TrainedModel};
use textgcn::dataset::{
    build_label_matrix, load_dataset, make_split, save_dataset, synth_blobs, EmbeddingDataset, LabeledSplit,
};
use textgcn::gcn::{self, GcnModel, Hyperparams};
use textgcn::graph::{build_graph, load_graph, normalize, save_graph, GraphBuildConfig, Method, Metric, SparseAdjacency};
use textgcn::harness::{accuracy, run_experiment, ExperimentConfig, ModelKind};

/// Semi-supervised text classification with a graph convolutional network
/// over precomputed sentence embeddings.
#[derive(Parser)]
#[command(name = "textgcn", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a labeled Gaussian-blob embedding CSV.
    Synth(SynthArgs),
    /// Build a similarity graph over an embedding CSV and write it as an edge list.
    BuildGraph(BuildGraphArgs),
    /// Train one model on a labeled subset and save a checkpoint.
    Train(TrainArgs),
    /// Run a label-budget sweep described by a JSON config.
    Experiment(ExperimentArgs),
    /// Score a checkpoint on the nodes it was not trained on.
    Eval(EvalArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 300)]
    n: usize,
    #[arg(long, default_value_t = 8)]
    dim: usize,
    #[arg(long, default_value_t = 2)]
    classes: usize,
    /// Distance between neighbouring class centers.
    #[arg(long, default_value_t = 6.0)]
    sep: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GraphArgs {
    /// knn, epsilon or full.
    #[arg(long, default_value = "knn")]
    method: Method,
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long, default_value_t = 1.0)]
    eps: f64,
    /// euclidean or cosine-distance.
    #[arg(long, default_value = "euclidean")]
    metric: Metric,
}

impl GraphArgs {
    fn config(&self) -> GraphBuildConfig {
        GraphBuildConfig {
            method: self.method,
            k: self.k,
            eps: self.eps,
            metric: self.metric,
        }
    }
}

#[derive(Args)]
struct BuildGraphArgs {
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    graph: GraphArgs,
    /// Scale every embedding to unit length before measuring distances.
    #[arg(long)]
    normalize: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    /// Edge list to use; when absent a graph is built from --method/--k/--eps/--metric.
    #[arg(long)]
    graph: Option<PathBuf>,
    #[command(flatten)]
    graph_build: GraphArgs,
    #[arg(long, default_value = "gcn")]
    model: ModelKind,
    /// Number of labeled nodes to draw.
    #[arg(long, conflicts_with = "labeled", required_unless_present = "labeled")]
    budget: Option<usize>,
    /// File of node indices to train on, separated by commas, spaces or newlines.
    #[arg(long)]
    labeled: Option<PathBuf>,
    /// Seed for the split and the weight initialization.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Draw the split uniformly instead of per class.
    #[arg(long)]
    unstratified: bool,
    #[arg(long)]
    normalize: bool,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    weight_decay: Option<f64>,
    /// L2 penalty of the logistic regression.
    #[arg(long)]
    l2: Option<f64>,
    #[arg(long)]
    checkpoint: PathBuf,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
    /// Report CSV: one row per run followed by per-budget aggregates.
    #[arg(long)]
    out: PathBuf,
    /// Also write a Markdown accuracy table.
    #[arg(long)]
    markdown: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Edge list; required for GCN checkpoints.
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Write `id,predicted` for every node.
    #[arg(long)]
    predictions: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Synth(a) => synth(a),
        Command::BuildGraph(a) => build_graph_cmd(a),
        Command::Train(a) => train(a),
        Command::Experiment(a) => experiment(a),
        Command::Eval(a) => eval(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn synth(a: SynthArgs) -> Result<()> {
    let ds = synth_blobs(a.n, a.dim, a.classes, a.sep, a.seed)?;
    save_dataset(&ds, &a.out)?;
    println!("wrote {} rows x {} dims, {} classes to {}", ds.n(), ds.dim(), ds.classes, a.out.display());
    Ok(())
}

fn load_features(path: &Path, normalize: bool) -> Result<EmbeddingDataset> {
    let ds = load_dataset(path)?;
    Ok(if normalize { ds.normalized_rows() } else { ds })
}

fn build_graph_cmd(a: BuildGraphArgs) -> Result<()> {
    let ds = load_features(&a.data, a.normalize)?;
    let cfg = a.graph.config();
    let adj = build_graph(&ds, &cfg)?;
    save_graph(&adj, &a.out)?;
    let isolated = adj.degrees().iter().filter(|&&d| d == 0).count();
    println!(
        "{}: {} nodes, {} edges, {} isolated; wrote {}",
        cfg.describe(),
        adj.n(),
        adj.num_edges(),
        isolated,
        a.out.display()
    );
    Ok(())
}

fn graph_for(ds: &EmbeddingDataset, path: &Path) -> Result<SparseAdjacency> {
    let adj = load_graph(path)?;
    ensure!(
        adj.n() <= ds.n(),
        "graph {} mentions node {} but the dataset has {} rows",
        path.display(),
        adj.n() - 1,
        ds.n()
    );
    // An edge list cannot name trailing isolated nodes without a header, so
    // pad up to the dataset size.
    Ok(if adj.n() < ds.n() {
        SparseAdjacency::from_edges(ds.n(), adj.edges().iter().copied())?
    } else {
        adj
    })
}

fn read_indices(path: &Path) -> Result<Vec<usize>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse()
                .with_context(|| format!("{}: `{t}` is not a node index", path.display()))
        })
        .collect()
}

fn train(a: TrainArgs) -> Result<()> {
    let ds = load_features(&a.data, a.normalize)?;
    let split = match (&a.labeled, a.budget) {
        (Some(path), _) => LabeledSplit::from_labeled(ds.n(), read_indices(path)?)?,
        (None, Some(l)) => make_split(&ds, l, a.seed, !a.unstratified)?,
        (None, None) => unreachable!("clap requires --budget or --labeled"),
    };
    let y = build_label_matrix(&ds, &split)?;

    let (trained, pred) = match a.model {
        ModelKind::Gcn => {
            let adj = match &a.graph {
                Some(path) => graph_for(&ds, path)?,
                None => build_graph(&ds, &a.graph_build.config())?,
            };
            let s = normalize(&adj);
            let defaults = Hyperparams::default();
            let hp = Hyperparams {
                lr: a.lr.unwrap_or(defaults.lr),
                epochs: a.epochs.unwrap_or(defaults.epochs),
                seed: a.seed,
                hidden: a.hidden.unwrap_or(defaults.hidden),
                weight_decay: a.weight_decay.unwrap_or(defaults.weight_decay),
            };
            let init = GcnModel::init(ds.dim(), hp.hidden, ds.classes, hp.seed)?;
            let (model, trace) = gcn::train(&init, &s, ds.x.view(), &y, &split.labeled, &hp)?;
            println!(
                "gcn: {} epochs, loss {:.6} -> {:.6}",
                hp.epochs,
                trace.first().copied().unwrap_or(f64::NAN),
                trace.last().copied().unwrap_or(f64::NAN)
            );
            let pred = gcn::predict(&gcn::forward(&model, &s, ds.x.view())?);
            let trained = TrainedModel::Gcn {
                model,
                seed: hp.seed,
                hyperparams: hp,
            };
            (trained, pred)
        }
        ModelKind::Logreg => {
            let defaults = LogRegParams::default();
            let hp = LogRegParams {
                lr: a.lr.unwrap_or(defaults.lr),
                epochs: a.epochs.unwrap_or(defaults.epochs),
                l2: a.l2.unwrap_or(defaults.l2),
            };
            let classes: Vec<usize> = split
                .labeled
                .iter()
                .map(|&i| y.class_of(i).expect("labeled rows are one-hot"))
                .collect();
            let xl = ds.x.select(Axis(0), &split.labeled);
            let model = train_logreg(xl.view(), &classes, ds.classes, &hp)?;
            println!("logreg: {} epochs", hp.epochs);
            let pred = predict_logreg(&model, ds.x.view())?;
            (TrainedModel::Logreg { model, hyperparams: hp }, pred)
        }
    };

    report_accuracy("labeled", &ds, &pred, &split.labeled);
    report_accuracy("unlabeled", &ds, &pred, &split.unlabeled);

    let ck = Checkpoint {
        model: trained,
        normalize_features: a.normalize,
        labeled: Some(split.labeled),
    };
    ck.save(&a.checkpoint)?;
    println!("wrote {}", a.checkpoint.display());
    Ok(())
}

/// Accuracy over the nodes in `nodes` whose label is known, or `None` when
/// no such node exists.
fn scored(ds: &EmbeddingDataset, pred: &[usize], nodes: &[usize]) -> Option<(f64, usize)> {
    let (p, t): (Vec<usize>, Vec<usize>) = nodes
        .iter()
        .filter_map(|&i| ds.label(i).map(|c| (pred[i], c)))
        .unzip();
    let acc = accuracy(&p, &t).ok()?;
    Some((acc, t.len()))
}

fn report_accuracy(what: &str, ds: &EmbeddingDataset, pred: &[usize], nodes: &[usize]) {
    match scored(ds, pred, nodes) {
        Some((acc, count)) => println!("{what} accuracy: {acc:.2}% over {count} nodes"),
        None => println!("{what} accuracy: n/a (no ground truth)"),
    }
}

fn experiment(a: ExperimentArgs) -> Result<()> {
    let cfg = ExperimentConfig::load(&a.config)?;
    let report = run_experiment(&cfg)?;
    std::fs::write(&a.out, report.to_csv()).with_context(|| format!("writing {}", a.out.display()))?;
    for agg in &report.aggregates {
        println!(
            "{:<8} l={:<5} {:6.2}% ± {:.2} ({} runs)",
            agg.model, agg.budget, agg.mean_pct, agg.std_pct, agg.repeats
        );
    }
    println!("wrote {}", a.out.display());
    if let Some(md) = &a.markdown {
        let caption = format!("graph: {}", cfg.graph.describe());
        std::fs::write(md, report.to_markdown(Some(&caption))).with_context(|| format!("writing {}", md.display()))?;
        println!("wrote {}", md.display());
    }
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    let ck = Checkpoint::load(&a.checkpoint)?;
    let ds = load_features(&a.data, ck.normalize_features)?;
    let pred = match &ck.model {
        TrainedModel::Gcn { model, .. } => {
            let Some(path) = &a.graph else {
                bail!("a GCN checkpoint needs --graph");
            };
            let (l1, _, _) = model.dims();
            ensure!(l1 == ds.dim(), "checkpoint expects {l1}-dimensional embeddings, data has {}", ds.dim());
            let s = normalize(&graph_for(&ds, path)?);
            gcn::predict(&gcn::forward(model, &s, ds.x.view())?)
        }
        TrainedModel::Logreg { model, .. } => {
            ensure!(
                model.dim() == ds.dim(),
                "checkpoint expects {}-dimensional embeddings, data has {}",
                model.dim(),
                ds.dim()
            );
            predict_logreg(model, ds.x.view())?
        }
    };

    let nodes: Vec<usize> = match &ck.labeled {
        Some(labeled) => {
            ensure!(
                labeled.iter().all(|&i| i < ds.n()),
                "checkpoint was trained on node indices beyond the {} rows of {}",
                ds.n(),
                a.data.display()
            );
            let split = LabeledSplit::from_labeled(ds.n(), labeled.clone())?;
            split.unlabeled
        }
        None => (0..ds.n()).collect(),
    };
    match scored(&ds, &pred, &nodes) {
        Some((acc, count)) => println!("accuracy: {acc:.2}% over {count} nodes"),
        None => println!("accuracy: n/a (no ground truth for the evaluated nodes)"),
    }

    if let Some(out) = &a.predictions {
        let mut text = String::from("id,predicted\n");
        for (id, &p) in ds.ids.iter().zip(&pred) {
            let name = match &ds.class_names {
                Some(names) if p < names.len() => names[p].clone(),
                _ => p.to_string(),
            };
            text.push_str(&format!("{id},{name}\n"));
        }
        std::fs::write(out, text).with_context(|| format!("writing {}", out.display()))?;
        println!("wrote {}", out.display());
    }
    Ok(())
}
