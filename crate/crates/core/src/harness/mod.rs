//! Evaluation: accuracy metrics, the label-budget sweep and its reports.

mod experiment;
mod metrics;
mod report;

pub use experiment::{
    prepare, run_experiment, run_with, BlobSpec, DatasetSource, ExperimentConfig, GcnClassifier, LogRegClassifier, ModelKind,
    NodeClassifier, Prepared, Task, CONFIG_VERSION,
};
pub use metrics::{accuracy, confusion_counts, ConfusionCounts};
pub use report::{AggregateRow, EvalReport, ResultRow, AGGREGATE_HEADER, REPORT_HEADER};
