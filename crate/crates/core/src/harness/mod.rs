//! Experiment harness: metrics, the toy problem, dataset ingestion,
//! the multi-trial protocol and report files.

pub mod dataset;
pub mod experiment;
pub mod metrics;
pub mod report;
pub mod toy;

pub use dataset::{load_dataset, CategoricalColumn, Dataset, DatasetManifest, SplitSpec};
pub use experiment::{run_experiment, trial_seed, ExperimentConfig, ExperimentReport, MadReference, Metric, Model, Subset, TrialReport};
pub use metrics::{boxplot_stats, mad, mae, maen, spearman, BoxplotSummary};
pub use report::{emit_report, report_from_json, report_to_csv, report_to_json, summarize, ReportFormat, Summary};
pub use toy::{toy_demo, toy_demo_with, toy_generate, toy_signal, ToyData, ToyOptions, ToyTable};
