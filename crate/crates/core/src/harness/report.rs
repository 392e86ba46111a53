//! Report files: a versioned JSON document per experiment, a long-format
//! CSV of per-trial scores, and a cross-dataset summary built from stored
//! reports.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::experiment::{ExperimentReport, Metric, Model, Quantity, Subset};
use super::metrics::{boxplot_stats, BoxplotSummary};
use crate::error::{Error, Result};
use crate::numkernel::median;
use crate::regress::ActivationKind;

pub const REPORT_SCHEMA: &str = "nlror-report";
pub const SUMMARY_SCHEMA: &str = "nlror-summary";
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub schema: String,
    pub version: u32,
    pub report: ExperimentReport,
}

impl ReportFile {
    pub fn new(report: ExperimentReport) -> Self {
        Self { schema: REPORT_SCHEMA.into(), version: SCHEMA_VERSION, report }
    }
}

pub fn report_to_json(report: &ExperimentReport) -> Result<String> {
    Ok(serde_json::to_string_pretty(&ReportFile::new(report.clone()))?)
}

pub fn report_from_json(text: &str) -> Result<ExperimentReport> {
    let file: ReportFile = serde_json::from_str(text)?;
    if file.schema != REPORT_SCHEMA || file.version != SCHEMA_VERSION {
        return Err(Error::Format(format!(
            "expected {REPORT_SCHEMA} version {SCHEMA_VERSION}, found {} version {}",
            file.schema, file.version
        )));
    }
    Ok(file.report)
}

pub const CSV_HEADER: [&str; 11] = [
    "dataset",
    "activation",
    "percentile",
    "trial",
    "trial_seed",
    "node_count",
    "outlier_count",
    "model",
    "subset",
    "metric",
    "value",
];

/// One row per activation, percentile, trial, model, subset and metric.
/// Absent values are written as `null`.
pub fn report_to_csv(report: &ExperimentReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    for a in &report.activations {
        for t in &a.trials {
            for s in &t.scores {
                w.write_record([
                    report.dataset.name.clone(),
                    a.activation.to_string(),
                    t.percentile.to_string(),
                    t.trial.to_string(),
                    t.trial_seed.to_string(),
                    t.node_count.to_string(),
                    t.outlier_count.to_string(),
                    s.model.name().to_string(),
                    s.subset.name().to_string(),
                    s.metric.name().to_string(),
                    s.value.map_or_else(|| "null".to_string(), |v| v.to_string()),
                ])?;
            }
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Internal(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
    Both,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            "both" => Ok(Self::Both),
            other => Err(Error::InvalidArgument(format!("unknown report format '{other}'"))),
        }
    }
}

/// Writes `report.json` and/or `report.csv` into `dir`.
pub fn emit_report(report: &ExperimentReport, dir: &Path, format: ReportFormat) -> Result<Vec<std::path::PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    if matches!(format, ReportFormat::Json | ReportFormat::Both) {
        let p = dir.join("report.json");
        std::fs::write(&p, report_to_json(report)?)?;
        written.push(p);
    }
    if matches!(format, ReportFormat::Csv | ReportFormat::Both) {
        let p = dir.join("report.csv");
        std::fs::write(&p, report_to_csv(report)?)?;
        written.push(p);
    }
    Ok(written)
}

/// One cell of the cross-dataset summary: each dataset's median over trials,
/// and the mean and median of those medians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryCell {
    pub activation: ActivationKind,
    pub percentile: f64,
    pub quantity: Quantity,
    pub subset: Subset,
    pub metric: Metric,
    pub datasets: Vec<String>,
    pub dataset_medians: Vec<f64>,
    pub mean_of_medians: f64,
    pub median_of_medians: f64,
    pub spread: BoxplotSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema: String,
    pub version: u32,
    pub datasets: Vec<String>,
    pub cells: Vec<SummaryCell>,
}

pub fn summarize(reports: &[ExperimentReport]) -> Result<Summary> {
    let mut cells: Vec<SummaryCell> = Vec::new();
    for r in reports {
        for a in &r.activations {
            for c in &a.aggregates {
                let Some(s) = &c.summary else { continue };
                let existing = cells.iter_mut().find(|x| {
                    x.activation == a.activation
                        && x.percentile == c.percentile
                        && x.quantity == c.quantity
                        && x.subset == c.subset
                        && x.metric == c.metric
                });
                match existing {
                    Some(x) => {
                        x.datasets.push(r.dataset.name.clone());
                        x.dataset_medians.push(s.median);
                    }
                    None => cells.push(SummaryCell {
                        activation: a.activation,
                        percentile: c.percentile,
                        quantity: c.quantity,
                        subset: c.subset,
                        metric: c.metric,
                        datasets: vec![r.dataset.name.clone()],
                        dataset_medians: vec![s.median],
                        mean_of_medians: 0.0,
                        median_of_medians: 0.0,
                        spread: s.clone(),
                    }),
                }
            }
        }
    }
    for c in &mut cells {
        let v = &c.dataset_medians;
        c.mean_of_medians = v.iter().sum::<f64>() / v.len() as f64;
        c.median_of_medians = median(v)?;
        c.spread = boxplot_stats(v)?;
    }
    Ok(Summary {
        schema: SUMMARY_SCHEMA.into(),
        version: SCHEMA_VERSION,
        datasets: reports.iter().map(|r| r.dataset.name.clone()).collect(),
        cells,
    })
}

/// Long-format CSV of the summary, one row per cell and dataset.
pub fn summary_to_csv(summary: &Summary) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "activation",
        "percentile",
        "quantity",
        "subset",
        "metric",
        "dataset",
        "dataset_median",
        "mean_of_medians",
        "median_of_medians",
    ])?;
    for c in &summary.cells {
        for (d, m) in c.datasets.iter().zip(&c.dataset_medians) {
            w.write_record([
                c.activation.to_string(),
                c.percentile.to_string(),
                c.quantity.label(),
                c.subset.name().to_string(),
                c.metric.name().to_string(),
                d.clone(),
                m.to_string(),
                c.mean_of_medians.to_string(),
                c.median_of_medians.to_string(),
            ])?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Internal(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Convenience for callers that only want one model's cell.
pub fn find_cell(summary: &Summary, activation: ActivationKind, percentile: f64, model: Model, subset: Subset, metric: Metric) -> Option<&SummaryCell> {
    summary.cells.iter().find(|c| {
        c.activation == activation
            && c.percentile == percentile
            && c.quantity == Quantity::Model(model)
            && c.subset == subset
            && c.metric == metric
    })
}
