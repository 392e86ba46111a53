//! Command-line interface.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use log::info;

use crate::gate::fit_gate;
use crate::harness::report::{summary_to_csv, ReportFormat};
use crate::harness::{emit_report, load_dataset, report_from_json, run_experiment, summarize, toy_demo_with, DatasetManifest, ExperimentConfig, ToyOptions};
use crate::persist::save_gate;
use crate::preprocess::r_outl_columns;
use crate::regress::ActivationKind;

#[derive(Debug, Parser)]
#[command(name = "nlror", version, about = "Nonlinear regression with linear extrapolation for outlying inputs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the 1-D toy problem and write plot-ready curves as CSV.
    Toy {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "sigmoid")]
        activation: ActivationKind,
        #[arg(long, default_value_t = 100)]
        members: usize,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit the outlier gate on a dataset's training part and label its test rows.
    Gate {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value_t = 99.0)]
        percentile: f64,
        /// Per-row CSV; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also store the fitted gate as JSON.
        #[arg(long)]
        save_gate: Option<PathBuf>,
    },
    /// Run the full LR / NLR / NLR_OR comparison.
    Run {
        #[arg(long)]
        manifest: PathBuf,
        /// Experiment config (TOML); defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// json, csv or both.
        #[arg(long, default_value = "both")]
        format: ReportFormat,
        /// Overrides the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Summarize stored report.json files across datasets.
    Report {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        /// Output directory for summary.json and summary.csv.
        #[arg(long)]
        out: PathBuf,
    },
}

fn write_output(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => Ok(std::io::stdout().write_all(text.as_bytes())?),
    }
}

fn read_manifest(path: &Path) -> anyhow::Result<DatasetManifest> {
    DatasetManifest::from_file(path).with_context(|| format!("reading manifest {}", path.display()))
}

fn gate_csv(manifest: &Path, percentile: f64, save: Option<&Path>) -> anyhow::Result<String> {
    let ds = load_dataset(&read_manifest(manifest)?)?;
    let (_, train, test) = ds.scaled_inputs()?;
    let gate = fit_gate(&train, percentile)?;
    if let Some(p) = save {
        save_gate(&gate, p).with_context(|| format!("writing {}", p.display()))?;
    }
    let rows = gate.inspect_all(&test)?;
    let outliers = rows.iter().filter(|r| r.outlier).count();
    info!("{outliers} of {} test rows are outliers", rows.len());
    if !ds.continuous_columns.is_empty() && test.nrows() > 0 {
        info!("r_outl = {}", r_outl_columns(&test, &ds.continuous_columns)?);
    }

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "line",
        "mahalanobis",
        "threshold",
        "exceeds_threshold",
        "center_distance",
        "neighbor_line",
        "neighbor_center_distance",
        "beyond_neighbor",
        "outlier",
    ])?;
    for r in &rows {
        w.write_record([
            ds.test_lines[r.row].to_string(),
            r.mahalanobis.to_string(),
            gate.threshold_distance.to_string(),
            r.exceeds_threshold.to_string(),
            r.center_distance.to_string(),
            ds.train_lines[r.neighbor_index].to_string(),
            r.neighbor_center_distance.to_string(),
            r.beyond_neighbor.to_string(),
            r.outlier.to_string(),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

pub fn execute(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Toy { seed, activation, members, out } => {
            if members == 0 {
                bail!("--members must be at least 1");
            }
            let opts = ToyOptions { members, ..Default::default() };
            let table = toy_demo_with(seed, activation, &opts)?;
            info!("{activation}: {} hidden nodes", table.node_count);
            write_output(out.as_deref(), &table.to_csv()?)
        }
        Command::Gate { manifest, percentile, out, save_gate } => {
            let csv = gate_csv(&manifest, percentile, save_gate.as_deref())?;
            write_output(out.as_deref(), &csv)
        }
        Command::Run { manifest, config, out, format, seed } => {
            let manifest = read_manifest(&manifest)?;
            let mut config = match config {
                Some(p) => {
                    let text = std::fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
                    ExperimentConfig::from_toml_str(&text)?
                }
                None => ExperimentConfig::default(),
            };
            if let Some(s) = seed {
                config.master_seed = s;
            }
            let ds = load_dataset(&manifest)?;
            let report = run_experiment(&ds, &config)?;
            for p in emit_report(&report, &out, format)? {
                info!("wrote {}", p.display());
            }
            Ok(())
        }
        Command::Report { reports, out } => {
            let parsed = reports
                .iter()
                .map(|p| {
                    let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                    report_from_json(&text).with_context(|| format!("parsing {}", p.display()))
                })
                .collect::<anyhow::Result<Vec<_>>>()?;
            let summary = summarize(&parsed)?;
            std::fs::create_dir_all(&out)?;
            std::fs::write(out.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
            std::fs::write(out.join("summary.csv"), summary_to_csv(&summary)?)?;
            Ok(())
        }
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run_from_args<I, T>(args: I) -> anyhow::Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    execute(Cli::try_parse_from(args)?)
}
