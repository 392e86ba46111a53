//! The multi-trial comparison of LR, NLR and NLR_OR on one dataset.
//!
//! Per activation the node count is chosen once by cross-validation and the
//! linear baseline is fitted once. Every trial then trains a fresh ensemble
//! from its own derived seed and scores all three models on the outlier,
//! non-outlier and full test subsets of every gate percentile.

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use super::metrics::{boxplot_stats, mae, mad, spearman, BoxplotSummary};
use crate::error::{invalid, Error, Result};
use crate::extrapolate::{nlror_predict, OrConfig, OrOutcome};
use crate::gate::{classify, fit_gate, Gate, GateRow};
use crate::numkernel::{RealMatrix, RealVector};
use crate::preprocess::{clip_nonnegative, inverse_transform_target, r_outl_columns, TargetTransform};
use crate::regress::{cross_validate, ensemble_predict, ensemble_train_with, lr_fit, lr_predict, ActivationKind, CvConfig, CvOutcome, ElmConfig};
use crate::seed::derive_seed;

const CV_TAG: u64 = 0xC0;
const TRIAL_TAG: u64 = 0x7E;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    Lr,
    Nlr,
    NlrOr,
}

impl Model {
    pub const ALL: [Model; 3] = [Model::Lr, Model::Nlr, Model::NlrOr];

    pub fn name(self) -> &'static str {
        match self {
            Model::Lr => "lr",
            Model::Nlr => "nlr",
            Model::NlrOr => "nlr-or",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Subset {
    Outliers,
    NonOutliers,
    All,
}

impl Subset {
    pub const ALL: [Subset; 3] = [Subset::Outliers, Subset::NonOutliers, Subset::All];

    pub fn name(self) -> &'static str {
        match self {
            Subset::Outliers => "outliers",
            Subset::NonOutliers => "non-outliers",
            Subset::All => "all",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    Maen,
    Spearman,
}

impl Metric {
    pub const ALL: [Metric; 2] = [Metric::Maen, Metric::Spearman];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Maen => "maen",
            Metric::Spearman => "spearman",
        }
    }
}

/// Which observed targets set the MAEn scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MadReference {
    #[default]
    FullTestSet,
    Subset,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub activations: Vec<ActivationKind>,
    pub trials: usize,
    pub members_per_trial: usize,
    pub gate_percentiles: Vec<f64>,
    pub cv: CvConfig,
    /// Indicator blocks come from the dataset; any listed here are replaced.
    pub or_config: OrConfig,
    pub master_seed: u64,
    /// Subsets with fewer rows get absent metrics.
    pub min_subset_size: usize,
    pub mad_reference: MadReference,
    pub elm: ElmConfig,
    /// Keep per-row predictions and NLR_OR candidates for the first trial.
    pub diagnostics: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            activations: ActivationKind::ALL.to_vec(),
            trials: 200,
            members_per_trial: 100,
            gate_percentiles: vec![99.0, 95.0],
            cv: CvConfig::default(),
            or_config: OrConfig::default(),
            master_seed: 0,
            min_subset_size: 5,
            mad_reference: MadReference::FullTestSet,
            elm: ElmConfig::default(),
            diagnostics: true,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Format(format!("experiment config: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 || self.members_per_trial == 0 {
            return invalid("trials and members_per_trial must be at least 1");
        }
        if self.activations.is_empty() {
            return invalid("no activations selected");
        }
        if self.gate_percentiles.is_empty() {
            return invalid("no gate percentiles");
        }
        if let Some(q) = self.gate_percentiles.iter().find(|q| !(**q > 0.0 && **q < 100.0)) {
            return invalid(format!("gate percentile {q} outside (0, 100)"));
        }
        self.or_config.validate()
    }
}

fn activation_tag(kind: ActivationKind) -> u64 {
    ActivationKind::ALL.iter().position(|k| *k == kind).expect("listed activation") as u64
}

pub fn trial_seed(master_seed: u64, kind: ActivationKind, trial: usize) -> u64 {
    derive_seed(master_seed, &[TRIAL_TAG, activation_tag(kind), trial as u64])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub model: Model,
    pub subset: Subset,
    pub metric: Metric,
    /// Absent for subsets below the minimum size or undefined correlations.
    pub value: Option<f64>,
}

/// Scores of one trial at one gate percentile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub trial: usize,
    pub trial_seed: u64,
    pub node_count: usize,
    pub percentile: f64,
    pub outlier_count: usize,
    pub non_outlier_count: usize,
    pub scores: Vec<Score>,
}

impl TrialReport {
    pub fn score(&self, model: Model, subset: Subset, metric: Metric) -> Option<f64> {
        self.scores
            .iter()
            .find(|s| s.model == model && s.subset == subset && s.metric == metric)
            .and_then(|s| s.value)
    }
}

/// Either a model's score, or the per-trial difference of two models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Quantity {
    Model(Model),
    Difference { minuend: Model, subtrahend: Model },
}

impl Quantity {
    pub const DIFFERENCES: [(Model, Model); 3] =
        [(Model::Nlr, Model::Lr), (Model::NlrOr, Model::Nlr), (Model::NlrOr, Model::Lr)];

    pub fn label(self) -> String {
        match self {
            Quantity::Model(m) => m.name().to_string(),
            Quantity::Difference { minuend, subtrahend } => format!("{}-minus-{}", minuend.name(), subtrahend.name()),
        }
    }

    fn value(self, t: &TrialReport, subset: Subset, metric: Metric) -> Option<f64> {
        match self {
            Quantity::Model(m) => t.score(m, subset, metric),
            Quantity::Difference { minuend, subtrahend } => {
                Some(t.score(minuend, subset, metric)? - t.score(subtrahend, subset, metric)?)
            }
        }
    }
}

/// Distribution over trials of one quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateCell {
    pub percentile: f64,
    pub quantity: Quantity,
    pub subset: Subset,
    pub metric: Metric,
    pub mean: Option<f64>,
    /// `None` when no trial produced a value.
    pub summary: Option<BoxplotSummary>,
}

/// Test-row predictions for one trial, in original target units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowPredictions {
    pub percentile: f64,
    pub observed: Vec<f64>,
    pub lr: Vec<f64>,
    pub nlr: Vec<f64>,
    pub nlr_or: Vec<f64>,
    /// NLR_OR working for each outlier row, keyed by test-row index.
    pub outcomes: Vec<(usize, OrOutcome)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivationReport {
    pub activation: ActivationKind,
    pub node_count: usize,
    pub cv: CvOutcome,
    pub trials: Vec<TrialReport>,
    pub aggregates: Vec<AggregateCell>,
    pub first_trial: Option<Vec<RowPredictions>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateReport {
    pub percentile: f64,
    pub threshold_distance: f64,
    pub ridge: f64,
    pub outlier_indices: Vec<usize>,
    pub rows: Vec<GateRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub name: String,
    pub feature_names: Vec<String>,
    pub train_count: usize,
    pub test_count: usize,
    pub target_transform: TargetTransform,
    /// Largest scaled magnitude over the continuous test inputs.
    pub r_outl: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub dataset: DatasetSummary,
    pub config: ExperimentConfig,
    pub gates: Vec<GateReport>,
    pub activations: Vec<ActivationReport>,
}

/// State shared by every activation: scaled inputs, gates and the baseline.
struct Prepared {
    train_x: RealMatrix,
    test_x: RealMatrix,
    train_y: RealMatrix,
    gates: Vec<(Gate, Vec<usize>, Vec<usize>)>,
    lr_test: Vec<f64>,
    mad_full: f64,
}

fn clip(values: Vec<f64>, transform: TargetTransform, flagged: bool) -> Vec<f64> {
    // clipping acts in original units; log inverses are already positive
    if flagged && matches!(transform, TargetTransform::None | TargetTransform::FourthRoot) {
        clip_nonnegative(&RealVector::from_vec(values)).iter().copied().collect()
    } else {
        values
    }
}

fn pick(values: &[f64], rows: &[usize]) -> Vec<f64> {
    rows.iter().map(|&r| values[r]).collect()
}

fn prepare(dataset: &Dataset, config: &ExperimentConfig) -> Result<Prepared> {
    let (_, train_x, test_x) = dataset.scaled_inputs()?;
    let train_y = RealMatrix::from_column_slice(dataset.train_targets.len(), 1, &dataset.train_targets);

    let gates = config
        .gate_percentiles
        .iter()
        .map(|&q| {
            let gate = fit_gate(&train_x, q)?;
            let part = classify(&gate, &test_x)?;
            info!("gate q={q}: {} outliers of {}", part.outlier_indices.len(), test_x.nrows());
            Ok((gate, part.outlier_indices, part.non_outlier_indices))
        })
        .collect::<Result<Vec<_>>>()?;

    let linear = lr_fit(&train_x, &dataset.train_targets)?;
    let lr_test = clip(
        lr_predict(&linear, &test_x)?.iter().copied().collect(),
        dataset.target_transform,
        dataset.clip_negative_predictions,
    );
    let mad_full = mad(&dataset.test_targets)?;
    if config.mad_reference == MadReference::FullTestSet && mad_full == 0.0 {
        return Err(Error::DegenerateReference);
    }
    Ok(Prepared { train_x, test_x, train_y, gates, lr_test, mad_full })
}

struct Scorer<'a> {
    observed: &'a [f64],
    config: &'a ExperimentConfig,
    mad_full: f64,
}

impl Scorer<'_> {
    fn subset_scores(&self, model: Model, subset: Subset, predictions: &[f64], rows: &[usize]) -> Vec<Score> {
        let small = rows.len() < self.config.min_subset_size.max(1);
        let pred = pick(predictions, rows);
        let obs = pick(self.observed, rows);
        let maen = if small {
            None
        } else {
            let scale = match self.config.mad_reference {
                MadReference::FullTestSet => Some(self.mad_full),
                MadReference::Subset => mad(&obs).ok().filter(|m| *m > 0.0),
            };
            match (scale, mae(&pred, &obs)) {
                (Some(s), Ok(e)) => Some(e / s),
                _ => None,
            }
        };
        let rho = if small || rows.len() < 2 {
            None
        } else {
            match spearman(&pred, &obs) {
                Ok(r) => Some(r),
                Err(e) => {
                    warn!("{} on {}: {e}", model.name(), subset.name());
                    None
                }
            }
        };
        vec![
            Score { model, subset, metric: Metric::Maen, value: maen },
            Score { model, subset, metric: Metric::Spearman, value: rho },
        ]
    }
}

struct TrialOutput {
    reports: Vec<TrialReport>,
    rows: Option<Vec<RowPredictions>>,
}

#[allow(clippy::too_many_arguments)]
fn run_trial(
    dataset: &Dataset,
    prep: &Prepared,
    config: &ExperimentConfig,
    or_config: &OrConfig,
    kind: ActivationKind,
    node_count: usize,
    trial: usize,
    keep_rows: bool,
) -> Result<TrialOutput> {
    let seed = trial_seed(config.master_seed, kind, trial);
    let ensemble = ensemble_train_with(&prep.train_x, &prep.train_y, node_count, kind, config.members_per_trial, seed, &config.elm)?;
    let nlr_raw: Vec<f64> = ensemble_predict(&ensemble, &prep.test_x)?.column(0).iter().copied().collect();
    let surface = |x: &[f64]| ensemble.predict_point(x).expect("test row matches the ensemble input width");

    let transform = dataset.target_transform;
    let flagged = dataset.clip_negative_predictions;
    let nlr = clip(nlr_raw.clone(), transform, flagged);
    let scorer = Scorer { observed: &dataset.test_targets, config, mad_full: prep.mad_full };
    let all_rows: Vec<usize> = (0..dataset.test_targets.len()).collect();

    let mut reports = Vec::new();
    let mut rows = keep_rows.then(Vec::new);
    for (q, (gate, outliers, non_outliers)) in config.gate_percentiles.iter().zip(&prep.gates) {
        let mut nlr_or_raw = nlr_raw.clone();
        let mut outcomes = Vec::new();
        for &i in outliers {
            let x_o: Vec<f64> = prep.test_x.row(i).iter().copied().collect();
            let outcome = nlror_predict(&surface, gate, &x_o, or_config)?;
            nlr_or_raw[i] = outcome.value;
            if keep_rows {
                outcomes.push((i, outcome));
            }
        }
        let nlr_or = clip(nlr_or_raw, transform, flagged);

        let mut scores = Vec::new();
        for model in Model::ALL {
            let p = match model {
                Model::Lr => &prep.lr_test,
                Model::Nlr => &nlr,
                Model::NlrOr => &nlr_or,
            };
            for subset in Subset::ALL {
                let idx = match subset {
                    Subset::Outliers => outliers,
                    Subset::NonOutliers => non_outliers,
                    Subset::All => &all_rows,
                };
                scores.extend(scorer.subset_scores(model, subset, p, idx));
            }
        }
        reports.push(TrialReport {
            trial,
            trial_seed: seed,
            node_count,
            percentile: *q,
            outlier_count: outliers.len(),
            non_outlier_count: non_outliers.len(),
            scores,
        });
        if let Some(rows) = rows.as_mut() {
            rows.push(RowPredictions {
                percentile: *q,
                observed: inverse_transform_target(&dataset.test_targets, transform),
                lr: inverse_transform_target(&prep.lr_test, transform),
                nlr: inverse_transform_target(&nlr, transform),
                nlr_or: inverse_transform_target(&nlr_or, transform),
                outcomes,
            });
        }
    }
    Ok(TrialOutput { reports, rows })
}

fn aggregate(percentiles: &[f64], trials: &[TrialReport]) -> Result<Vec<AggregateCell>> {
    let mut quantities: Vec<Quantity> = Model::ALL.iter().map(|m| Quantity::Model(*m)).collect();
    quantities.extend(Quantity::DIFFERENCES.iter().map(|&(minuend, subtrahend)| Quantity::Difference { minuend, subtrahend }));
    let mut cells = Vec::new();
    for &q in percentiles {
        let at_q: Vec<&TrialReport> = trials.iter().filter(|t| t.percentile == q).collect();
        for &quantity in &quantities {
            for subset in Subset::ALL {
                for metric in Metric::ALL {
                    let values: Vec<f64> = at_q.iter().filter_map(|t| quantity.value(t, subset, metric)).collect();
                    let (mean, summary) = if values.is_empty() {
                        (None, None)
                    } else {
                        (Some(values.iter().sum::<f64>() / values.len() as f64), Some(boxplot_stats(&values)?))
                    };
                    cells.push(AggregateCell { percentile: q, quantity, subset, metric, mean, summary });
                }
            }
        }
    }
    Ok(cells)
}

pub fn run_experiment(dataset: &Dataset, config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let prep = prepare(dataset, config)?;
    let mut or_config = config.or_config.clone();
    or_config.categorical_groups = dataset.categorical_groups.clone();

    let r_outl = if dataset.continuous_columns.is_empty() || dataset.test_inputs.nrows() == 0 {
        None
    } else {
        Some(r_outl_columns(&prep.test_x, &dataset.continuous_columns)?)
    };

    let gates = config
        .gate_percentiles
        .iter()
        .zip(&prep.gates)
        .map(|(&q, (gate, outliers, _))| {
            Ok(GateReport {
                percentile: q,
                threshold_distance: gate.threshold_distance,
                ridge: gate.ridge,
                outlier_indices: outliers.clone(),
                rows: gate.inspect_all(&prep.test_x)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut activations = Vec::new();
    for &kind in &config.activations {
        let cv_config = CvConfig {
            seed: derive_seed(config.master_seed, &[CV_TAG, activation_tag(kind), config.cv.seed]),
            ..config.cv.clone()
        };
        let cv = cross_validate(&prep.train_x, &prep.train_y, kind, &cv_config, &config.elm)?;
        let node_count = cv.selected;
        info!("{kind}: {node_count} hidden nodes");

        let outputs = (0..config.trials)
            .into_par_iter()
            .map(|t| run_trial(dataset, &prep, config, &or_config, kind, node_count, t, config.diagnostics && t == 0))
            .collect::<Result<Vec<_>>>()?;
        let mut first_trial = None;
        let mut trials = Vec::new();
        for out in outputs {
            if out.rows.is_some() {
                first_trial = out.rows;
            }
            trials.extend(out.reports);
        }
        let aggregates = aggregate(&config.gate_percentiles, &trials)?;
        activations.push(ActivationReport { activation: kind, node_count, cv, trials, aggregates, first_trial });
    }

    Ok(ExperimentReport {
        dataset: DatasetSummary {
            name: dataset.name.clone(),
            feature_names: dataset.feature_names.clone(),
            train_count: dataset.train_targets.len(),
            test_count: dataset.test_targets.len(),
            target_transform: dataset.target_transform,
            r_outl,
        },
        config: config.clone(),
        gates,
        activations,
    })
}
