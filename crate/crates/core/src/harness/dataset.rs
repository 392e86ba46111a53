//! Manifest-driven CSV ingestion.
//!
//! A manifest names the feature and target columns of a CSV file, any
//! categorical columns to one-hot encode, the target transform and how the
//! record is split into a training part and a test part.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numkernel::RealMatrix;
use crate::preprocess::{apply_minmax, fit_minmax, transform_target, MinMaxScaler, OneHotGroup, TargetTransform};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CategoricalColumn {
    pub source_column: String,
    pub categories: Vec<String>,
}

/// Either a training fraction, or explicit half-open row ranges over the
/// retained rows. The ranges must be disjoint and together cover every
/// retained row.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_fraction: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_rows: Option<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_rows: Option<[usize; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    /// Relative paths are resolved against the manifest's directory.
    pub csv_path: PathBuf,
    pub feature_columns: Vec<String>,
    pub target_column: String,
    #[serde(default)]
    pub categorical_groups: Vec<CategoricalColumn>,
    #[serde(default)]
    pub target_transform: TargetTransform,
    #[serde(default)]
    pub clip_negative_predictions: bool,
    pub split: SplitSpec,
    /// Train on the later part of the record instead of the earlier part.
    /// With explicit ranges the two ranges swap roles.
    #[serde(default)]
    pub reverse_order: bool,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
}

fn default_delimiter() -> char {
    ','
}

impl DatasetManifest {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Format(format!("manifest: {e}")))
    }

    /// Reads a manifest and makes `csv_path` absolute.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut manifest = Self::from_toml_str(&text)?;
        if manifest.csv_path.is_relative() {
            let base = path.parent().unwrap_or(Path::new("."));
            manifest.csv_path = base.join(&manifest.csv_path);
        }
        Ok(manifest)
    }

    /// File stem of the CSV, used to label reports.
    pub fn name(&self) -> String {
        self.csv_path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".into())
    }
}

/// Inputs are continuous features followed by one indicator block per
/// categorical group. Targets are in transformed space.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub name: String,
    pub feature_names: Vec<String>,
    pub continuous_columns: Vec<usize>,
    pub categorical_groups: Vec<OneHotGroup>,
    pub train_inputs: RealMatrix,
    pub train_targets: Vec<f64>,
    pub test_inputs: RealMatrix,
    pub test_targets: Vec<f64>,
    /// CSV line numbers (header is line 1) of the rows in each part.
    pub train_lines: Vec<usize>,
    pub test_lines: Vec<usize>,
    pub dropped_lines: Vec<usize>,
    pub target_transform: TargetTransform,
    pub clip_negative_predictions: bool,
}

impl Dataset {
    /// A purely continuous dataset with untransformed targets.
    pub fn from_parts(
        name: impl Into<String>,
        train_inputs: RealMatrix,
        train_targets: Vec<f64>,
        test_inputs: RealMatrix,
        test_targets: Vec<f64>,
    ) -> Result<Self> {
        let d = train_inputs.ncols();
        if test_inputs.ncols() != d {
            return invalid(format!("train has {d} columns, test has {}", test_inputs.ncols()));
        }
        if train_inputs.nrows() != train_targets.len() || test_inputs.nrows() != test_targets.len() {
            return invalid("input rows and target lengths differ");
        }
        Ok(Self {
            name: name.into(),
            feature_names: (0..d).map(|c| format!("x{c}")).collect(),
            continuous_columns: (0..d).collect(),
            categorical_groups: Vec::new(),
            train_lines: (0..train_targets.len()).collect(),
            test_lines: (train_targets.len()..train_targets.len() + test_targets.len()).collect(),
            dropped_lines: Vec::new(),
            train_inputs,
            train_targets,
            test_inputs,
            test_targets,
            target_transform: TargetTransform::None,
            clip_negative_predictions: false,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.train_inputs.ncols()
    }

    /// Min-max scales the continuous columns on the training part. Indicator
    /// columns keep their 0/1 coding, which already lies inside [-1, 1].
    pub fn scaled_inputs(&self) -> Result<(MinMaxScaler, RealMatrix, RealMatrix)> {
        let scaler = fit_minmax(&self.train_inputs)?;
        let mut train = apply_minmax(&scaler, &self.train_inputs)?;
        let mut test = apply_minmax(&scaler, &self.test_inputs)?;
        for g in &self.categorical_groups {
            for &c in &g.column_indices {
                train.set_column(c, &self.train_inputs.column(c));
                test.set_column(c, &self.test_inputs.column(c));
            }
        }
        Ok((scaler, train, test))
    }
}

fn ingest(line: usize, column: &str, message: impl Into<String>) -> Error {
    Error::Ingestion { row: line, column: column.to_string(), message: message.into() }
}

fn column_index(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| ingest(1, name, "column not found in header"))
}

fn split_indices(split: &SplitSpec, reverse: bool, n: usize) -> Result<(Vec<usize>, Vec<usize>)> {
    match (split.train_fraction, split.train_rows, split.test_rows) {
        (Some(f), None, None) => {
            if !(f > 0.0 && f < 1.0) {
                return invalid(format!("train_fraction must lie in (0, 1), got {f}"));
            }
            let n_train = (f * n as f64).round() as usize;
            if n_train == 0 || n_train == n {
                return invalid(format!("train_fraction {f} leaves an empty part of {n} rows"));
            }
            let (train, test): (Vec<usize>, Vec<usize>) = if reverse {
                ((n - n_train..n).collect(), (0..n - n_train).collect())
            } else {
                ((0..n_train).collect(), (n_train..n).collect())
            };
            Ok((train, test))
        }
        (None, Some(tr), Some(te)) => {
            for r in [tr, te] {
                if r[0] >= r[1] {
                    return invalid(format!("row range {r:?} is empty"));
                }
            }
            let (first, second) = if tr[0] < te[0] { (tr, te) } else { (te, tr) };
            if first[0] != 0 || first[1] != second[0] || second[1] != n {
                return invalid(format!(
                    "train {tr:?} and test {te:?} must be disjoint and cover the {n} retained rows"
                ));
            }
            let (tr, te) = if reverse { (te, tr) } else { (tr, te) };
            Ok(((tr[0]..tr[1]).collect(), (te[0]..te[1]).collect()))
        }
        _ => invalid("split needs either train_fraction or both train_rows and test_rows"),
    }
}

pub fn load_dataset(manifest: &DatasetManifest) -> Result<Dataset> {
    if manifest.feature_columns.is_empty() && manifest.categorical_groups.is_empty() {
        return invalid("manifest lists no features");
    }
    if !manifest.delimiter.is_ascii() {
        return invalid(format!("delimiter {:?} is not a single-byte character", manifest.delimiter));
    }
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(manifest.delimiter as u8)
        .has_headers(true)
        .from_path(&manifest.csv_path)?;
    let headers = reader.headers()?.clone();

    let feature_idx = manifest
        .feature_columns
        .iter()
        .map(|c| column_index(&headers, c))
        .collect::<Result<Vec<_>>>()?;
    let target_idx = column_index(&headers, &manifest.target_column)?;
    let cat_idx = manifest
        .categorical_groups
        .iter()
        .map(|g| {
            if g.categories.is_empty() {
                return invalid(format!("categorical column '{}' lists no categories", g.source_column));
            }
            let distinct: HashSet<&String> = g.categories.iter().collect();
            if distinct.len() != g.categories.len() {
                return invalid(format!("categorical column '{}' repeats a category", g.source_column));
            }
            column_index(&headers, &g.source_column)
        })
        .collect::<Result<Vec<_>>>()?;

    let used: Vec<usize> = feature_idx.iter().chain(&cat_idx).chain([&target_idx]).copied().collect();
    let mut features: Vec<Vec<f64>> = Vec::new();
    let mut raw_targets = Vec::new();
    let mut lines = Vec::new();
    let mut dropped = Vec::new();

    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let line = i + 2;
        if used.iter().any(|&c| record.get(c).is_none_or(|v| v.trim().is_empty())) {
            dropped.push(line);
            continue;
        }
        let parse = |c: usize| -> Result<f64> {
            let cell = record[c].trim();
            let v: f64 = cell
                .parse()
                .map_err(|_| ingest(line, &headers[c], format!("cannot parse '{cell}' as a number")))?;
            if !v.is_finite() {
                return Err(ingest(line, &headers[c], format!("non-finite value '{cell}'")));
            }
            Ok(v)
        };
        let mut row = feature_idx.iter().map(|&c| parse(c)).collect::<Result<Vec<f64>>>()?;
        for (g, &c) in manifest.categorical_groups.iter().zip(&cat_idx) {
            let label = record[c].trim();
            let k = g
                .categories
                .iter()
                .position(|cat| cat == label)
                .ok_or_else(|| ingest(line, &headers[c], format!("unknown category '{label}'")))?;
            row.extend((0..g.categories.len()).map(|j| if j == k { 1.0 } else { 0.0 }));
        }
        features.push(row);
        raw_targets.push(parse(target_idx)?);
        lines.push(line);
    }
    if !dropped.is_empty() {
        info!("dropped {} rows with missing values in used columns", dropped.len());
    }

    let targets = transform_target(&raw_targets, manifest.target_transform).map_err(|e| {
        // the transform reports the offending index; recover its line
        let line = raw_targets
            .iter()
            .position(|&v| transform_target(&[v], manifest.target_transform).is_err())
            .map(|i| lines[i])
            .unwrap_or(0);
        ingest(line, &manifest.target_column, e.to_string())
    })?;

    let n = features.len();
    let (train, test) = split_indices(&manifest.split, manifest.reverse_order, n)?;

    let mut feature_names = manifest.feature_columns.clone();
    let mut categorical_groups = Vec::new();
    for g in &manifest.categorical_groups {
        let start = feature_names.len();
        feature_names.extend(g.categories.iter().map(|c| format!("{}={c}", g.source_column)));
        categorical_groups.push(OneHotGroup {
            column_indices: (start..start + g.categories.len()).collect(),
            category_labels: g.categories.clone(),
        });
    }
    let d = feature_names.len();
    let gather = |rows: &[usize]| RealMatrix::from_fn(rows.len(), d, |r, c| features[rows[r]][c]);

    for g in &categorical_groups {
        for k in 0..g.category_labels.len() {
            let col = g.column_indices[k];
            if train.iter().all(|&r| features[r][col] == 0.0) {
                warn!("category '{}' has no training rows", feature_names[col]);
            }
        }
    }

    Ok(Dataset {
        name: manifest.name(),
        continuous_columns: (0..manifest.feature_columns.len()).collect(),
        categorical_groups,
        train_inputs: gather(&train),
        train_targets: train.iter().map(|&r| targets[r]).collect(),
        test_inputs: gather(&test),
        test_targets: test.iter().map(|&r| targets[r]).collect(),
        train_lines: train.iter().map(|&r| lines[r]).collect(),
        test_lines: test.iter().map(|&r| lines[r]).collect(),
        dropped_lines: dropped,
        feature_names,
        target_transform: manifest.target_transform,
        clip_negative_predictions: manifest.clip_negative_predictions,
    })
}
