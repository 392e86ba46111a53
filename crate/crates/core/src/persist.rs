//! Versioned JSON files for trained ensembles and fitted gates.
//!
//! Matrices are stored row-major with explicit shapes. Floats are written
//! in shortest round-trip form, so loading reproduces every value exactly.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gate::Gate;
use crate::numkernel::{RealMatrix, RealVector};
use crate::regress::{ActivationKind, ElmModel, EnsembleModel, TrimPolicy};

pub const ENSEMBLE_FORMAT: &str = "nlror-ensemble";
pub const GATE_FORMAT: &str = "nlror-gate";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StoredMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl From<&RealMatrix> for StoredMatrix {
    fn from(m: &RealMatrix) -> Self {
        let data = (0..m.nrows()).flat_map(|r| (0..m.ncols()).map(move |c| m[(r, c)])).collect();
        Self { rows: m.nrows(), cols: m.ncols(), data }
    }
}

impl StoredMatrix {
    fn into_matrix(self, what: &str) -> Result<RealMatrix> {
        if self.rows * self.cols != self.data.len() {
            return Err(Error::Format(format!(
                "{what}: {} values for a {}x{} matrix",
                self.data.len(),
                self.rows,
                self.cols
            )));
        }
        Ok(RealMatrix::from_row_slice(self.rows, self.cols, &self.data))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StoredMember {
    seed: u64,
    hidden_weights: StoredMatrix,
    hidden_biases: Vec<f64>,
    output_weights: StoredMatrix,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StoredEnsemble {
    format: String,
    version: u32,
    activation: ActivationKind,
    trim_policy: TrimPolicy,
    seed: u64,
    node_count: usize,
    input_dim: usize,
    output_dim: usize,
    members: Vec<StoredMember>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StoredGate {
    format: String,
    version: u32,
    percentile_q: f64,
    threshold_distance: f64,
    ridge: f64,
    mean: Vec<f64>,
    center: Vec<f64>,
    covariance: StoredMatrix,
    covariance_factor: StoredMatrix,
    training_inputs: StoredMatrix,
}

fn check_header(found: &str, version: u32, expected: &str) -> Result<()> {
    if found != expected {
        return Err(Error::Format(format!("expected a {expected} file, found '{found}'")));
    }
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported {expected} version {version}")));
    }
    Ok(())
}

pub fn ensemble_to_json(ensemble: &EnsembleModel) -> Result<String> {
    let stored = StoredEnsemble {
        format: ENSEMBLE_FORMAT.into(),
        version: FORMAT_VERSION,
        activation: ensemble.activation(),
        trim_policy: ensemble.trim_policy,
        seed: ensemble.seed,
        node_count: ensemble.node_count(),
        input_dim: ensemble.input_dim(),
        output_dim: ensemble.members[0].output_dim(),
        members: ensemble
            .members
            .iter()
            .map(|m| StoredMember {
                seed: m.seed,
                hidden_weights: (&m.hidden_weights).into(),
                hidden_biases: m.hidden_biases.iter().copied().collect(),
                output_weights: (&m.output_weights).into(),
            })
            .collect(),
    };
    Ok(serde_json::to_string(&stored)?)
}

pub fn ensemble_from_json(text: &str) -> Result<EnsembleModel> {
    let stored: StoredEnsemble = serde_json::from_str(text)?;
    check_header(&stored.format, stored.version, ENSEMBLE_FORMAT)?;
    let (l, d, m) = (stored.node_count, stored.input_dim, stored.output_dim);
    let members = stored
        .members
        .into_iter()
        .enumerate()
        .map(|(i, s)| {
            let what = format!("member {i}");
            let hidden_weights = s.hidden_weights.into_matrix(&what)?;
            let output_weights = s.output_weights.into_matrix(&what)?;
            if hidden_weights.shape() != (l, d) || output_weights.shape() != (l, m) || s.hidden_biases.len() != l {
                return Err(Error::Format(format!("{what}: shapes disagree with the header")));
            }
            Ok(ElmModel {
                hidden_weights,
                hidden_biases: RealVector::from_vec(s.hidden_biases),
                output_weights,
                activation: stored.activation,
                seed: s.seed,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    EnsembleModel::new(members, stored.trim_policy, stored.seed)
}

pub fn gate_to_json(gate: &Gate) -> Result<String> {
    let stored = StoredGate {
        format: GATE_FORMAT.into(),
        version: FORMAT_VERSION,
        percentile_q: gate.percentile_q,
        threshold_distance: gate.threshold_distance,
        ridge: gate.ridge,
        mean: gate.mean.iter().copied().collect(),
        center: gate.center.iter().copied().collect(),
        covariance: (&gate.covariance).into(),
        covariance_factor: (&gate.covariance_factor).into(),
        training_inputs: (&gate.training_inputs).into(),
    };
    Ok(serde_json::to_string(&stored)?)
}

pub fn gate_from_json(text: &str) -> Result<Gate> {
    let stored: StoredGate = serde_json::from_str(text)?;
    check_header(&stored.format, stored.version, GATE_FORMAT)?;
    let d = stored.mean.len();
    let gate = Gate {
        covariance: stored.covariance.into_matrix("covariance")?,
        covariance_factor: stored.covariance_factor.into_matrix("covariance factor")?,
        training_inputs: stored.training_inputs.into_matrix("training inputs")?,
        mean: RealVector::from_vec(stored.mean),
        center: RealVector::from_vec(stored.center),
        ridge: stored.ridge,
        threshold_distance: stored.threshold_distance,
        percentile_q: stored.percentile_q,
    };
    if gate.center.len() != d
        || gate.covariance.shape() != (d, d)
        || gate.covariance_factor.shape() != (d, d)
        || gate.training_inputs.ncols() != d
    {
        return Err(Error::Format("gate shapes disagree".into()));
    }
    Ok(gate)
}

fn read<T>(path: &Path, parse: impl Fn(&str) -> Result<T>) -> Result<T> {
    parse(&std::fs::read_to_string(path)?)
}

pub fn save_ensemble(ensemble: &EnsembleModel, path: &Path) -> Result<()> {
    Ok(std::fs::write(path, ensemble_to_json(ensemble)?)?)
}

pub fn load_ensemble(path: &Path) -> Result<EnsembleModel> {
    read(path, ensemble_from_json)
}

pub fn save_gate(gate: &Gate, path: &Path) -> Result<()> {
    Ok(std::fs::write(path, gate_to_json(gate)?)?)
}

pub fn load_gate(path: &Path) -> Result<Gate> {
    read(path, gate_from_json)
}

/// The `format` tag of a stored ensemble or gate.
pub fn peek_format(text: &str) -> Result<String> {
    #[derive(Deserialize)]
    struct Tag {
        format: String,
    }
    Ok(serde_json::from_str::<Tag>(text)?.format)
}
