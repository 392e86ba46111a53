use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{elm_predict, elm_train_with, ActivationKind, ElmConfig, ElmModel};
use crate::error::{invalid, Result};
use crate::numkernel::RealMatrix;
use crate::seed::derive_seed;

pub const DEFAULT_MEMBERS: usize = 100;

/// How member predictions are combined at each point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrimPolicy {
    None,
    /// Exclude the single largest and smallest member value before averaging.
    DropMinMax,
}

impl TrimPolicy {
    /// Radial-basis ensembles are trimmed; the others are not.
    pub fn for_activation(kind: ActivationKind) -> Self {
        match kind {
            ActivationKind::RadialBasis => Self::DropMinMax,
            _ => Self::None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleModel {
    pub members: Vec<ElmModel>,
    pub trim_policy: TrimPolicy,
    pub seed: u64,
}

impl EnsembleModel {
    pub fn new(members: Vec<ElmModel>, trim_policy: TrimPolicy, seed: u64) -> Result<Self> {
        let Some(first) = members.first() else {
            return invalid("an ensemble needs at least one member");
        };
        let shape = (first.activation, first.node_count(), first.input_dim(), first.output_dim());
        if members
            .iter()
            .any(|m| (m.activation, m.node_count(), m.input_dim(), m.output_dim()) != shape)
        {
            return invalid("ensemble members differ in activation or dimensions");
        }
        if trim_policy == TrimPolicy::DropMinMax && members.len() < 3 {
            return invalid("drop-min-max trimming needs at least 3 members");
        }
        Ok(Self { members, trim_policy, seed })
    }

    pub fn activation(&self) -> ActivationKind {
        self.members[0].activation
    }

    pub fn node_count(&self) -> usize {
        self.members[0].node_count()
    }

    pub fn input_dim(&self) -> usize {
        self.members[0].input_dim()
    }

    /// Every member's predictions, in member order.
    pub fn member_predictions(&self, inputs: &RealMatrix) -> Result<Vec<RealMatrix>> {
        if inputs.ncols() != self.input_dim() {
            return invalid(format!(
                "ensemble expects {} inputs, got {}",
                self.input_dim(),
                inputs.ncols()
            ));
        }
        self.members.par_iter().map(|m| elm_predict(m, inputs)).collect()
    }

    /// Ensemble value at a single point, first output component.
    pub fn predict_point(&self, x: &[f64]) -> Result<f64> {
        let row = RealMatrix::from_row_slice(1, x.len(), x);
        Ok(ensemble_predict(self, &row)?[(0, 0)])
    }
}

/// Mean of `values` after removing one instance each of the maximum and the
/// minimum. Requires at least 3 values.
pub fn trimmed_mean(values: &[f64]) -> f64 {
    debug_assert!(values.len() >= 3);
    let mut lo = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[lo] {
            lo = i;
        }
    }
    let mut hi = if lo == 0 { 1 } else { 0 };
    for (i, v) in values.iter().enumerate() {
        if i != lo && *v > values[hi] {
            hi = i;
        }
    }
    let sum: f64 = values
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != lo && *i != hi)
        .map(|(_, v)| v)
        .sum();
    sum / (values.len() - 2) as f64
}

fn combine(values: &[f64], policy: TrimPolicy) -> f64 {
    match policy {
        TrimPolicy::None => values.iter().sum::<f64>() / values.len() as f64,
        TrimPolicy::DropMinMax => trimmed_mean(values),
    }
}

pub fn ensemble_train(
    inputs: &RealMatrix,
    targets: &RealMatrix,
    node_count: usize,
    activation: ActivationKind,
    member_count: usize,
    seed: u64,
) -> Result<EnsembleModel> {
    ensemble_train_with(inputs, targets, node_count, activation, member_count, seed, &ElmConfig::default())
}

pub fn ensemble_train_with(
    inputs: &RealMatrix,
    targets: &RealMatrix,
    node_count: usize,
    activation: ActivationKind,
    member_count: usize,
    seed: u64,
    config: &ElmConfig,
) -> Result<EnsembleModel> {
    if member_count == 0 {
        return invalid("member_count must be at least 1");
    }
    let mut policy = TrimPolicy::for_activation(activation);
    if member_count < 3 {
        policy = TrimPolicy::None;
    }
    let seeds: Vec<u64> = (0..member_count as u64).map(|i| derive_seed(seed, &[i])).collect();
    let members = seeds
        .par_iter()
        .map(|&s| elm_train_with(inputs, targets, node_count, activation, s, config))
        .collect::<Result<Vec<_>>>()?;
    EnsembleModel::new(members, policy, seed)
}

pub fn ensemble_predict(ensemble: &EnsembleModel, inputs: &RealMatrix) -> Result<RealMatrix> {
    let per_member = ensemble.member_predictions(inputs)?;
    let (n, m) = per_member[0].shape();
    let mut out = RealMatrix::zeros(n, m);
    let mut buf = vec![0.0; per_member.len()];
    for r in 0..n {
        for c in 0..m {
            for (slot, p) in buf.iter_mut().zip(&per_member) {
                *slot = p[(r, c)];
            }
            out[(r, c)] = combine(&buf, ensemble.trim_policy);
        }
    }
    Ok(out)
}
