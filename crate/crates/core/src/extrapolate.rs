//! Linear extrapolation of a fitted nonlinear surface to outlying inputs.
//!
//! For an outlier `x_o` the surface is extended along straight lines using
//! two evaluation points inside the data: once from the nearest training
//! neighbour (for each `delta1`) and once along the line to the training
//! centre (for each `delta2`). The final value is the median of those
//! extrapolations together with the raw surface value.

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::gate::Gate;
use crate::numkernel::{columnwise_median, median, RealMatrix, RealVector};
use crate::preprocess::OneHotGroup;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OrConfig {
    pub delta1_values: Vec<f64>,
    pub delta2_values: Vec<f64>,
    pub include_raw_nlr: bool,
    /// Indicator blocks held fixed during extrapolation; each selects its
    /// own training centre.
    pub categorical_groups: Vec<OneHotGroup>,
}

impl Default for OrConfig {
    fn default() -> Self {
        Self {
            delta1_values: vec![0.25, 0.5],
            delta2_values: vec![0.5, 1.0],
            include_raw_nlr: true,
            categorical_groups: Vec::new(),
        }
    }
}

impl OrConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(d) = self.delta1_values.iter().find(|d| !(**d > 0.0) || !d.is_finite()) {
            return invalid(format!("delta1 values must be positive, got {d}"));
        }
        if let Some(d) = self.delta2_values.iter().find(|d| !(**d > 0.0 && **d <= 1.0)) {
            return invalid(format!("delta2 values must lie in (0, 1], got {d}"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CandidateKind {
    NearestNeighbor,
    Center,
    RawNlr,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub kind: CandidateKind,
    pub delta: Option<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedCandidate {
    pub kind: CandidateKind,
    pub delta: f64,
    pub reason: String,
}

/// Result of one outlier prediction with its full candidate set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrOutcome {
    pub value: f64,
    pub neighbor_index: usize,
    pub candidates: Vec<Candidate>,
    pub dropped: Vec<DroppedCandidate>,
}

fn axpy(x: &[f64], t: f64, dir: &[f64]) -> Vec<f64> {
    x.iter().zip(dir).map(|(a, b)| a + t * b).collect()
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_lengths(parts: &[&[f64]]) -> Result<()> {
    let n = parts[0].len();
    if parts.iter().any(|p| p.len() != n) {
        return invalid("extrapolation points differ in dimension");
    }
    Ok(())
}

/// Extrapolates along the line from `x_o` through its nearest neighbour
/// `x_nn`. The second point sits `delta1 * d_nn` beyond the neighbour, away
/// from the outlier.
pub fn nn_linear_extrapolate<F>(f: &F, x_o: &[f64], x_nn: &[f64], delta1: f64) -> Result<f64>
where
    F: Fn(&[f64]) -> f64 + ?Sized,
{
    check_lengths(&[x_o, x_nn])?;
    if !(delta1 > 0.0) {
        return invalid(format!("delta1 must be positive, got {delta1}"));
    }
    let away = sub(x_nn, x_o);
    if away.iter().all(|v| *v == 0.0) {
        return invalid("outlier coincides with its nearest neighbour");
    }
    let star = axpy(x_nn, delta1, &away);
    let f_nn = f(x_nn);
    Ok(f_nn + (f_nn - f(&star)) / delta1)
}

/// Extrapolates along the line joining the training centre and `x_o`.
///
/// `x_nn` is projected onto that line at `p`; the second point lies a
/// fraction `delta2` of the way from `p` back to the centre. Fails with
/// [`Error::DegenerateGeometry`] when `p` is not strictly between the centre
/// and `x_o`.
pub fn center_linear_extrapolate<F>(
    f: &F,
    x_o: &[f64],
    x_nn: &[f64],
    center: &[f64],
    delta2: f64,
) -> Result<f64>
where
    F: Fn(&[f64]) -> f64 + ?Sized,
{
    check_lengths(&[x_o, x_nn, center])?;
    if !(delta2 > 0.0 && delta2 <= 1.0) {
        return invalid(format!("delta2 must lie in (0, 1], got {delta2}"));
    }
    let axis = sub(x_o, center);
    let len2 = dot(&axis, &axis);
    if len2 == 0.0 {
        return invalid("outlier coincides with the training centre");
    }
    // p = center + s * axis; s in (0, 1) puts p between centre and outlier
    let s = dot(&sub(x_nn, center), &axis) / len2;
    if s == 0.0 {
        return Err(Error::DegenerateGeometry("projection falls on the centre".into()));
    }
    if s < 0.0 {
        return Err(Error::DegenerateGeometry("projection lies behind the centre".into()));
    }
    if s >= 1.0 {
        return Err(Error::DegenerateGeometry("projection lies at or beyond the outlier".into()));
    }
    let p = axpy(center, s, &axis);
    let star = axpy(&p, -delta2 * s, &axis);
    let f_p = f(&p);
    // |x_o - p| / (delta2 * d_c) with d_c = s |axis|
    Ok(f_p + (1.0 - s) / (delta2 * s) * (f_p - f(&star)))
}

fn indicator_columns(groups: &[OneHotGroup]) -> Vec<usize> {
    groups.iter().flat_map(|g| g.column_indices.iter().copied()).collect()
}

/// Copies the indicator coordinates of `from` into `onto`.
fn pin_indicators(onto: &[f64], from: &[f64], columns: &[usize]) -> Vec<f64> {
    let mut out = onto.to_vec();
    for &c in columns {
        out[c] = from[c];
    }
    out
}

/// Median of the training rows sharing `x_o`'s category in every group.
/// Falls back to the global centre when no training row matches.
pub fn categorical_center(gate: &Gate, x_o: &[f64], groups: &[OneHotGroup]) -> Result<RealVector> {
    if x_o.len() != gate.dim() {
        return invalid(format!("gate fitted on {} inputs, got {}", gate.dim(), x_o.len()));
    }
    let mut wanted = Vec::with_capacity(groups.len());
    for g in groups {
        let cat = g.category_of(x_o).ok_or_else(|| {
            Error::InvalidArgument("outlier has an invalid indicator block".into())
        })?;
        wanted.push(cat);
    }
    let rows: Vec<usize> = gate
        .training_inputs
        .row_iter()
        .enumerate()
        .filter(|(_, row)| {
            let row: Vec<f64> = row.iter().copied().collect();
            groups.iter().zip(&wanted).all(|(g, &k)| g.category_of(&row) == Some(k))
        })
        .map(|(i, _)| i)
        .collect();
    if rows.is_empty() {
        warn!("no training rows share the outlier's category; using the global centre");
        return Ok(gate.center.clone());
    }
    let subset: RealMatrix = gate.training_inputs.select_rows(rows.iter());
    columnwise_median(&subset)
}

/// Median of the directional extrapolations and (optionally) the raw
/// surface value at `x_o`.
pub fn nlror_predict<F>(f: &F, gate: &Gate, x_o: &[f64], config: &OrConfig) -> Result<OrOutcome>
where
    F: Fn(&[f64]) -> f64 + ?Sized,
{
    config.validate()?;
    let (neighbor_index, _) = gate.nearest_training_neighbor(x_o)?;
    let pinned = indicator_columns(&config.categorical_groups);
    let x_nn = pin_indicators(&gate.training_row(neighbor_index), x_o, &pinned);
    let center = if config.categorical_groups.is_empty() {
        gate.center.as_slice().to_vec()
    } else {
        let c = categorical_center(gate, x_o, &config.categorical_groups)?;
        pin_indicators(c.as_slice(), x_o, &pinned)
    };

    let mut candidates = Vec::new();
    let mut dropped = Vec::new();
    let mut record = |kind, delta: f64, res: Result<f64>| match res {
        Ok(value) if value.is_finite() => candidates.push(Candidate { kind, delta: Some(delta), value }),
        Ok(value) => dropped.push(DroppedCandidate { kind, delta, reason: format!("non-finite value {value}") }),
        Err(e @ (Error::InvalidArgument(_) | Error::DegenerateGeometry(_))) => {
            dropped.push(DroppedCandidate { kind, delta, reason: e.to_string() })
        }
        Err(e) => dropped.push(DroppedCandidate { kind, delta, reason: format!("unexpected: {e}") }),
    };
    for &d in &config.delta1_values {
        record(CandidateKind::NearestNeighbor, d, nn_linear_extrapolate(f, x_o, &x_nn, d));
    }
    for &d in &config.delta2_values {
        record(CandidateKind::Center, d, center_linear_extrapolate(f, x_o, &x_nn, &center, d));
    }
    if !dropped.is_empty() {
        debug!("{} extrapolation candidate(s) dropped for an outlier", dropped.len());
    }

    if config.include_raw_nlr {
        candidates.push(Candidate { kind: CandidateKind::RawNlr, delta: None, value: f(x_o) });
    } else if candidates.is_empty() {
        return Err(Error::NoPrediction(
            "every directional extrapolation was degenerate and the raw value is excluded".into(),
        ));
    }
    let values: Vec<f64> = candidates.iter().map(|c| c.value).collect();
    let value = median(&values)?;
    Ok(OrOutcome { value, neighbor_index, candidates, dropped })
}

/// One-dimensional continuation of `f` beyond `[train_min, train_max]`
/// along a backward finite-difference slope taken at each boundary.
pub fn boundary_extrapolate_1d<F>(f: &F, train_min: f64, train_max: f64, fd_step: f64, x: f64) -> Result<f64>
where
    F: Fn(f64) -> f64 + ?Sized,
{
    if !(fd_step > 0.0) {
        return invalid(format!("fd_step must be positive, got {fd_step}"));
    }
    if train_min > train_max {
        return invalid("train_min exceeds train_max");
    }
    Ok(if x > train_max {
        let edge = f(train_max);
        let slope = (edge - f(train_max - fd_step)) / fd_step;
        edge + (x - train_max) * slope
    } else if x < train_min {
        let edge = f(train_min);
        let slope = (f(train_min + fd_step) - edge) / fd_step;
        edge + (x - train_min) * slope
    } else {
        f(x)
    })
}
