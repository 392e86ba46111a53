use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{elm_predict, elm_train_with, ActivationKind, ElmConfig};
use crate::error::{invalid, Result};
use crate::numkernel::RealMatrix;
use crate::seed::derive_seed;

const DEFAULT_GRID: [usize; 9] = [5, 10, 20, 40, 70, 100, 150, 200, 300];

/// Cross-validation settings for choosing the hidden-node count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvConfig {
    pub folds: usize,
    /// Empty means the default grid truncated to the training-fold size.
    pub candidate_node_counts: Vec<usize>,
    pub seed: u64,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self { folds: 5, candidate_node_counts: Vec::new(), seed: 0 }
    }
}

impl CvConfig {
    fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return invalid(format!("folds must be at least 2, got {}", self.folds));
        }
        if self.candidate_node_counts.contains(&0) {
            return invalid("candidate node counts must be positive");
        }
        if self.candidate_node_counts.windows(2).any(|w| w[0] >= w[1]) {
            return invalid("candidate node counts must be strictly increasing");
        }
        Ok(())
    }

    fn candidates(&self, n: usize) -> Vec<usize> {
        if self.candidate_node_counts.is_empty() {
            default_node_grid(n, self.folds)
        } else {
            self.candidate_node_counts.clone()
        }
    }
}

/// `{5, 10, 20, 40, 70, 100, 150, 200, 300}` truncated to `n (folds-1) / folds`.
pub fn default_node_grid(n: usize, folds: usize) -> Vec<usize> {
    let cap = n * folds.saturating_sub(1) / folds.max(1);
    let grid: Vec<usize> = DEFAULT_GRID.iter().copied().filter(|&l| l <= cap).collect();
    if grid.is_empty() {
        vec![cap.max(1)]
    } else {
        grid
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvOutcome {
    pub selected: usize,
    /// Mean validation MSE per candidate; `None` when the candidate was skipped.
    pub scores: Vec<(usize, Option<f64>)>,
}

/// Contiguous fold boundaries: fold k is rows `[k n / folds, (k+1) n / folds)`.
fn fold_bounds(n: usize, folds: usize) -> Vec<(usize, usize)> {
    (0..folds).map(|k| (k * n / folds, (k + 1) * n / folds)).collect()
}

fn take_rows(m: &RealMatrix, rows: impl Iterator<Item = usize>) -> RealMatrix {
    let rows: Vec<usize> = rows.collect();
    m.select_rows(rows.iter())
}

pub fn cross_validate(
    inputs: &RealMatrix,
    targets: &RealMatrix,
    activation: ActivationKind,
    cv: &CvConfig,
    elm: &ElmConfig,
) -> Result<CvOutcome> {
    cv.validate()?;
    let n = inputs.nrows();
    if targets.nrows() != n {
        return invalid(format!("{n} input rows but {} target rows", targets.nrows()));
    }
    if n < cv.folds {
        return invalid(format!("{n} rows is fewer than {} folds", cv.folds));
    }
    let bounds = fold_bounds(n, cv.folds);
    let min_train = bounds.iter().map(|(a, b)| n - (b - a)).min().unwrap_or(0);

    let candidates = cv.candidates(n);
    let scores: Vec<(usize, Option<f64>)> = candidates
        .par_iter()
        .map(|&l| -> Result<(usize, Option<f64>)> {
            if l > min_train {
                warn!("skipping node count {l}: exceeds training-fold size {min_train}");
                return Ok((l, None));
            }
            let mut total = 0.0;
            for (k, &(lo, hi)) in bounds.iter().enumerate() {
                let train_rows = (0..lo).chain(hi..n);
                let x_tr = take_rows(inputs, train_rows.clone());
                let y_tr = take_rows(targets, train_rows);
                let x_va = take_rows(inputs, lo..hi);
                let y_va = take_rows(targets, lo..hi);
                let seed = derive_seed(cv.seed, &[k as u64, l as u64]);
                let model = elm_train_with(&x_tr, &y_tr, l, activation, seed, elm)?;
                let pred = elm_predict(&model, &x_va)?;
                total += (pred - y_va).norm_squared() / ((hi - lo) * targets.ncols()) as f64;
            }
            Ok((l, Some(total / cv.folds as f64)))
        })
        .collect::<Result<_>>()?;

    let mut best: Option<(usize, f64)> = None;
    for &(l, score) in &scores {
        if let Some(s) = score {
            // strict improvement keeps ties on the smaller count
            if best.is_none_or(|(_, b)| s < b) {
                best = Some((l, s));
            }
        }
    }
    match best {
        Some((selected, _)) => Ok(CvOutcome { selected, scores }),
        None => invalid("every candidate node count exceeds the training-fold size"),
    }
}

/// Hidden-node count with the lowest mean validation MSE over contiguous folds.
pub fn select_node_count(
    inputs: &RealMatrix,
    targets: &RealMatrix,
    activation: ActivationKind,
    cv: &CvConfig,
) -> Result<usize> {
    Ok(cross_validate(inputs, targets, activation, cv, &ElmConfig::default())?.selected)
}
