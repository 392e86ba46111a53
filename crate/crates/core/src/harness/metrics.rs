//! Scores used to compare models: normalized MAE, Spearman correlation and
//! boxplot summaries of per-trial scores.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numkernel::{average_ranks, ensure_finite_slice, median_sorted, percentile_sorted};

/// Median absolute deviation from the median.
pub fn mad(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return invalid("median absolute deviation of an empty set");
    }
    ensure_finite_slice("values", values)?;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let med = median_sorted(&sorted);
    let mut dev: Vec<f64> = sorted.iter().map(|v| (v - med).abs()).collect();
    dev.sort_by(f64::total_cmp);
    Ok(median_sorted(&dev))
}

pub fn mae(predictions: &[f64], observations: &[f64]) -> Result<f64> {
    if predictions.len() != observations.len() {
        return invalid(format!(
            "{} predictions but {} observations",
            predictions.len(),
            observations.len()
        ));
    }
    if predictions.is_empty() {
        return invalid("mean absolute error of an empty set");
    }
    ensure_finite_slice("predictions", predictions)?;
    ensure_finite_slice("observations", observations)?;
    let sum: f64 = predictions.iter().zip(observations).map(|(p, o)| (p - o).abs()).sum();
    Ok(sum / predictions.len() as f64)
}

/// Mean absolute error divided by the MAD of `mad_reference`.
pub fn maen(predictions: &[f64], observations: &[f64], mad_reference: &[f64]) -> Result<f64> {
    let scale = mad(mad_reference)?;
    if scale == 0.0 {
        return Err(Error::DegenerateReference);
    }
    Ok(mae(predictions, observations)? / scale)
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

/// Pearson correlation of the average ranks.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return invalid(format!("lengths differ: {} vs {}", a.len(), b.len()));
    }
    if a.len() < 2 {
        return invalid("spearman needs at least two pairs");
    }
    let ra = average_ranks(a)?;
    let rb = average_ranks(b)?;
    pearson(&ra, &rb).ok_or_else(|| Error::UndefinedCorrelation("a vector is constant".into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxplotSummary {
    pub count: usize,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
    pub lower_whisker: f64,
    pub upper_whisker: f64,
    pub outside_points: Vec<f64>,
}

/// Median, quartiles, whiskers at the most extreme data within 1.5 IQR of
/// the box, and the points beyond them.
pub fn boxplot_stats(values: &[f64]) -> Result<BoxplotSummary> {
    if values.is_empty() {
        return invalid("boxplot of an empty set");
    }
    ensure_finite_slice("values", values)?;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q25 = percentile_sorted(&sorted, 25.0);
    let q75 = percentile_sorted(&sorted, 75.0);
    let iqr = q75 - q25;
    let (lo_fence, hi_fence) = (q25 - 1.5 * iqr, q75 + 1.5 * iqr);
    let inside: Vec<f64> = sorted.iter().copied().filter(|v| *v >= lo_fence && *v <= hi_fence).collect();
    Ok(BoxplotSummary {
        count: sorted.len(),
        median: median_sorted(&sorted),
        q25,
        q75,
        lower_whisker: inside.first().copied().unwrap_or(q25).min(q25),
        upper_whisker: inside.last().copied().unwrap_or(q75).max(q75),
        outside_points: sorted.iter().copied().filter(|v| *v < lo_fence || *v > hi_fence).collect(),
    })
}
