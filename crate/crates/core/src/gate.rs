//! Mahalanobis-distance gate separating test inputs into outliers and
//! non-outliers relative to the training inputs.
//!
//! A test row is an outlier when both hold:
//! 1. its Mahalanobis distance from the training mean exceeds the chosen
//!    percentile of the training distances, and
//! 2. it is farther (Euclidean) from the training median than its nearest
//!    training neighbour is.

use log::debug;
use nalgebra::Cholesky;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numkernel::{
    columnwise_median, ensure_finite_matrix, percentile, sample_covariance, sample_mean,
    squared_distance, RealMatrix, RealVector,
};

const RIDGE_TRIGGER: f64 = 1e-10;
const RIDGE_SIZE: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct Gate {
    pub mean: RealVector,
    /// Covariance after any ridge regularization.
    pub covariance: RealMatrix,
    /// Lower Cholesky factor of `covariance`.
    pub covariance_factor: RealMatrix,
    /// Ridge added to the diagonal (0 when none was needed).
    pub ridge: f64,
    pub threshold_distance: f64,
    pub percentile_q: f64,
    pub center: RealVector,
    pub training_inputs: RealMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutlierPartition {
    pub outlier_indices: Vec<usize>,
    pub non_outlier_indices: Vec<usize>,
    pub distances: Vec<f64>,
}

/// Per-row record of both gate conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateRow {
    pub row: usize,
    pub mahalanobis: f64,
    pub exceeds_threshold: bool,
    pub center_distance: f64,
    pub neighbor_index: usize,
    pub neighbor_center_distance: f64,
    pub beyond_neighbor: bool,
    pub outlier: bool,
}

pub fn fit_gate(train_inputs: &RealMatrix, percentile_q: f64) -> Result<Gate> {
    let (n, d) = train_inputs.shape();
    if n < 2 {
        return invalid(format!("fit_gate needs at least 2 training rows, got {n}"));
    }
    if !(percentile_q > 0.0 && percentile_q < 100.0) {
        return invalid(format!("percentile must lie in (0, 100), got {percentile_q}"));
    }
    ensure_finite_matrix("train_inputs", train_inputs)?;

    let mean = sample_mean(train_inputs)?;
    let mut covariance = sample_covariance(train_inputs)?;
    let scale = covariance.trace() / d as f64;
    if !(scale > 0.0) {
        return invalid("training inputs have zero variance in every column");
    }
    let smallest = covariance.clone().symmetric_eigenvalues().min();
    let mut ridge = 0.0;
    if smallest < RIDGE_TRIGGER * scale {
        ridge = RIDGE_SIZE * scale;
        debug!("covariance near singular (min eigenvalue {smallest:e}); adding ridge {ridge:e}");
        for i in 0..d {
            covariance[(i, i)] += ridge;
        }
    }
    let covariance_factor = Cholesky::new(covariance.clone())
        .ok_or_else(|| Error::Internal("covariance is not positive definite after regularization".into()))?
        .unpack();

    let mut gate = Gate {
        mean,
        covariance,
        covariance_factor,
        ridge,
        threshold_distance: 0.0,
        percentile_q,
        center: columnwise_median(train_inputs)?,
        training_inputs: train_inputs.clone(),
    };
    let train_distances = gate.distances(train_inputs)?;
    gate.threshold_distance = percentile(&train_distances, percentile_q)?;
    Ok(gate)
}

impl Gate {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return invalid(format!("gate fitted on {} inputs, got {len}", self.dim()));
        }
        Ok(())
    }

    fn distance_unchecked(&self, x: &[f64]) -> f64 {
        let diff = RealVector::from_iterator(self.dim(), x.iter().zip(self.mean.iter()).map(|(a, m)| a - m));
        let z = self
            .covariance_factor
            .solve_lower_triangular(&diff)
            .expect("Cholesky factor has a positive diagonal");
        z.norm()
    }

    /// Mahalanobis distance of every row.
    pub fn distances(&self, inputs: &RealMatrix) -> Result<Vec<f64>> {
        self.check_dim(inputs.ncols())?;
        let rows: Vec<Vec<f64>> = inputs.row_iter().map(|r| r.iter().copied().collect()).collect();
        Ok(rows.par_iter().map(|r| self.distance_unchecked(r)).collect())
    }

    pub fn mahalanobis_distance(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x.len())?;
        Ok(self.distance_unchecked(x))
    }

    pub fn nearest_training_neighbor(&self, x: &[f64]) -> Result<(usize, f64)> {
        self.check_dim(x.len())?;
        let mut best = (0, f64::INFINITY);
        for (i, row) in self.training_inputs.row_iter().enumerate() {
            let d2 = squared_distance(row.iter(), x.iter());
            // strict comparison keeps the smallest index on ties
            if d2 < best.1 {
                best = (i, d2);
            }
        }
        Ok((best.0, best.1.sqrt()))
    }

    pub fn training_row(&self, index: usize) -> Vec<f64> {
        self.training_inputs.row(index).iter().copied().collect()
    }

    fn center_distance(&self, x: &[f64]) -> f64 {
        squared_distance(x.iter(), self.center.iter()).sqrt()
    }

    /// Evaluates both conditions for one input.
    pub fn inspect(&self, row: usize, x: &[f64]) -> Result<GateRow> {
        let mahalanobis = self.mahalanobis_distance(x)?;
        let (neighbor_index, _) = self.nearest_training_neighbor(x)?;
        let center_distance = self.center_distance(x);
        let neighbor_center_distance = self.center_distance(&self.training_row(neighbor_index));
        let exceeds_threshold = mahalanobis > self.threshold_distance;
        let beyond_neighbor = center_distance > neighbor_center_distance;
        Ok(GateRow {
            row,
            mahalanobis,
            exceeds_threshold,
            center_distance,
            neighbor_index,
            neighbor_center_distance,
            beyond_neighbor,
            outlier: exceeds_threshold && beyond_neighbor,
        })
    }

    pub fn inspect_all(&self, test_inputs: &RealMatrix) -> Result<Vec<GateRow>> {
        self.check_dim(test_inputs.ncols())?;
        ensure_finite_matrix("test_inputs", test_inputs)?;
        let rows: Vec<Vec<f64>> = test_inputs.row_iter().map(|r| r.iter().copied().collect()).collect();
        rows.par_iter().enumerate().map(|(i, r)| self.inspect(i, r)).collect()
    }
}

pub fn mahalanobis_distance(gate: &Gate, x: &[f64]) -> Result<f64> {
    gate.mahalanobis_distance(x)
}

pub fn nearest_training_neighbor(gate: &Gate, x: &[f64]) -> Result<(usize, f64)> {
    gate.nearest_training_neighbor(x)
}

pub fn classify(gate: &Gate, test_inputs: &RealMatrix) -> Result<OutlierPartition> {
    let rows = gate.inspect_all(test_inputs)?;
    let mut part = OutlierPartition {
        outlier_indices: Vec::new(),
        non_outlier_indices: Vec::new(),
        distances: Vec::with_capacity(rows.len()),
    };
    for r in rows {
        part.distances.push(r.mahalanobis);
        if r.outlier {
            part.outlier_indices.push(r.row);
        } else {
            part.non_outlier_indices.push(r.row);
        }
    }
    Ok(part)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn normal_matrix(seed: u64, n: usize, d: usize) -> RealMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        RealMatrix::from_fn(n, d, |_, _| StandardNormal.sample(&mut rng))
    }

    /// Gate with a prescribed mean and covariance, for distance checks.
    fn gate_with(mean: &[f64], cov: RealMatrix) -> Gate {
        let d = mean.len();
        Gate {
            mean: RealVector::from_column_slice(mean),
            covariance_factor: Cholesky::new(cov.clone()).unwrap().unpack(),
            covariance: cov,
            ridge: 0.0,
            threshold_distance: 1.0,
            percentile_q: 99.0,
            center: RealVector::zeros(d),
            training_inputs: RealMatrix::zeros(1, d),
        }
    }

    #[test]
    fn distance_examples() {
        let g = gate_with(&[1.0, -2.0], RealMatrix::identity(2, 2));
        assert_eq!(g.mahalanobis_distance(&[1.0, -2.0]).unwrap(), 0.0);
        assert!((g.mahalanobis_distance(&[4.0, 2.0]).unwrap() - 5.0).abs() < 1e-14);

        let g = gate_with(&[0.0, 0.0], RealMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 1.0]));
        assert!((g.mahalanobis_distance(&[2.0, 1.0]).unwrap() - 2f64.sqrt()).abs() < 1e-14);
        assert!(g.mahalanobis_distance(&[2.0]).is_err());
    }

    #[test]
    fn threshold_fraction() {
        let x = normal_matrix(1, 1000, 3);
        let g = fit_gate(&x, 99.0).unwrap();
        let over = g.distances(&x).unwrap().iter().filter(|&&d| d > g.threshold_distance).count();
        assert!((over as f64) / 1000.0 <= 0.01 + 2.0 / 1000.0);
        let g95 = fit_gate(&x, 95.0).unwrap();
        assert!(g95.threshold_distance <= g.threshold_distance);
    }

    #[test]
    fn fit_errors() {
        assert!(fit_gate(&RealMatrix::zeros(1, 2), 99.0).is_err());
        assert!(fit_gate(&normal_matrix(1, 10, 2), 100.0).is_err());
        assert!(fit_gate(&normal_matrix(1, 10, 2), 0.0).is_err());
        assert!(fit_gate(&RealMatrix::from_element(10, 2, 3.0), 99.0).is_err());
    }

    #[test]
    fn singular_covariance_is_regularized() {
        // third column is a copy of the first; fourth is constant
        let base = normal_matrix(2, 200, 2);
        let x = RealMatrix::from_fn(200, 4, |r, c| match c {
            0 | 2 => base[(r, 0)],
            1 => base[(r, 1)],
            _ => 0.0,
        });
        let g = fit_gate(&x, 99.0).unwrap();
        assert!(g.ridge > 0.0);
        assert!(g.distances(&x).unwrap().iter().all(|d| d.is_finite()));
    }

    #[test]
    fn classification_examples() {
        let x = normal_matrix(3, 300, 2);
        let g = fit_gate(&x, 99.0).unwrap();
        let mean = g.mean.clone();
        let test = RealMatrix::from_row_slice(3, 2, &[
            x[(17, 0)], x[(17, 1)],
            mean[0], mean[1],
            40.0, -35.0,
        ]);
        let p = classify(&g, &test).unwrap();
        assert_eq!(p.outlier_indices, vec![2]);
        assert_eq!(p.non_outlier_indices, vec![0, 1]);
        assert_eq!(p.distances.len(), 3);
    }

    #[test]
    fn far_point_in_one_dimension() {
        let x = RealMatrix::from_fn(21, 1, |r, _| r as f64 / 10.0 - 1.0);
        let g = fit_gate(&x, 99.0).unwrap();
        let row = g.inspect(0, &[10.0]).unwrap();
        assert!(row.exceeds_threshold && row.beyond_neighbor && row.outlier);
        assert_eq!(row.neighbor_index, 20);
    }

    #[test]
    fn neighbor_examples() {
        let x = normal_matrix(4, 30, 3);
        let g = fit_gate(&x, 99.0).unwrap();
        assert_eq!(g.nearest_training_neighbor(&g.training_row(7)).unwrap(), (7, 0.0));

        let x = RealMatrix::from_column_slice(3, 1, &[0.0, 10.0, -2.0]);
        let g = fit_gate(&x, 99.0).unwrap();
        assert_eq!(g.nearest_training_neighbor(&[3.0]).unwrap(), (0, 3.0));
        // 5 is equidistant from 0 and 10
        assert_eq!(g.nearest_training_neighbor(&[5.0]).unwrap().0, 0);
        assert_eq!(g.nearest_training_neighbor(&[-1.0]).unwrap().0, 0);
    }

    fn random_invertible(rng: &mut ChaCha8Rng, d: usize) -> RealMatrix {
        loop {
            let a = RealMatrix::from_fn(d, d, |_, _| rng.random_range(-2.0..2.0));
            let sv = a.clone().singular_values();
            if sv.min() > 0.2 {
                return a;
            }
        }
    }

    #[test]
    fn distances_are_affine_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let train = normal_matrix(5, 200, 3);
        let test = normal_matrix(6, 20, 3) * 3.0;
        let base = fit_gate(&train, 99.0).unwrap().distances(&test).unwrap();
        for _ in 0..5 {
            let a = random_invertible(&mut rng, 3);
            let t = RealVector::from_fn(3, |_, _| rng.random_range(-5.0..5.0));
            let map = |m: &RealMatrix| {
                let mut out = m * a.transpose();
                for mut row in out.row_iter_mut() {
                    row += t.transpose();
                }
                out
            };
            let d = fit_gate(&map(&train), 99.0).unwrap().distances(&map(&test)).unwrap();
            for (x, y) in d.iter().zip(&base) {
                assert!((x - y).abs() < 1e-8);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn partition_is_complete_and_checked(seed in any::<u64>(), spread in 0.5f64..6.0) {
            let train = normal_matrix(seed, 80, 2);
            let test = normal_matrix(seed.wrapping_add(1), 40, 2) * spread;
            let g = fit_gate(&train, 95.0).unwrap();
            let p = classify(&g, &test).unwrap();
            let mut all: Vec<usize> = p.outlier_indices.iter().chain(&p.non_outlier_indices).copied().collect();
            all.sort();
            prop_assert_eq!(all, (0..40).collect::<Vec<_>>());
            for &i in &p.outlier_indices {
                let x: Vec<f64> = test.row(i).iter().copied().collect();
                prop_assert!(p.distances[i] > g.threshold_distance);
                let (nn, _) = g.nearest_training_neighbor(&x).unwrap();
                let dc = squared_distance(x.iter(), g.center.iter()).sqrt();
                let dn = squared_distance(g.training_row(nn).iter(), g.center.iter()).sqrt();
                prop_assert!(dc > dn);
            }
        }

        #[test]
        fn lowering_percentile_keeps_outliers(seed in any::<u64>()) {
            let train = normal_matrix(seed, 80, 3);
            let test = normal_matrix(seed.wrapping_add(7), 50, 3) * 2.5;
            let strict = classify(&fit_gate(&train, 99.0).unwrap(), &test).unwrap();
            let loose = classify(&fit_gate(&train, 90.0).unwrap(), &test).unwrap();
            for i in &strict.outlier_indices {
                prop_assert!(loose.outlier_indices.contains(i));
            }
        }
    }
}
