//! One-dimensional toy problem: a weakly quadratic signal in heavy noise,
//! used to show how ensemble members diverge outside the training range.

use rand_distr::{Distribution, Normal, StandardNormal};
use serde::Serialize;

use crate::error::Result;
use crate::extrapolate::boundary_extrapolate_1d;
use crate::numkernel::RealMatrix;
use crate::preprocess::{apply_minmax, fit_minmax};
use crate::regress::{cross_validate, ensemble_predict, ensemble_train, lr_fit, lr_predict, ActivationKind, CvConfig, ElmConfig, DEFAULT_MEMBERS};
use crate::seed::{derive_seed, rng_from_seed};

pub const TOY_TRAIN_SIZE: usize = 100;
pub const DEFAULT_FD_STEP: f64 = 1e-2;

/// `y = x + 0.2 x^2`
pub fn toy_signal(x: f64) -> f64 {
    x + 0.2 * x * x
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ToyData {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

fn sample_std(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Standard-normal inputs; noise with twice the sample standard deviation
/// of the signal unless `noise_free`.
pub fn toy_generate(seed: u64, n_train: usize, noise_free: bool) -> ToyData {
    assert!(n_train >= 2, "toy data needs at least two points");
    let mut rng = rng_from_seed(seed);
    let x: Vec<f64> = (0..n_train).map(|_| StandardNormal.sample(&mut rng)).collect();
    let signal: Vec<f64> = x.iter().map(|&v| toy_signal(v)).collect();
    let y = if noise_free {
        signal
    } else {
        let noise = Normal::new(0.0, 2.0 * sample_std(&signal)).expect("finite positive std");
        signal.iter().map(|s| s + noise.sample(&mut rng)).collect()
    };
    ToyData { x, y }
}

/// Plot-ready curves on an evaluation grid.
#[derive(Debug, Clone, Serialize)]
pub struct ToyTable {
    pub activation: ActivationKind,
    pub node_count: usize,
    pub train_min: f64,
    pub train_max: f64,
    pub train: ToyData,
    pub grid: Vec<f64>,
    pub truth: Vec<f64>,
    pub lr: Vec<f64>,
    /// members[k][i]: member k at grid point i
    pub members: Vec<Vec<f64>>,
    pub ensemble_mean: Vec<f64>,
    pub boundary_extrapolation: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ToyOptions {
    pub n_train: usize,
    pub members: usize,
    pub grid_min: f64,
    pub grid_max: f64,
    pub grid_step: f64,
    pub cv: CvConfig,
    pub fd_step: f64,
}

impl Default for ToyOptions {
    fn default() -> Self {
        Self {
            n_train: TOY_TRAIN_SIZE,
            members: DEFAULT_MEMBERS,
            grid_min: -6.0,
            grid_max: 6.0,
            grid_step: 0.05,
            cv: CvConfig::default(),
            fd_step: DEFAULT_FD_STEP,
        }
    }
}

impl ToyOptions {
    pub fn grid(&self) -> Vec<f64> {
        let steps = ((self.grid_max - self.grid_min) / self.grid_step).round() as usize;
        (0..=steps).map(|i| self.grid_min + i as f64 * self.grid_step).collect()
    }
}

pub fn toy_demo(seed: u64, activation: ActivationKind) -> Result<ToyTable> {
    toy_demo_with(seed, activation, &ToyOptions::default())
}

pub fn toy_demo_with(seed: u64, activation: ActivationKind, opts: &ToyOptions) -> Result<ToyTable> {
    let train = toy_generate(derive_seed(seed, &[0]), opts.n_train, false);
    let x_raw = RealMatrix::from_column_slice(train.x.len(), 1, &train.x);
    let y = RealMatrix::from_column_slice(train.y.len(), 1, &train.y);
    let scaler = fit_minmax(&x_raw)?;
    let x = apply_minmax(&scaler, &x_raw)?;

    let cv = CvConfig { seed: derive_seed(seed, &[1]), ..opts.cv.clone() };
    let node_count = cross_validate(&x, &y, activation, &cv, &ElmConfig::default())?.selected;
    let ensemble = ensemble_train(&x, &y, node_count, activation, opts.members, derive_seed(seed, &[2]))?;
    let linear = lr_fit(&x, &train.y)?;

    let grid = opts.grid();
    let g_raw = RealMatrix::from_column_slice(grid.len(), 1, &grid);
    let g = apply_minmax(&scaler, &g_raw)?;
    let members: Vec<Vec<f64>> = ensemble
        .member_predictions(&g)?
        .into_iter()
        .map(|p| p.column(0).iter().copied().collect())
        .collect();
    let ensemble_mean: Vec<f64> = ensemble_predict(&ensemble, &g)?.column(0).iter().copied().collect();

    // the scaler maps the training range onto [-1, 1]
    let surface = |t: f64| {
        ensemble
            .predict_point(&[t])
            .expect("one-dimensional input matches the ensemble")
    };
    let boundary_extrapolation = g
        .iter()
        .map(|&t| boundary_extrapolate_1d(&surface, -1.0, 1.0, opts.fd_step, t))
        .collect::<Result<Vec<f64>>>()?;

    Ok(ToyTable {
        activation,
        node_count,
        train_min: scaler.x_min[0],
        train_max: scaler.x_max[0],
        truth: grid.iter().map(|&v| toy_signal(v)).collect(),
        lr: lr_predict(&linear, &g)?.iter().copied().collect(),
        grid,
        members,
        ensemble_mean,
        boundary_extrapolation,
        train,
    })
}

impl ToyTable {
    /// Spread (sample standard deviation) of member values at grid index `i`.
    pub fn member_spread(&self, i: usize) -> f64 {
        let v: Vec<f64> = self.members.iter().map(|m| m[i]).collect();
        sample_std(&v)
    }

    pub fn grid_index(&self, x: f64) -> usize {
        self.grid
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - x).abs().total_cmp(&(b.1 - x).abs()))
            .map(|(i, _)| i)
            .unwrap_or(0)
    }

    /// CSV with one column per curve.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["x".to_string(), "truth".into(), "lr".into(), "ensemble_mean".into(), "boundary_extrapolation".into()];
        header.extend((0..self.members.len()).map(|k| format!("member_{k}")));
        w.write_record(&header)?;
        for i in 0..self.grid.len() {
            let mut row = vec![
                self.grid[i].to_string(),
                self.truth[i].to_string(),
                self.lr[i].to_string(),
                self.ensemble_mean[i].to_string(),
                self.boundary_extrapolation[i].to_string(),
            ];
            row.extend(self.members.iter().map(|m| m[i].to_string()));
            w.write_record(&row)?;
        }
        let bytes = w.into_inner().map_err(|e| crate::Error::Internal(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn signal_values() {
        assert_eq!(toy_signal(0.0), 0.0);
        assert_eq!(toy_signal(1.0), 1.2);
        assert_eq!(toy_signal(-1.0), -0.8);
        assert!((toy_signal(2.0) - 2.8).abs() < 1e-15);
    }

    #[test]
    fn generation_is_deterministic() {
        assert_eq!(toy_generate(3, 50, false), toy_generate(3, 50, false));
        assert_ne!(toy_generate(3, 50, false), toy_generate(4, 50, false));
        let clean = toy_generate(3, 50, true);
        for (x, y) in clean.x.iter().zip(&clean.y) {
            assert_eq!(*y, toy_signal(*x));
        }
    }

    #[test]
    fn noise_level_is_twice_signal_spread() {
        let d = toy_generate(11, 20_000, false);
        let signal: Vec<f64> = d.x.iter().map(|&v| toy_signal(v)).collect();
        let noise: Vec<f64> = d.y.iter().zip(&signal).map(|(y, s)| y - s).collect();
        let ratio = sample_std(&noise) / sample_std(&signal);
        assert!((ratio - 2.0).abs() < 0.05, "ratio {ratio}");
    }

    #[test]
    fn demo_columns() {
        let opts = ToyOptions { members: 10, ..Default::default() };
        let t = toy_demo_with(5, ActivationKind::Sigmoid, &opts).unwrap();
        assert_eq!(t.grid.len(), 241);
        let i2 = t.grid_index(2.0);
        assert!((t.truth[i2] - 2.8).abs() < 1e-12);
        for i in 0..t.grid.len() {
            let mean = t.members.iter().map(|m| m[i]).sum::<f64>() / t.members.len() as f64;
            assert!((mean - t.ensemble_mean[i]).abs() <= 1e-9 * mean.abs().max(1.0));
            let x = t.grid[i];
            if x >= t.train_min && x <= t.train_max {
                assert_eq!(t.boundary_extrapolation[i], t.ensemble_mean[i]);
            }
        }
        let csv = t.to_csv().unwrap();
        assert_eq!(csv.lines().count(), 242);
    }
}
