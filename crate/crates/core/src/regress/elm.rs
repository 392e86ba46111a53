use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ActivationKind;
use crate::error::{invalid, Error, Result};
use crate::numkernel::{ensure_finite_matrix, pinv_solve, RealMatrix, RealVector, DEFAULT_REL_TOL};
use crate::seed::rng_from_seed;

/// Ranges of the uniform distributions the hidden layer is drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HiddenInit {
    pub weight_low: f64,
    pub weight_high: f64,
    pub bias_low: f64,
    pub bias_high: f64,
}

impl Default for HiddenInit {
    fn default() -> Self {
        Self { weight_low: -1.0, weight_high: 1.0, bias_low: 0.0, bias_high: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ElmConfig {
    pub init: HiddenInit,
    /// Relative singular-value cutoff for the output-weight solve.
    pub rel_tol: f64,
}

impl Default for ElmConfig {
    fn default() -> Self {
        Self { init: HiddenInit::default(), rel_tol: DEFAULT_REL_TOL }
    }
}

/// A single-hidden-layer network with random fixed hidden weights and
/// least-squares output weights. No output bias.
#[derive(Debug, Clone, PartialEq)]
pub struct ElmModel {
    /// L x d
    pub hidden_weights: RealMatrix,
    pub hidden_biases: RealVector,
    /// L x m
    pub output_weights: RealMatrix,
    pub activation: ActivationKind,
    pub seed: u64,
}

impl ElmModel {
    pub fn node_count(&self) -> usize {
        self.hidden_weights.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.hidden_weights.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.output_weights.ncols()
    }

    /// Hidden-layer output matrix (N x L) for the given inputs.
    pub fn hidden_layer(&self, inputs: &RealMatrix) -> Result<RealMatrix> {
        if inputs.ncols() != self.input_dim() {
            return invalid(format!(
                "model expects {} inputs, got {}",
                self.input_dim(),
                inputs.ncols()
            ));
        }
        let mut h = inputs * self.hidden_weights.transpose();
        for (j, mut col) in h.column_iter_mut().enumerate() {
            let b = self.hidden_biases[j];
            col.apply(|z| *z = self.activation.apply(*z + b));
        }
        Ok(h)
    }
}

pub fn elm_train(
    inputs: &RealMatrix,
    targets: &RealMatrix,
    node_count: usize,
    activation: ActivationKind,
    seed: u64,
) -> Result<ElmModel> {
    elm_train_with(inputs, targets, node_count, activation, seed, &ElmConfig::default())
}

pub fn elm_train_with(
    inputs: &RealMatrix,
    targets: &RealMatrix,
    node_count: usize,
    activation: ActivationKind,
    seed: u64,
    config: &ElmConfig,
) -> Result<ElmModel> {
    let (n, d) = inputs.shape();
    if n == 0 || d == 0 {
        return invalid("elm_train requires non-empty inputs");
    }
    if node_count == 0 {
        return invalid("node_count must be at least 1");
    }
    if targets.nrows() != n {
        return invalid(format!("{n} input rows but {} target rows", targets.nrows()));
    }
    ensure_finite_matrix("inputs", inputs)?;

    let init = config.init;
    let mut rng = rng_from_seed(seed);
    // weights first, row by row, then biases
    let hidden_weights = RealMatrix::from_row_iterator(
        node_count,
        d,
        (0..node_count * d).map(|_| rng.random_range(init.weight_low..=init.weight_high)),
    );
    let hidden_biases = RealVector::from_iterator(
        node_count,
        (0..node_count).map(|_| rng.random_range(init.bias_low..=init.bias_high)),
    );

    let mut model = ElmModel {
        hidden_weights,
        hidden_biases,
        output_weights: RealMatrix::zeros(node_count, targets.ncols()),
        activation,
        seed,
    };
    let h = model.hidden_layer(inputs)?;
    if h.iter().any(|v| !v.is_finite()) {
        return Err(Error::Internal(format!(
            "non-finite hidden-layer output ({activation}, L={node_count}, seed={seed})"
        )));
    }
    model.output_weights = pinv_solve(&h, targets, config.rel_tol)?;
    Ok(model)
}

pub fn elm_predict(model: &ElmModel, inputs: &RealMatrix) -> Result<RealMatrix> {
    ensure_finite_matrix("inputs", inputs)?;
    let h = model.hidden_layer(inputs)?;
    Ok(h * &model.output_weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::ChaCha8Rng;
    use rand::SeedableRng;

    fn random_inputs(seed: u64, n: usize, d: usize) -> RealMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        RealMatrix::from_fn(n, d, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn exactly_determined_single_sample() {
        for act in ActivationKind::ALL {
            let x = RealMatrix::from_row_slice(1, 2, &[0.3, -0.4]);
            let y = RealMatrix::from_element(1, 1, 2.5);
            let m = elm_train(&x, &y, 1, act, 3).unwrap();
            let p = elm_predict(&m, &x).unwrap();
            assert!((p[0] - 2.5).abs() < 1e-12, "{act}");
        }
    }

    #[test]
    fn recovers_planted_output_weights() {
        let x = random_inputs(1, 80, 3);
        let b_true = RealMatrix::from_column_slice(5, 1, &[1.0, -2.0, 0.5, 3.0, -1.5]);
        for act in ActivationKind::ALL {
            // the same seed draws the same hidden layer regardless of targets
            let probe = elm_train(&x, &RealMatrix::zeros(80, 1), 5, act, 42).unwrap();
            let h = probe.hidden_layer(&x).unwrap();
            let sv = h.clone().singular_values();
            assert!(sv.max() / sv.min() < 1e6, "{act}: ill-conditioned probe");
            let m = elm_train(&x, &(&h * &b_true), 5, act, 42).unwrap();
            assert_eq!(m.hidden_weights, probe.hidden_weights);
            let err = (&m.output_weights - &b_true).abs().max();
            assert!(err < 1e-8, "{act}: {err}");
        }
    }

    #[test]
    fn same_seed_same_model() {
        let x = random_inputs(2, 30, 2);
        let y = RealMatrix::from_fn(30, 1, |r, _| x[(r, 0)] * x[(r, 1)]);
        for act in ActivationKind::ALL {
            let a = elm_train(&x, &y, 10, act, 9).unwrap();
            let b = elm_train(&x, &y, 10, act, 9).unwrap();
            assert_eq!(a, b);
            let c = elm_train(&x, &y, 10, act, 10).unwrap();
            assert_ne!(a.hidden_weights, c.hidden_weights);
        }
    }

    #[test]
    fn hidden_draws_respect_ranges() {
        let x = random_inputs(3, 5, 4);
        let m = elm_train(&x, &RealMatrix::zeros(5, 1), 50, ActivationKind::Sigmoid, 1).unwrap();
        assert!(m.hidden_weights.iter().all(|w| (-1.0..=1.0).contains(w)));
        assert!(m.hidden_biases.iter().all(|b| (0.0..=1.0).contains(b)));
    }

    #[test]
    fn zero_output_weights_predict_zero() {
        let x = random_inputs(4, 10, 2);
        let mut m = elm_train(&x, &RealMatrix::zeros(10, 1), 5, ActivationKind::Softplus, 1).unwrap();
        m.output_weights.fill(0.0);
        let p = elm_predict(&m, &random_inputs(5, 7, 2)).unwrap();
        assert!(p.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dimension_errors() {
        let x = random_inputs(4, 10, 2);
        assert!(elm_train(&x, &RealMatrix::zeros(9, 1), 5, ActivationKind::Sigmoid, 1).is_err());
        assert!(elm_train(&x, &RealMatrix::zeros(10, 1), 0, ActivationKind::Sigmoid, 1).is_err());
        let m = elm_train(&x, &RealMatrix::zeros(10, 1), 5, ActivationKind::Sigmoid, 1).unwrap();
        assert!(elm_predict(&m, &RealMatrix::zeros(3, 3)).is_err());
    }

    #[test]
    fn training_fit_beats_perturbed_output_weights() {
        let x = random_inputs(6, 40, 2);
        let y = RealMatrix::from_fn(40, 1, |r, _| (3.0 * x[(r, 0)]).sin() + x[(r, 1)].powi(2));
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for act in ActivationKind::ALL {
            let m = elm_train(&x, &y, 12, act, 77).unwrap();
            let h = m.hidden_layer(&x).unwrap();
            let best = (&h * &m.output_weights - &y).norm_squared();
            for _ in 0..50 {
                let delta = RealMatrix::from_fn(12, 1, |_, _| rng.random_range(-0.1..0.1));
                let worse = (&h * (&m.output_weights + delta) - &y).norm_squared();
                assert!(best <= worse + 1e-9);
            }
        }
    }

    #[test]
    fn sigmoid_prediction_saturates_along_a_ray() {
        let x = random_inputs(7, 60, 1);
        let y = RealMatrix::from_fn(60, 1, |r, _| x[(r, 0)].powi(2));
        let m = elm_train(&x, &y, 6, ActivationKind::Sigmoid, 5).unwrap();
        let far = RealMatrix::from_column_slice(3, 1, &[1e4, 1e5, 1e6]);
        let p = elm_predict(&m, &far).unwrap();
        assert!(p.iter().all(|v| v.is_finite()));
        assert!((p[1] - p[2]).abs() <= 1e-9 * m.output_weights.abs().sum());
    }
}
