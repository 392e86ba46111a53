use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::numkernel::{ensure_finite_matrix, ensure_finite_slice, pinv_solve, RealMatrix, RealVector, DEFAULT_REL_TOL};

/// Ordinary least-squares fit `y = coefficients . x + intercept`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
}

/// Least squares on the intercept-augmented design; minimum-norm when the
/// design is rank deficient.
pub fn lr_fit(inputs: &RealMatrix, targets: &[f64]) -> Result<LinearModel> {
    let (n, d) = inputs.shape();
    if n == 0 {
        return invalid("lr_fit requires at least one row");
    }
    if targets.len() != n {
        return invalid(format!("{n} input rows but {} targets", targets.len()));
    }
    ensure_finite_matrix("inputs", inputs)?;
    ensure_finite_slice("targets", targets)?;
    let design = RealMatrix::from_fn(n, d + 1, |r, c| if c < d { inputs[(r, c)] } else { 1.0 });
    let y = RealMatrix::from_column_slice(n, 1, targets);
    let beta = pinv_solve(&design, &y, DEFAULT_REL_TOL)?;
    Ok(LinearModel {
        coefficients: (0..d).map(|j| beta[(j, 0)]).collect(),
        intercept: beta[(d, 0)],
    })
}

pub fn lr_predict(model: &LinearModel, inputs: &RealMatrix) -> Result<RealVector> {
    if inputs.ncols() != model.coefficients.len() {
        return invalid(format!(
            "linear model expects {} inputs, got {}",
            model.coefficients.len(),
            inputs.ncols()
        ));
    }
    Ok(RealVector::from_iterator(
        inputs.nrows(),
        inputs.row_iter().map(|row| {
            row.iter().zip(&model.coefficients).map(|(x, b)| x * b).sum::<f64>() + model.intercept
        }),
    ))
}
