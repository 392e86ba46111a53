//! Input scaling, target transforms, one-hot encoding and the r_outl
//! extrapolation-severity index.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numkernel::{ensure_finite_matrix, ensure_finite_slice, RealMatrix, RealVector};

/// Per-column min-max scaler mapping the training range onto `[-1, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub x_min: Vec<f64>,
    pub x_max: Vec<f64>,
}

impl MinMaxScaler {
    pub fn dim(&self) -> usize {
        self.x_min.len()
    }

    /// Columns whose training minimum equals the maximum. They scale to 0.
    pub fn is_constant(&self, col: usize) -> bool {
        self.x_min[col] == self.x_max[col]
    }

    pub fn constant_columns(&self) -> Vec<usize> {
        (0..self.dim()).filter(|&c| self.is_constant(c)).collect()
    }

    /// Maps scaled values back to raw units. Constant columns return their
    /// training value.
    pub fn invert(&self, scaled: &RealMatrix) -> Result<RealMatrix> {
        self.check_dim(scaled)?;
        Ok(RealMatrix::from_fn(scaled.nrows(), scaled.ncols(), |r, c| {
            let (lo, hi) = (self.x_min[c], self.x_max[c]);
            if lo == hi {
                lo
            } else {
                (scaled[(r, c)] + 1.0) * 0.5 * (hi - lo) + lo
            }
        }))
    }

    fn check_dim(&self, m: &RealMatrix) -> Result<()> {
        if m.ncols() != self.dim() {
            return invalid(format!(
                "scaler fitted on {} columns, input has {}",
                self.dim(),
                m.ncols()
            ));
        }
        Ok(())
    }
}

pub fn fit_minmax(train_inputs: &RealMatrix) -> Result<MinMaxScaler> {
    if train_inputs.nrows() == 0 || train_inputs.ncols() == 0 {
        return invalid("fit_minmax requires a non-empty matrix");
    }
    ensure_finite_matrix("train_inputs", train_inputs)?;
    let x_min = train_inputs.column_iter().map(|c| c.min()).collect();
    let x_max = train_inputs.column_iter().map(|c| c.max()).collect();
    Ok(MinMaxScaler { x_min, x_max })
}

/// `x' = 2 (x - min) / (max - min) - 1`, without clamping.
pub fn apply_minmax(scaler: &MinMaxScaler, inputs: &RealMatrix) -> Result<RealMatrix> {
    scaler.check_dim(inputs)?;
    ensure_finite_matrix("inputs", inputs)?;
    Ok(RealMatrix::from_fn(inputs.nrows(), inputs.ncols(), |r, c| {
        let (lo, hi) = (scaler.x_min[c], scaler.x_max[c]);
        if lo == hi {
            0.0
        } else {
            2.0 * (inputs[(r, c)] - lo) / (hi - lo) - 1.0
        }
    }))
}

/// Largest absolute scaled value over all columns of the test inputs.
pub fn r_outl(scaled_test_inputs: &RealMatrix) -> Result<f64> {
    let cols: Vec<usize> = (0..scaled_test_inputs.ncols()).collect();
    r_outl_columns(scaled_test_inputs, &cols)
}

/// [`r_outl`] restricted to the given columns (e.g. continuous inputs only).
pub fn r_outl_columns(scaled_test_inputs: &RealMatrix, columns: &[usize]) -> Result<f64> {
    if scaled_test_inputs.nrows() == 0 || scaled_test_inputs.ncols() == 0 {
        return invalid("r_outl requires a non-empty matrix");
    }
    ensure_finite_matrix("scaled_test_inputs", scaled_test_inputs)?;
    let mut worst = 0.0_f64;
    for &c in columns {
        if c >= scaled_test_inputs.ncols() {
            return invalid(format!("column {c} out of range"));
        }
        let col = scaled_test_inputs.column(c);
        worst = worst.max(col.max().abs()).max(col.min().abs());
    }
    Ok(worst)
}

/// Closed-form r_outl for a column with training range `[a, b]` whose most
/// extreme test value is `c`: `(2c - a - b) / (b - a)`.
pub fn r_outl_estimate(a: f64, b: f64, c: f64) -> Result<f64> {
    ensure_finite_slice("r_outl_estimate arguments", &[a, b, c])?;
    if a >= b {
        return invalid(format!("training minimum {a} must be below maximum {b}"));
    }
    Ok((2.0 * c - a - b) / (b - a))
}

/// The `a = 0` approximation `2c/b - 1`, accurate when `a` is much smaller than `b`.
pub fn r_outl_estimate_approx(b: f64, c: f64) -> Result<f64> {
    ensure_finite_slice("r_outl_estimate_approx arguments", &[b, c])?;
    if b <= 0.0 {
        return invalid(format!("training maximum must be positive, got {b}"));
    }
    // 2c/b - 1, written so that it agrees bitwise with the a = 0 case
    Ok((2.0 * c - b) / b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetTransform {
    #[default]
    None,
    NaturalLog,
    Log10,
    FourthRoot,
}

pub fn transform_target(values: &[f64], transform: TargetTransform) -> Result<Vec<f64>> {
    ensure_finite_slice("target", values)?;
    values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let ok = match transform {
                TargetTransform::None => true,
                TargetTransform::NaturalLog | TargetTransform::Log10 => v > 0.0,
                TargetTransform::FourthRoot => v >= 0.0,
            };
            if !ok {
                return invalid(format!(
                    "value {v} at index {i} is outside the domain of the {transform:?} transform"
                ));
            }
            Ok(match transform {
                TargetTransform::None => v,
                TargetTransform::NaturalLog => v.ln(),
                TargetTransform::Log10 => v.log10(),
                TargetTransform::FourthRoot => v.sqrt().sqrt(),
            })
        })
        .collect()
}

pub fn inverse_transform_target(values: &[f64], transform: TargetTransform) -> Vec<f64> {
    values
        .iter()
        .map(|&v| match transform {
            TargetTransform::None => v,
            TargetTransform::NaturalLog => v.exp(),
            TargetTransform::Log10 => 10f64.powf(v),
            // predictions can go negative; keep the sign so the map stays monotone
            TargetTransform::FourthRoot => v.signum() * v.powi(4),
        })
        .collect()
}

/// A block of indicator columns encoding one categorical input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneHotGroup {
    pub column_indices: Vec<usize>,
    pub category_labels: Vec<String>,
}

impl OneHotGroup {
    /// Index of the active category in `row`, if the block is a valid indicator.
    pub fn category_of(&self, row: &[f64]) -> Option<usize> {
        let mut hit = None;
        for (k, &c) in self.column_indices.iter().enumerate() {
            match row.get(c).copied() {
                Some(1.0) => {
                    if hit.is_some() {
                        return None;
                    }
                    hit = Some(k);
                }
                Some(0.0) => {}
                _ => return None,
            }
        }
        hit
    }
}

pub fn one_hot_encode<S: AsRef<str>>(labels: &[S], category_labels: &[S]) -> Result<RealMatrix> {
    if category_labels.is_empty() {
        return invalid("one-hot encoding needs at least one category");
    }
    let mut m = RealMatrix::zeros(labels.len(), category_labels.len());
    for (r, label) in labels.iter().enumerate() {
        let label = label.as_ref();
        let j = category_labels
            .iter()
            .position(|c| c.as_ref() == label)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown category label '{label}'")))?;
        m[(r, j)] = 1.0;
    }
    Ok(m)
}

pub fn clip_nonnegative(predictions: &RealVector) -> RealVector {
    predictions.map(|v| v.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn col(v: &[f64]) -> RealMatrix {
        RealMatrix::from_column_slice(v.len(), 1, v)
    }

    #[test]
    fn fit_examples() {
        let s = fit_minmax(&col(&[2.0, 4.0, 6.0])).unwrap();
        assert_eq!((s.x_min[0], s.x_max[0]), (2.0, 6.0));

        let s = fit_minmax(&RealMatrix::from_row_slice(1, 2, &[3.0, 4.0])).unwrap();
        assert_eq!(s.constant_columns(), vec![0, 1]);

        let s = fit_minmax(&RealMatrix::from_row_slice(2, 2, &[0.0, -1.0, 10.0, 1.0])).unwrap();
        assert_eq!(s.x_min, vec![0.0, -1.0]);
        assert_eq!(s.x_max, vec![10.0, 1.0]);

        assert!(fit_minmax(&RealMatrix::zeros(0, 2)).is_err());
    }

    #[test]
    fn apply_examples() {
        let s = MinMaxScaler { x_min: vec![0.0], x_max: vec![51.1] };
        let out = apply_minmax(&s, &col(&[0.0, 51.1, 25.55, 223.0])).unwrap();
        assert_eq!(out[0], -1.0);
        assert_eq!(out[1], 1.0);
        assert!(out[2].abs() < 1e-15);
        assert!((out[3] - 7.727984).abs() < 1e-5);

        let s = MinMaxScaler { x_min: vec![3.0], x_max: vec![3.0] };
        assert_eq!(apply_minmax(&s, &col(&[-5.0, 3.0, 9.0])).unwrap(), col(&[0.0, 0.0, 0.0]));

        let s = MinMaxScaler { x_min: vec![0.0, 0.0], x_max: vec![1.0, 1.0] };
        assert!(apply_minmax(&s, &col(&[1.0])).is_err());
    }

    #[test]
    fn r_outl_examples() {
        let s = fit_minmax(&col(&[0.0, 10.0, 51.1])).unwrap();
        let test = apply_minmax(&s, &col(&[3.0, 223.0])).unwrap();
        assert!((r_outl(&test).unwrap() - 7.73).abs() < 0.01);

        let s = fit_minmax(&col(&[0.0, 64.0])).unwrap();
        let test = apply_minmax(&s, &col(&[231.0, 5.0])).unwrap();
        assert!((r_outl(&test).unwrap() - 6.22).abs() < 0.01);

        let test = apply_minmax(&s, &col(&[1.0, 63.0])).unwrap();
        assert!(r_outl(&test).unwrap() <= 1.0);

        assert!(r_outl(&RealMatrix::zeros(0, 1)).is_err());
    }

    #[test]
    fn r_outl_columns_skips_excluded() {
        let m = RealMatrix::from_row_slice(1, 2, &[0.5, 9.0]);
        assert_eq!(r_outl_columns(&m, &[0]).unwrap(), 0.5);
        assert!(r_outl_columns(&m, &[2]).is_err());
    }

    #[test]
    fn estimate_examples() {
        assert!((r_outl_estimate(0.0, 51.1, 223.0).unwrap() - 7.728).abs() < 1e-3);
        assert_eq!(r_outl_estimate(-2.0, 5.0, 5.0).unwrap(), 1.0);
        assert!((r_outl_estimate(0.0, 64.0, 231.0).unwrap() - 6.219).abs() < 1e-3);
        assert!(r_outl_estimate(1.0, 1.0, 2.0).is_err());
        assert!(r_outl_estimate(2.0, 1.0, 2.0).is_err());
    }

    #[test]
    fn approx_variant_matches_for_zero_minimum() {
        for &(b, c) in &[(51.1, 223.0), (64.0, 231.0), (1.0, 1.0), (3.0, 100.0)] {
            assert_eq!(r_outl_estimate(0.0, b, c).unwrap(), r_outl_estimate_approx(b, c).unwrap());
        }
        // a = 0.01 b: relative error below 2%
        let (b, c) = (50.0, 120.0);
        let exact = r_outl_estimate(0.01 * b, b, c).unwrap();
        let approx = r_outl_estimate_approx(b, c).unwrap();
        assert!(((approx - exact) / exact).abs() < 0.02);
    }

    #[test]
    fn transform_examples() {
        let v = transform_target(&[1.0, std::f64::consts::E], TargetTransform::NaturalLog).unwrap();
        assert_eq!(v[0], 0.0);
        assert!((v[1] - 1.0).abs() < 1e-15);
        assert_eq!(transform_target(&[16.0], TargetTransform::FourthRoot).unwrap(), vec![2.0]);
        assert_eq!(transform_target(&[100.0], TargetTransform::Log10).unwrap(), vec![2.0]);

        let err = transform_target(&[1.0, 0.0], TargetTransform::NaturalLog).unwrap_err();
        assert!(err.to_string().contains("index 1"));
        assert!(transform_target(&[-1.0], TargetTransform::FourthRoot).is_err());
        assert!(transform_target(&[0.0], TargetTransform::FourthRoot).is_ok());

        assert_eq!(inverse_transform_target(&[0.0], TargetTransform::NaturalLog), vec![1.0]);
        assert_eq!(inverse_transform_target(&[2.0], TargetTransform::FourthRoot), vec![16.0]);
    }

    #[test]
    fn one_hot_examples() {
        let cats = ["NW", "NE", "S", "CV"];
        let m = one_hot_encode(&["NE", "S"], &cats).unwrap();
        assert_eq!(m.row(0).iter().copied().collect::<Vec<_>>(), vec![0.0, 1.0, 0.0, 0.0]);
        assert_eq!(m.row(1).iter().copied().collect::<Vec<_>>(), vec![0.0, 0.0, 1.0, 0.0]);

        let m = one_hot_encode(&["a", "a", "a"], &["a"]).unwrap();
        assert_eq!(m, RealMatrix::from_element(3, 1, 1.0));

        let err = one_hot_encode(&["SE"], &cats).unwrap_err();
        assert!(err.to_string().contains("SE"));
    }

    #[test]
    fn category_lookup() {
        let g = OneHotGroup {
            column_indices: vec![1, 2, 3],
            category_labels: vec!["a".into(), "b".into(), "c".into()],
        };
        assert_eq!(g.category_of(&[9.0, 0.0, 0.0, 1.0]), Some(2));
        assert_eq!(g.category_of(&[9.0, 1.0, 0.0, 1.0]), None);
        assert_eq!(g.category_of(&[9.0, 0.0, 0.0, 0.0]), None);
        assert_eq!(g.category_of(&[9.0, 0.5, 0.5, 0.0]), None);
    }

    #[test]
    fn clip_examples() {
        let v = RealVector::from_vec(vec![-3.0, 0.0, 5.0]);
        assert_eq!(clip_nonnegative(&v).as_slice(), &[0.0, 0.0, 5.0]);
        let v = RealVector::from_vec(vec![-3.0, -0.1]);
        assert_eq!(clip_nonnegative(&v).as_slice(), &[0.0, 0.0]);
    }

    proptest! {
        #[test]
        fn minmax_round_trip(rows in prop::collection::vec((-1e3f64..1e3, -50.0f64..50.0), 2..20),
                             probe in prop::collection::vec((-1e4f64..1e4, -500.0f64..500.0), 1..10)) {
            let train = RealMatrix::from_fn(rows.len(), 2, |r, c| if c == 0 { rows[r].0 } else { rows[r].1 });
            let s = fit_minmax(&train).unwrap();
            prop_assume!(s.constant_columns().is_empty());
            let x = RealMatrix::from_fn(probe.len(), 2, |r, c| if c == 0 { probe[r].0 } else { probe[r].1 });
            let back = s.invert(&apply_minmax(&s, &x).unwrap()).unwrap();
            for r in 0..x.nrows() {
                for c in 0..2 {
                    // relative to the magnitudes involved in the column
                    let scale = x[(r, c)].abs().max(s.x_min[c].abs()).max(s.x_max[c].abs());
                    prop_assert!((back[(r, c)] - x[(r, c)]).abs() <= 1e-12 * scale);
                }
            }
        }

        #[test]
        fn single_column_matches_closed_form(a in -100.0f64..100.0, width in 0.1f64..100.0, over in 0.0f64..500.0) {
            let b = a + width;
            let c = b + over;
            let s = fit_minmax(&col(&[a, (a + b) / 2.0, b])).unwrap();
            let r = r_outl(&apply_minmax(&s, &col(&[c])).unwrap()).unwrap();
            let e = r_outl_estimate(a, b, c).unwrap();
            prop_assert!((r - e).abs() <= 1e-10 * e.abs().max(1.0));
        }

        #[test]
        fn one_hot_rows_sum_to_one(idx in prop::collection::vec(0usize..4, 1..30)) {
            let cats = ["w", "x", "y", "z"];
            let labels: Vec<&str> = idx.iter().map(|&i| cats[i]).collect();
            let m = one_hot_encode(&labels, &cats).unwrap();
            for r in 0..m.nrows() {
                prop_assert_eq!(m.row(r).sum(), 1.0);
            }
        }

        #[test]
        fn clip_is_idempotent(v in prop::collection::vec(-10.0f64..10.0, 0..20)) {
            let v = RealVector::from_vec(v);
            let once = clip_nonnegative(&v);
            prop_assert_eq!(clip_nonnegative(&once), once);
        }

        #[test]
        fn transforms_round_trip(v in prop::collection::vec(1e-6f64..1e6, 1..20)) {
            for t in [TargetTransform::None, TargetTransform::NaturalLog, TargetTransform::Log10, TargetTransform::FourthRoot] {
                let back = inverse_transform_target(&transform_target(&v, t).unwrap(), t);
                for (a, b) in back.iter().zip(&v) {
                    prop_assert!(((a - b) / b).abs() <= 1e-12);
                }
            }
        }
    }
}
