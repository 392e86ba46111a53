//! Dense linear algebra and order statistics.
//!
//! Matrices are `nalgebra` dense matrices of `f64`. Every public entry point
//! rejects non-finite input.

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Result};

pub type RealMatrix = DMatrix<f64>;
pub type RealVector = DVector<f64>;

/// Default relative singular-value cutoff for [`pinv_solve`].
pub const DEFAULT_REL_TOL: f64 = 1e-10;

pub(crate) fn ensure_finite_matrix(name: &str, m: &RealMatrix) -> Result<()> {
    if let Some(pos) = m.iter().position(|v| !v.is_finite()) {
        // column-major storage
        let (r, c) = (pos % m.nrows(), pos / m.nrows());
        return invalid(format!("{name} has a non-finite entry at ({r}, {c})"));
    }
    Ok(())
}

pub(crate) fn ensure_finite_slice(name: &str, v: &[f64]) -> Result<()> {
    if let Some(i) = v.iter().position(|x| !x.is_finite()) {
        return invalid(format!("{name} has a non-finite entry at index {i}"));
    }
    Ok(())
}

/// Minimum-norm least-squares solution of `design * B = targets`.
///
/// Computed through the singular value decomposition of `design`; singular
/// values below `rel_tol` times the largest one are treated as zero.
pub fn pinv_solve(design: &RealMatrix, targets: &RealMatrix, rel_tol: f64) -> Result<RealMatrix> {
    let (n, l) = design.shape();
    if n == 0 || l == 0 {
        return invalid("design matrix must be non-empty");
    }
    if targets.ncols() == 0 {
        return invalid("targets must have at least one column");
    }
    if targets.nrows() != n {
        return invalid(format!(
            "design has {n} rows but targets have {}",
            targets.nrows()
        ));
    }
    if !(rel_tol > 0.0) || !rel_tol.is_finite() {
        return invalid(format!("rel_tol must be positive, got {rel_tol}"));
    }
    ensure_finite_matrix("design", design)?;
    ensure_finite_matrix("targets", targets)?;

    let svd = design.clone().svd(true, true);
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let s = &svd.singular_values;
    let s_max = s.iter().cloned().fold(0.0_f64, f64::max);
    let cutoff = rel_tol * s_max;

    // B = V * diag(1/s) * U^T * Y over the retained singular triplets.
    let mut projected = u.transpose() * targets;
    for (k, &sk) in s.iter().enumerate() {
        let scale = if sk > cutoff && sk > 0.0 { 1.0 / sk } else { 0.0 };
        projected.row_mut(k).scale_mut(scale);
    }
    Ok(v_t.transpose() * projected)
}

/// Column-wise arithmetic mean.
pub fn sample_mean(data: &RealMatrix) -> Result<RealVector> {
    if data.nrows() == 0 || data.ncols() == 0 {
        return invalid("sample_mean requires a non-empty matrix");
    }
    ensure_finite_matrix("data", data)?;
    let n = data.nrows() as f64;
    Ok(RealVector::from_iterator(
        data.ncols(),
        data.column_iter().map(|c| c.sum() / n),
    ))
}

/// Unbiased sample covariance (divisor `N - 1`). The result is symmetric
/// bit for bit.
pub fn sample_covariance(data: &RealMatrix) -> Result<RealMatrix> {
    let (n, d) = data.shape();
    if n < 2 {
        return invalid(format!("sample_covariance requires at least 2 rows, got {n}"));
    }
    if d == 0 {
        return invalid("sample_covariance requires at least one column");
    }
    let mean = sample_mean(data)?;
    let mut centered = data.clone();
    for (j, mut col) in centered.column_iter_mut().enumerate() {
        col.add_scalar_mut(-mean[j]);
    }
    let mut cov = RealMatrix::zeros(d, d);
    for i in 0..d {
        for j in i..d {
            let v = centered.column(i).dot(&centered.column(j)) / (n - 1) as f64;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    Ok(cov)
}

/// Percentile by linear interpolation between order statistics at
/// position `q/100 * (n-1)` of the sorted values.
pub fn percentile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return invalid("percentile of an empty set");
    }
    if !(0.0..=100.0).contains(&q) {
        return invalid(format!("percentile q must lie in [0, 100], got {q}"));
    }
    ensure_finite_slice("values", values)?;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(percentile_sorted(&sorted, q))
}

pub(crate) fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        return sorted[lo];
    }
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Median of a slice; the midpoint of the two middle values for even counts.
pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return invalid("median of an empty set");
    }
    ensure_finite_slice("values", values)?;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(median_sorted(&sorted))
}

pub(crate) fn median_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Per-column median.
pub fn columnwise_median(data: &RealMatrix) -> Result<RealVector> {
    if data.nrows() == 0 || data.ncols() == 0 {
        return invalid("columnwise_median requires a non-empty matrix");
    }
    ensure_finite_matrix("data", data)?;
    let meds = data.column_iter().map(|c| {
        let mut v: Vec<f64> = c.iter().copied().collect();
        v.sort_by(f64::total_cmp);
        median_sorted(&v)
    });
    Ok(RealVector::from_iterator(data.ncols(), meds))
}

/// Ranks 1..n, with tied values sharing the average of the ranks they span.
pub fn average_ranks(values: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return invalid("average_ranks of an empty set");
    }
    ensure_finite_slice("values", values)?;
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));

    let mut ranks = vec![0.0; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end; the mean is exact in f64
        // for any realistic n since it is a half-integer.
        let avg = (start + 1 + end) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = avg;
        }
        start = end;
    }
    Ok(ranks)
}

/// Squared Euclidean distance between two equally sized slices.
pub(crate) fn squared_distance<'a, I, J>(a: I, b: J) -> f64
where
    I: IntoIterator<Item = &'a f64>,
    J: IntoIterator<Item = &'a f64>,
{
    a.into_iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> RealMatrix {
        RealMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn pinv_identity_returns_targets() {
        let y = RealMatrix::from_column_slice(3, 1, &[1.5, -2.0, 7.0]);
        let b = pinv_solve(&RealMatrix::identity(3, 3), &y, DEFAULT_REL_TOL).unwrap();
        assert!((b - y).abs().max() < 1e-14);
    }

    #[test]
    fn pinv_exact_recovery() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = random_matrix(&mut rng, 50, 10);
        let b_true = random_matrix(&mut rng, 10, 1);
        let b = pinv_solve(&h, &(&h * &b_true), DEFAULT_REL_TOL).unwrap();
        assert!((b - b_true).abs().max() < 1e-8);
    }

    #[test]
    fn pinv_duplicated_columns_minimum_norm() {
        // rank one: both columns equal, target = first column. Every (a, b)
        // with a + b = 1 fits exactly; the minimum-norm one is (0.5, 0.5).
        let h = RealMatrix::from_row_slice(4, 2, &[1.0, 1.0, 2.0, 2.0, -1.0, -1.0, 3.0, 3.0]);
        let y = h.columns(0, 1).into_owned();
        let b = pinv_solve(&h, &y, DEFAULT_REL_TOL).unwrap();
        assert!((b[(0, 0)] - 0.5).abs() < 1e-12);
        assert!((b[(1, 0)] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn pinv_wide_system() {
        // underdetermined: 2 equations, 3 unknowns
        let h = RealMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 1.0]);
        let y = RealMatrix::from_column_slice(2, 1, &[3.0, 4.0]);
        let b = pinv_solve(&h, &y, DEFAULT_REL_TOL).unwrap();
        assert!((b[(0, 0)] - 3.0).abs() < 1e-12);
        assert!((b[(1, 0)] - 2.0).abs() < 1e-12);
        assert!((b[(2, 0)] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn pinv_rejects_bad_input() {
        let h = RealMatrix::identity(3, 3);
        let y = RealMatrix::zeros(2, 1);
        assert!(pinv_solve(&h, &y, 1e-10).is_err());
        assert!(pinv_solve(&h, &RealMatrix::zeros(3, 1), 0.0).is_err());
        let mut bad = h.clone();
        bad[(1, 1)] = f64::NAN;
        assert!(pinv_solve(&bad, &RealMatrix::zeros(3, 1), 1e-10).is_err());
    }

    #[test]
    fn pinv_zero_design_gives_zero() {
        let b = pinv_solve(&RealMatrix::zeros(3, 2), &RealMatrix::from_element(3, 1, 1.0), 1e-10)
            .unwrap();
        assert_eq!(b, RealMatrix::zeros(2, 1));
    }

    #[test]
    fn mean_examples() {
        let m = RealMatrix::from_row_slice(2, 2, &[0.0, 0.0, 2.0, 4.0]);
        assert_eq!(sample_mean(&m).unwrap().as_slice(), &[1.0, 2.0]);
        let one = RealMatrix::from_row_slice(1, 3, &[1.0, -2.0, 5.0]);
        assert_eq!(sample_mean(&one).unwrap().as_slice(), &[1.0, -2.0, 5.0]);
        let col = RealMatrix::from_column_slice(5, 1, &[1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(sample_mean(&col).unwrap()[0], 3.0);
        assert!(sample_mean(&RealMatrix::zeros(0, 2)).is_err());
    }

    #[test]
    fn covariance_examples() {
        let m = RealMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 1.0]);
        let c = sample_covariance(&m).unwrap();
        assert_eq!(c, RealMatrix::from_element(2, 2, 0.5));

        let m = RealMatrix::from_row_slice(3, 2, &[1.0, 7.0, 2.0, 7.0, 4.0, 7.0]);
        let c = sample_covariance(&m).unwrap();
        assert_eq!(c[(1, 1)], 0.0);
        assert_eq!(c[(0, 1)], 0.0);
        assert_eq!(c[(1, 0)], 0.0);

        assert!(sample_covariance(&RealMatrix::zeros(1, 2)).is_err());
    }

    #[test]
    fn covariance_of_independent_columns_is_near_identity() {
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = RealMatrix::from_fn(10_000, 3, |_, _| StandardNormal.sample(&mut rng));
        let c = sample_covariance(&m).unwrap();
        assert!((c - RealMatrix::identity(3, 3)).abs().max() < 0.1);
    }

    #[test]
    fn percentile_examples() {
        assert_eq!(percentile(&[1.0, 2.0, 3.0, 4.0, 5.0], 50.0).unwrap(), 3.0);
        assert_eq!(percentile(&[1.0, 2.0, 3.0, 4.0], 100.0).unwrap(), 4.0);
        assert_eq!(percentile(&[10.0, 20.0], 25.0).unwrap(), 12.5);
        assert!(percentile(&[], 50.0).is_err());
        assert!(percentile(&[1.0], 100.5).is_err());
        assert!(percentile(&[1.0], -1.0).is_err());
    }

    #[test]
    fn median_examples() {
        let m = RealMatrix::from_column_slice(3, 1, &[1.0, 2.0, 100.0]);
        assert_eq!(columnwise_median(&m).unwrap()[0], 2.0);
        let m = RealMatrix::from_column_slice(2, 1, &[1.0, 3.0]);
        assert_eq!(columnwise_median(&m).unwrap()[0], 2.0);
        let m = RealMatrix::from_row_slice(3, 2, &[0.0, 5.0, 2.0, 7.0, 4.0, 9.0]);
        assert_eq!(columnwise_median(&m).unwrap().as_slice(), &[2.0, 7.0]);
        assert!(columnwise_median(&RealMatrix::zeros(0, 1)).is_err());
    }

    #[test]
    fn rank_examples() {
        assert_eq!(average_ranks(&[10.0, 20.0, 30.0]).unwrap(), vec![1.0, 2.0, 3.0]);
        assert_eq!(average_ranks(&[5.0, 5.0, 9.0]).unwrap(), vec![1.5, 1.5, 3.0]);
        assert_eq!(average_ranks(&[4.0; 4]).unwrap(), vec![2.5; 4]);
        assert_eq!(average_ranks(&[3.0, 1.0, 2.0]).unwrap(), vec![3.0, 1.0, 2.0]);
        assert!(average_ranks(&[]).is_err());
    }

    /// Frobenius norm of the residual.
    fn residual(h: &RealMatrix, b: &RealMatrix, y: &RealMatrix) -> f64 {
        (h * b - y).norm()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn pinv_residual_is_optimal(seed in any::<u64>(), n in 1usize..12, l in 1usize..8, m in 1usize..3) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let h = random_matrix(&mut rng, n, l);
            let y = random_matrix(&mut rng, n, m);
            let b = pinv_solve(&h, &y, DEFAULT_REL_TOL).unwrap();
            let best = residual(&h, &b, &y);
            for _ in 0..100 {
                let cand = random_matrix(&mut rng, l, m) * 3.0;
                prop_assert!(best <= residual(&h, &cand, &y) + 1e-8);
            }
        }

        #[test]
        fn covariance_is_symmetric_psd(seed in any::<u64>(), n in 2usize..30, d in 1usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = random_matrix(&mut rng, n, d);
            let c = sample_covariance(&m).unwrap();
            prop_assert_eq!(&c, &c.transpose());
            let trace = c.trace();
            let eig = c.symmetric_eigen();
            for &e in eig.eigenvalues.iter() {
                prop_assert!(e >= -1e-10 * trace.max(f64::MIN_POSITIVE));
            }
        }

        #[test]
        fn percentile_is_monotone(v in prop::collection::vec(-1e6f64..1e6, 1..40), q1 in 0.0f64..=100.0, q2 in 0.0f64..=100.0) {
            let (lo, hi) = if q1 <= q2 { (q1, q2) } else { (q2, q1) };
            prop_assert!(percentile(&v, lo).unwrap() <= percentile(&v, hi).unwrap());
        }

        #[test]
        fn rank_sum_is_triangular(v in prop::collection::vec(prop::sample::select(vec![-2.0f64, 0.0, 1.0, 1.5, 3.0, 7.0]), 1..60)) {
            let n = v.len() as f64;
            let sum: f64 = average_ranks(&v).unwrap().iter().sum();
            prop_assert_eq!(sum, n * (n + 1.0) / 2.0);
        }

        #[test]
        fn median_is_permutation_invariant(v in prop::collection::vec(-100.0f64..100.0, 1..30), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut shuffled = v.clone();
            shuffled.shuffle(&mut rng);
            let a = columnwise_median(&RealMatrix::from_column_slice(v.len(), 1, &v)).unwrap();
            let b = columnwise_median(&RealMatrix::from_column_slice(v.len(), 1, &shuffled)).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
