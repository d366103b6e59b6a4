//! Row-wise CUSUM transform of a data matrix.
//!
//! For a row `x` of length `n` and split `t` in `1..n`,
//!
//! ```text
//! T[t] = sqrt(t (n - t) / n) * (mean(x[t+1..=n]) - mean(x[1..=t]))
//! ```
//!
//! Each row is referenced to its first entry before the prefix sums are
//! taken. The output then depends only on the differences `x[i] - x[1]`, so a
//! constant shift of the row that is exactly representable leaves every
//! statistic bitwise unchanged, and a row far from zero does not lose
//! precision in the prefix sums.

use std::ops::Deref;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::{DataMatrix, Matrix};

/// `p x (n - 1)` CUSUM statistics; column `c` (0-based) is split `t = c + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct CusumMatrix {
    values: Matrix,
    n: usize,
}

impl CusumMatrix {
    pub fn p(&self) -> usize {
        self.values.rows()
    }

    /// Length of the series the statistics were computed from.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Statistic at 1-based node `j` and split `t`.
    pub fn at(&self, j: usize, t: usize) -> f64 {
        self.values.get(j - 1, t - 1)
    }

    /// Wraps precomputed statistics (for example a transformed mean matrix).
    pub fn from_matrix(values: Matrix) -> Result<Self> {
        if values.rows() == 0 || values.cols() == 0 {
            return Err(Error::ShapeMismatch("empty CUSUM matrix".into()));
        }
        values.check_finite()?;
        let n = values.cols() + 1;
        Ok(Self { values, n })
    }

    pub fn into_inner(self) -> Matrix {
        self.values
    }
}

impl Deref for CusumMatrix {
    type Target = Matrix;

    fn deref(&self) -> &Matrix {
        &self.values
    }
}

/// CUSUM statistics of one series of length `n >= 2`, for splits `1..n`.
pub fn cusum_row(x: &[f64]) -> Result<Vec<f64>> {
    let n = x.len();
    if n < 2 {
        return Err(Error::param(
            "n",
            format!("need at least 2 time points, got {n}"),
        ));
    }
    let mut out = vec![0.0; n - 1];
    fill_row(x, &mut out);
    Ok(out)
}

fn fill_row(x: &[f64], out: &mut [f64]) {
    let n = x.len();
    let nf = n as f64;
    let centre = x[0];
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for &v in x {
        acc += v - centre;
        prefix.push(acc);
    }
    let total = prefix[n];
    for (c, slot) in out.iter_mut().enumerate() {
        let t = c + 1;
        let tf = t as f64;
        let before = prefix[t] / tf;
        let after = (total - prefix[t]) / (nf - tf);
        *slot = (tf * (nf - tf) / nf).sqrt() * (after - before);
    }
}

/// Applies [`cusum_row`] to every row.
pub fn cusum_transform(x: &DataMatrix) -> CusumMatrix {
    let (p, n) = (x.p(), x.n());
    let mut values = Matrix::zeros(p, n - 1);
    values
        .as_mut_slice()
        .par_chunks_mut(n - 1)
        .enumerate()
        .for_each(|(j, out)| fill_row(x.row(j), out));
    CusumMatrix { values, n }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn data(rows: Vec<Vec<f64>>) -> DataMatrix {
        DataMatrix::from_rows(rows).unwrap()
    }

    /// Eq.-by-definition evaluation with explicit means, no prefix sums.
    fn naive(x: &[f64], t: usize) -> f64 {
        let n = x.len() as f64;
        let tf = t as f64;
        let pre = x[..t].iter().sum::<f64>() / tf;
        let post = x[t..].iter().sum::<f64>() / (n - tf);
        (tf * (n - tf) / n).sqrt() * (post - pre)
    }

    #[test]
    fn constant_row_is_zero() {
        let t = cusum_transform(&data(vec![vec![3.5; 9]]));
        assert!(t.row(0).iter().all(|&v| v.abs() < 1e-14));
    }

    #[test]
    fn two_points() {
        let t = cusum_transform(&data(vec![vec![0.0, 1.0]]));
        assert!((t.at(1, 1) - 1.0 / 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn step_of_four() {
        let t = cusum_transform(&data(vec![vec![0.0, 0.0, 1.0, 1.0]]));
        assert!((t.at(1, 2) - 1.0).abs() < 1e-15);
        assert_eq!(t.n(), 4);
        assert_eq!(t.cols(), 3);
    }

    #[test]
    fn too_short() {
        assert!(cusum_row(&[1.0]).is_err());
    }

    #[test]
    fn step_peaks_at_change() {
        for z in 1..20 {
            let row: Vec<f64> = (1..=20).map(|t| if t > z { 0.7 } else { 0.0 }).collect();
            let t = cusum_row(&row).unwrap();
            let (arg, _) = t
                .iter()
                .enumerate()
                .fold((0, f64::MIN), |b, (i, &v)| if v.abs() > b.1 { (i, v.abs()) } else { b });
            assert_eq!(arg + 1, z);
        }
    }

    fn rows_strategy() -> impl Strategy<Value = Vec<Vec<f64>>> {
        (1usize..5, 2usize..30).prop_flat_map(|(p, n)| {
            proptest::collection::vec(proptest::collection::vec(-10.0f64..10.0, n), p)
        })
    }

    proptest! {
        #[test]
        fn matches_direct_means(rows in rows_strategy()) {
            let t = cusum_transform(&data(rows.clone()));
            for (j, row) in rows.iter().enumerate() {
                for s in 1..row.len() {
                    prop_assert!((t.get(j, s - 1) - naive(row, s)).abs() < 1e-10);
                }
            }
        }

        #[test]
        fn shift_invariant(rows in rows_strategy(), shift in -1e3f64..1e3) {
            let base = cusum_transform(&data(rows.clone()));
            let shifted: Vec<Vec<f64>> = rows.iter()
                .map(|r| r.iter().map(|v| v + shift).collect())
                .collect();
            let moved = cusum_transform(&data(shifted));
            let scale = rows.iter().flatten().fold(1.0f64, |m, v| m.max(v.abs())) + shift.abs();
            for (a, b) in base.as_slice().iter().zip(moved.as_slice()) {
                prop_assert!((a - b).abs() <= 1e-12 * scale * 30.0);
            }
        }

        #[test]
        fn exact_shift_is_bitwise_invariant(rows in rows_strategy(), shift in -1000i32..1000) {
            // Quarter-unit grid keeps every shifted value exactly representable.
            let grid: Vec<Vec<f64>> = rows.iter()
                .map(|r| r.iter().map(|v| (v * 4.0).round() / 4.0).collect())
                .collect();
            let shifted: Vec<Vec<f64>> = grid.iter()
                .map(|r| r.iter().map(|v| v + shift as f64).collect())
                .collect();
            prop_assert_eq!(cusum_transform(&data(grid)), cusum_transform(&data(shifted)));
        }

        #[test]
        fn scale_equivariant(rows in rows_strategy(), s in -5.0f64..5.0) {
            let base = cusum_transform(&data(rows.clone()));
            let scaled: Vec<Vec<f64>> = rows.iter()
                .map(|r| r.iter().map(|v| v * s).collect())
                .collect();
            let out = cusum_transform(&data(scaled));
            for (a, b) in base.as_slice().iter().zip(out.as_slice()) {
                prop_assert!((a * s - b).abs() < 1e-9);
            }
        }

        #[test]
        fn linear(a in rows_strategy(), seed in any::<u64>()) {
            let b: Vec<Vec<f64>> = a.iter().enumerate()
                .map(|(i, r)| r.iter().enumerate()
                    .map(|(k, _)| ((seed ^ (i * 31 + k) as u64) % 97) as f64 / 7.0)
                    .collect())
                .collect();
            let sum: Vec<Vec<f64>> = a.iter().zip(&b)
                .map(|(x, y)| x.iter().zip(y).map(|(u, v)| u + v).collect())
                .collect();
            let (ta, tb, ts) = (
                cusum_transform(&data(a.clone())),
                cusum_transform(&data(b)),
                cusum_transform(&data(sum)),
            );
            for i in 0..ts.as_slice().len() {
                prop_assert!((ta.as_slice()[i] + tb.as_slice()[i] - ts.as_slice()[i]).abs() < 1e-9);
            }
        }

        #[test]
        fn negation_is_exact(rows in rows_strategy()) {
            let base = cusum_transform(&data(rows.clone()));
            let neg: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|v| -v).collect()).collect();
            let out = cusum_transform(&data(neg));
            for (a, b) in base.as_slice().iter().zip(out.as_slice()) {
                prop_assert_eq!(*a, -*b);
            }
        }
    }
}
