//! Lag-aligned aggregation of CUSUM statistics and the resulting estimators.
//!
//! For a candidate source `j` and change time `t`, node `k` is expected to
//! change at `t + lag(j, k)`. The candidate's lag set holds the nodes whose
//! expected change time is still a valid CUSUM split, i.e. `t + lag < n`.
//! Two aggregates are formed over it:
//!
//! * quadratic: `Q[j, t] = sum_k (T[k, t + lag(j, k)]^2 - 1)`
//! * linear: `L[j, t] = |sum_k T[k, t + lag(j, k)]|`
//!
//! The estimate is the argmax over `(j, t)`; ties go to the smallest `t`,
//! then the smallest `j`.

use std::io::{self, Write};
use std::ops::Deref;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cusum::{cusum_transform, CusumMatrix};
use crate::error::{Error, Result};
use crate::graph::{all_pairs_distances, DistanceMatrix, LagMatrix, NetworkGraph};
use crate::matrix::{DataMatrix, Matrix};

/// Transmission-probability grid searched by default.
pub const DEFAULT_RATE_GRID: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StatKind {
    Quadratic,
    Linear,
}

/// Estimated source node, change time and the maximised statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionResult {
    /// 1-based node label.
    pub j_hat: usize,
    /// Split index in `1..n`.
    pub z_hat: usize,
    pub stat_value: f64,
    /// Selected transmission probability, only set by rate search.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub q_hat: Option<f64>,
}

/// Aggregated statistic for every candidate `(j, t)`; shape `p x (n - 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StatMatrix(Matrix);

impl StatMatrix {
    /// Statistic at 1-based node `j` and split `t`.
    pub fn at(&self, j: usize, t: usize) -> f64 {
        self.0.get(j - 1, t - 1)
    }

    /// `(j, t, value)` of the maximum, 1-based, with the tie-break above.
    pub fn argmax(&self) -> (usize, usize, f64) {
        let (row, col, v) = self
            .0
            .argmax_col_major()
            .expect("stat matrix is never empty");
        (row + 1, col + 1, v)
    }

    pub fn max(&self) -> f64 {
        self.0.max_value()
    }

    /// Plain CSV, one line per node, one column per split, no header.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        for row in self.0.iter_rows() {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        Ok(())
    }

    pub fn into_inner(self) -> Matrix {
        self.0
    }
}

impl Deref for StatMatrix {
    type Target = Matrix;

    fn deref(&self) -> &Matrix {
        &self.0
    }
}

/// Number of nodes `k` with `t + lag(j, k) < n`, for 1-based `j`.
pub fn lag_set_size(lags: &LagMatrix, j: usize, t: usize, n: usize) -> usize {
    lags.row(j - 1).iter().filter(|&&d| t + d < n).count()
}

fn check_shapes(t: &CusumMatrix, lags: &LagMatrix) -> Result<()> {
    if t.p() != lags.p() {
        return Err(Error::ShapeMismatch(format!(
            "{} CUSUM rows but {} graph nodes",
            t.p(),
            lags.p()
        )));
    }
    Ok(())
}

/// Sums `term(T[k, c + lag(j, k)])` over the lag set for every `(j, c)`.
fn aggregate(t: &CusumMatrix, lags: &LagMatrix, term: impl Fn(f64) -> f64 + Sync) -> Matrix {
    let (p, cols) = (t.p(), t.cols());
    let mut out = Matrix::zeros(p, cols);
    out.as_mut_slice()
        .par_chunks_mut(cols)
        .enumerate()
        .for_each(|(j, acc)| {
            for (k, &d) in lags.row(j).iter().enumerate() {
                if d >= cols {
                    continue;
                }
                let shifted = &t.row(k)[d..];
                for (slot, &v) in acc.iter_mut().zip(shifted) {
                    *slot += term(v);
                }
            }
        });
    out
}

pub fn quadratic_stat_matrix(t: &CusumMatrix, lags: &LagMatrix) -> Result<StatMatrix> {
    check_shapes(t, lags)?;
    Ok(StatMatrix(aggregate(t, lags, |v| v * v - 1.0)))
}

pub fn linear_stat_matrix(t: &CusumMatrix, lags: &LagMatrix) -> Result<StatMatrix> {
    check_shapes(t, lags)?;
    let mut m = aggregate(t, lags, |v| v);
    m.as_mut_slice().iter_mut().for_each(|v| *v = v.abs());
    Ok(StatMatrix(m))
}

pub fn stat_matrix(t: &CusumMatrix, lags: &LagMatrix, kind: StatKind) -> Result<StatMatrix> {
    match kind {
        StatKind::Quadratic => quadratic_stat_matrix(t, lags),
        StatKind::Linear => linear_stat_matrix(t, lags),
    }
}

fn check_data(x: &DataMatrix, p: usize) -> Result<()> {
    if x.p() != p {
        return Err(Error::ShapeMismatch(format!(
            "data has {} rows but the graph has {p} nodes",
            x.p()
        )));
    }
    Ok(())
}

/// Joint estimate of source node and change time.
pub fn estimate(x: &DataMatrix, g: &NetworkGraph, kind: StatKind) -> Result<DetectionResult> {
    check_data(x, g.p())?;
    estimate_with_distances(x, &all_pairs_distances(g), kind)
}

/// [`estimate`] with precomputed distances.
pub fn estimate_with_distances(
    x: &DataMatrix,
    dist: &DistanceMatrix,
    kind: StatKind,
) -> Result<DetectionResult> {
    check_data(x, dist.p())?;
    let stats = stat_matrix(&cusum_transform(x), dist, kind)?;
    let (j_hat, z_hat, stat_value) = stats.argmax();
    Ok(DetectionResult {
        j_hat,
        z_hat,
        stat_value,
        q_hat: None,
    })
}

/// Rejection threshold `2 sqrt(p L) + 2 L` with `L = ln(p n / delta)`.
pub fn test_threshold(p: usize, n: usize, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::param("delta", format!("{delta} is not in (0, 1)")));
    }
    if p == 0 || n < 2 {
        return Err(Error::param("p, n", "need p >= 1 and n >= 2"));
    }
    let log_term = (p as f64 * n as f64 / delta).ln();
    Ok(2.0 * (p as f64 * log_term).sqrt() + 2.0 * log_term)
}

/// Outcome of the existence test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub lambda: f64,
    pub max_stat: f64,
    pub reject: bool,
}

/// Rejects when the largest quadratic statistic reaches `lambda`.
pub fn run_test(x: &DataMatrix, g: &NetworkGraph, lambda: f64) -> Result<bool> {
    check_data(x, g.p())?;
    Ok(test_with_distances(x, &all_pairs_distances(g), lambda)?.reject)
}

pub fn test_with_distances(
    x: &DataMatrix,
    dist: &DistanceMatrix,
    lambda: f64,
) -> Result<TestOutcome> {
    if !lambda.is_finite() {
        return Err(Error::param("lambda", "must be finite"));
    }
    check_data(x, dist.p())?;
    let max_stat = quadratic_stat_matrix(&cusum_transform(x), dist)?.max();
    Ok(TestOutcome {
        lambda,
        max_stat,
        reject: max_stat >= lambda,
    })
}

/// Lags `round(d / q)`, halves rounded up, for spreading that succeeds with
/// probability `q` per step.
pub fn scaled_distance(dist: &LagMatrix, q: f64) -> Result<LagMatrix> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::param("q", format!("{q} is not in (0, 1]")));
    }
    if q == 1.0 {
        return Ok(dist.clone());
    }
    let p = dist.p();
    let data = (0..p)
        .flat_map(|j| dist.row(j).iter())
        .map(|&d| (d as f64 / q + 0.5).floor() as usize)
        .collect();
    LagMatrix::from_vec(p, data)
}

/// Quadratic estimate with the transmission probability chosen from
/// `q_grid` by the largest maximum statistic. Ties go to the smaller `q`.
pub fn estimate_with_rate_search(
    x: &DataMatrix,
    g: &NetworkGraph,
    q_grid: &[f64],
) -> Result<DetectionResult> {
    check_data(x, g.p())?;
    rate_search_with_distances(x, &all_pairs_distances(g), q_grid)
}

pub fn rate_search_with_distances(
    x: &DataMatrix,
    dist: &DistanceMatrix,
    q_grid: &[f64],
) -> Result<DetectionResult> {
    if q_grid.is_empty() {
        return Err(Error::param("q_grid", "empty"));
    }
    check_data(x, dist.p())?;
    let cusum = cusum_transform(x);
    let mut best: Option<(f64, StatMatrix)> = None;
    for &q in q_grid {
        let stats = quadratic_stat_matrix(&cusum, &scaled_distance(dist, q)?)?;
        let better = match &best {
            None => true,
            Some((bq, bs)) => {
                let (m, bm) = (stats.max(), bs.max());
                m > bm || (m == bm && q < *bq)
            }
        };
        if better {
            best = Some((q, stats));
        }
    }
    let (q_hat, stats) = best.expect("grid is non-empty");
    let (j_hat, z_hat, stat_value) = stats.argmax();
    Ok(DetectionResult {
        j_hat,
        z_hat,
        stat_value,
        q_hat: Some(q_hat),
    })
}

/// Signal-size level `c ((sqrt(p) + ln(2pn)) / (n tau m) + p ln(2pn) / (n tau^2 m^2))`
/// above which consistent estimation is guaranteed; `c` is unspecified in
/// theory and supplied by the caller.
pub fn signal_threshold(p: f64, n: f64, tau: f64, m: f64, c: f64) -> f64 {
    let log_term = (2.0 * p * n).ln();
    c * ((p.sqrt() + log_term) / (n * tau * m) + p * log_term / (n * tau * tau * m * m))
}
