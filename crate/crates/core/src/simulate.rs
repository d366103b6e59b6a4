//! Synthetic data with a change spreading from a source node, the
//! coordinatewise baseline estimator, and the Monte Carlo harness.
//!
//! Under deterministic spreading node `j` changes at `z* + d(j, j*)`. Under
//! stochastic spreading each infected node infects each susceptible
//! neighbour independently with probability `q` per step. Observations are
//! unit-variance Gaussian with mean `mu0[j]` up to and including the node's
//! spread time and `mu0[j] + theta[j]` strictly after it.

use std::fmt;
use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cusum::cusum_transform;
use crate::detect::{
    estimate_with_distances, rate_search_with_distances, DetectionResult, StatKind,
    DEFAULT_RATE_GRID,
};
use crate::error::{Error, Result};
use crate::graph::{all_pairs_distances, distances_from, DistanceMatrix, GraphFamily, NetworkGraph};
use crate::matrix::{DataMatrix, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SpreadModel {
    Deterministic,
    Stochastic { q: f64 },
}

impl fmt::Display for SpreadModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpreadModel::Deterministic => write!(f, "det"),
            SpreadModel::Stochastic { q } => write!(f, "stoch:{q}"),
        }
    }
}

/// Ground-truth parameters of a simulated change.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpreadSpec {
    pub z_star: usize,
    pub j_star: usize,
    pub n: usize,
    pub mu0: Vec<f64>,
    pub theta: Vec<f64>,
    pub model: SpreadModel,
}

impl SpreadSpec {
    /// Zero baseline and the same change `signal` at every node.
    pub fn uniform(
        p: usize,
        n: usize,
        z_star: usize,
        j_star: usize,
        signal: f64,
        model: SpreadModel,
    ) -> Self {
        Self {
            z_star,
            j_star,
            n,
            mu0: vec![0.0; p],
            theta: vec![signal; p],
            model,
        }
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        if self.n < 2 {
            return Err(Error::param("n", format!("{} < 2", self.n)));
        }
        if self.z_star == 0 || self.z_star >= self.n {
            return Err(Error::param(
                "z_star",
                format!("{} is not in [1, {}]", self.z_star, self.n - 1),
            ));
        }
        if self.j_star == 0 || self.j_star > p {
            return Err(Error::NodeOutOfRange {
                node: self.j_star,
                p,
            });
        }
        if self.mu0.len() != p || self.theta.len() != p {
            return Err(Error::ShapeMismatch(format!(
                "mean vectors of length {}/{} for {p} nodes",
                self.mu0.len(),
                self.theta.len()
            )));
        }
        if self.mu0.iter().chain(&self.theta).any(|v| !v.is_finite()) {
            return Err(Error::param("mu0/theta", "non-finite entry"));
        }
        if let SpreadModel::Stochastic { q } = self.model {
            if !(q > 0.0 && q <= 1.0) {
                return Err(Error::param("q", format!("{q} is not in (0, 1]")));
            }
        }
        Ok(())
    }
}

/// First time each node is infected; `None` if not within the horizon.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InfectionSchedule {
    pub spread_time: Vec<Option<usize>>,
}

pub fn spread_schedule<R: Rng + ?Sized>(
    g: &NetworkGraph,
    spec: &SpreadSpec,
    rng: &mut R,
) -> Result<InfectionSchedule> {
    spec.validate(g.p())?;
    let spread_time = match spec.model {
        SpreadModel::Deterministic => distances_from(g, spec.j_star)
            .into_iter()
            .map(|d| Some(spec.z_star + d).filter(|&t| t <= spec.n))
            .collect(),
        SpreadModel::Stochastic { q } => stochastic_times(g, spec, q, rng),
    };
    Ok(InfectionSchedule { spread_time })
}

fn stochastic_times<R: Rng + ?Sized>(
    g: &NetworkGraph,
    spec: &SpreadSpec,
    q: f64,
    rng: &mut R,
) -> Vec<Option<usize>> {
    let p = g.p();
    let mut times: Vec<Option<usize>> = vec![None; p];
    times[spec.j_star - 1] = Some(spec.z_star);
    let mut infected = 1;
    for t in spec.z_star + 1..=spec.n {
        if infected == p {
            break;
        }
        let mut newly = Vec::new();
        for v in 1..=p {
            if times[v - 1].is_some() {
                continue;
            }
            let mut hit = false;
            for u in g.neighbors(v) {
                if matches!(times[u - 1], Some(s) if s < t) {
                    // Every infected neighbour gets its own draw.
                    hit |= rng.gen_bool(q);
                }
            }
            if hit {
                newly.push(v);
            }
        }
        infected += newly.len();
        for v in newly {
            times[v - 1] = Some(t);
        }
    }
    times
}

/// Noise-free mean matrix implied by `spec` and `schedule`.
pub fn mean_matrix(spec: &SpreadSpec, schedule: &InfectionSchedule) -> Result<Matrix> {
    let p = spec.mu0.len();
    if schedule.spread_time.len() != p {
        return Err(Error::ShapeMismatch(format!(
            "schedule for {} nodes, spec for {p}",
            schedule.spread_time.len()
        )));
    }
    let mut m = Matrix::zeros(p, spec.n);
    for j in 0..p {
        let row = m.row_mut(j);
        for (c, slot) in row.iter_mut().enumerate() {
            let t = c + 1;
            let changed = matches!(schedule.spread_time[j], Some(s) if t > s);
            *slot = spec.mu0[j] + if changed { spec.theta[j] } else { 0.0 };
        }
    }
    Ok(m)
}

/// Mean matrix plus iid standard normal noise, drawn row by row.
pub fn data_from_schedule<R: Rng + ?Sized>(
    spec: &SpreadSpec,
    schedule: &InfectionSchedule,
    rng: &mut R,
    noiseless: bool,
) -> Result<DataMatrix> {
    let mut m = mean_matrix(spec, schedule)?;
    if !noiseless {
        for v in m.as_mut_slice() {
            *v += rng.sample::<f64, _>(StandardNormal);
        }
    }
    DataMatrix::new(m)
}

pub fn generate_data<R: Rng + ?Sized>(
    g: &NetworkGraph,
    spec: &SpreadSpec,
    rng: &mut R,
) -> Result<DataMatrix> {
    let schedule = spread_schedule(g, spec, rng)?;
    data_from_schedule(spec, &schedule, rng, false)
}

/// Per-row CUSUM peak; the earliest peak time and its row are the estimate.
pub fn coordinatewise_baseline(x: &DataMatrix) -> DetectionResult {
    let t = cusum_transform(x);
    let mut best: Option<(usize, usize, f64)> = None;
    for j in 0..t.p() {
        let (col, val) = t
            .row(j)
            .iter()
            .map(|v| v.abs())
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |b, (c, v)| if v > b.1 { (c, v) } else { b });
        if best.is_none_or(|(_, bc, _)| col < bc) {
            best = Some((j, col, val));
        }
    }
    let (j, col, val) = best.expect("data has at least one row");
    DetectionResult {
        j_hat: j + 1,
        z_hat: col + 1,
        stat_value: val,
        q_hat: None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    /// Quadratic aggregate with hop-distance lags.
    #[serde(rename = "SD")]
    SpreadDetect,
    /// Quadratic aggregate with transmission-rate search.
    #[serde(rename = "rSD")]
    RateSearch,
    /// Linear aggregate with hop-distance lags.
    #[serde(rename = "SD-linear")]
    SpreadDetectLinear,
    #[serde(rename = "coordwise")]
    Coordinatewise,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::SpreadDetect => "SD",
            Method::RateSearch => "rSD",
            Method::SpreadDetectLinear => "SD-linear",
            Method::Coordinatewise => "coordwise",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sd" => Some(Method::SpreadDetect),
            "rsd" => Some(Method::RateSearch),
            "sd-linear" | "linear" => Some(Method::SpreadDetectLinear),
            "coordwise" | "coord" => Some(Method::Coordinatewise),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloConfig {
    pub family: GraphFamily,
    pub n: usize,
    pub z_star: usize,
    pub j_star: usize,
    pub signal: f64,
    pub model: SpreadModel,
    pub methods: Vec<Method>,
    pub q_grid: Vec<f64>,
    /// Skip the noise draw; used to check exact recovery.
    pub noiseless: bool,
}

impl MonteCarloConfig {
    pub fn new(family: GraphFamily, n: usize, z_star: usize, j_star: usize, signal: f64) -> Self {
        Self {
            family,
            n,
            z_star,
            j_star,
            signal,
            model: SpreadModel::Deterministic,
            methods: vec![Method::SpreadDetect, Method::Coordinatewise],
            q_grid: DEFAULT_RATE_GRID.to_vec(),
            noiseless: false,
        }
    }
}

/// One line of the benchmark table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub n: usize,
    pub p: usize,
    pub z_star: usize,
    pub j_star: usize,
    pub signal: f64,
    pub model: String,
    pub method: String,
    pub mad_z: f64,
    /// `|j_hat - j*|` in label units.
    pub mad_j: f64,
    pub reps: usize,
    pub seed: u64,
    /// `d(j_hat, j*)` in hops.
    pub mad_j_graph: f64,
}

pub const BENCHMARK_COLUMNS: [&str; 12] = [
    "n",
    "p",
    "z_star",
    "j_star",
    "signal",
    "model",
    "method",
    "mad_z",
    "mad_j",
    "reps",
    "seed",
    "mad_j_graph",
];

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkTable {
    pub rows: Vec<BenchmarkRow>,
    /// `estimates[r][m]` is replication `r`, method `config.methods[m]`.
    pub estimates: Vec<Vec<DetectionResult>>,
}

impl BenchmarkTable {
    pub fn row(&self, method: Method) -> Option<&BenchmarkRow> {
        self.rows.iter().find(|r| r.method == method.name())
    }

    pub fn write_csv<W: Write>(&self, mut out: W, header: bool) -> io::Result<()> {
        if header {
            writeln!(out, "{}", BENCHMARK_COLUMNS.join(","))?;
        }
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                r.n,
                r.p,
                r.z_star,
                r.j_star,
                r.signal,
                r.model,
                r.method,
                r.mad_z,
                r.mad_j,
                r.reps,
                r.seed,
                r.mad_j_graph
            )?;
        }
        Ok(())
    }
}

/// Generator for replication `rep`: stream `rep` of the ChaCha8 generator
/// seeded with `seed`.
pub fn replication_rng(seed: u64, rep: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep as u64);
    rng
}

/// Simulates one replication and applies every configured method.
pub fn run_replication(
    config: &MonteCarloConfig,
    g: &NetworkGraph,
    dist: &DistanceMatrix,
    seed: u64,
    rep: usize,
) -> Result<Vec<DetectionResult>> {
    let spec = SpreadSpec::uniform(
        g.p(),
        config.n,
        config.z_star,
        config.j_star,
        config.signal,
        config.model,
    );
    let mut rng = replication_rng(seed, rep);
    let schedule = spread_schedule(g, &spec, &mut rng)?;
    let x = data_from_schedule(&spec, &schedule, &mut rng, config.noiseless)?;
    config
        .methods
        .iter()
        .map(|m| match m {
            Method::SpreadDetect => estimate_with_distances(&x, dist, StatKind::Quadratic),
            Method::SpreadDetectLinear => estimate_with_distances(&x, dist, StatKind::Linear),
            Method::RateSearch => rate_search_with_distances(&x, dist, &config.q_grid),
            Method::Coordinatewise => Ok(coordinatewise_baseline(&x)),
        })
        .collect()
}

/// Mean absolute deviations of every method over `reps` replications.
/// Replications run in parallel; the result depends only on `seed`.
pub fn monte_carlo(config: &MonteCarloConfig, reps: usize, seed: u64) -> Result<BenchmarkTable> {
    if reps == 0 {
        return Err(Error::param("reps", "must be at least 1"));
    }
    let g = config.family.generate()?;
    let dist = all_pairs_distances(&g);
    SpreadSpec::uniform(
        g.p(),
        config.n,
        config.z_star,
        config.j_star,
        config.signal,
        config.model,
    )
    .validate(g.p())?;

    let estimates = (0..reps)
        .into_par_iter()
        .map(|rep| run_replication(config, &g, &dist, seed, rep))
        .collect::<Result<Vec<_>>>()?;

    let rows = config
        .methods
        .iter()
        .enumerate()
        .map(|(m, method)| {
            let (mut dz, mut dj, mut dg) = (0.0, 0.0, 0.0);
            for rep in &estimates {
                let r = &rep[m];
                dz += r.z_hat.abs_diff(config.z_star) as f64;
                dj += r.j_hat.abs_diff(config.j_star) as f64;
                dg += dist.distance(r.j_hat, config.j_star) as f64;
            }
            let k = reps as f64;
            BenchmarkRow {
                n: config.n,
                p: g.p(),
                z_star: config.z_star,
                j_star: config.j_star,
                signal: config.signal,
                model: config.model.to_string(),
                method: method.name().to_string(),
                mad_z: dz / k,
                mad_j: dj / k,
                reps,
                seed,
                mad_j_graph: dg / k,
            }
        })
        .collect();
    Ok(BenchmarkTable { rows, estimates })
}
