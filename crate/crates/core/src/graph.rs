//! Undirected connected graphs, generators for the standard families, hop
//! distances, and the identifiability count used to judge how well a graph
//! separates competing `(source, time)` hypotheses.

use std::collections::{BTreeSet, VecDeque};
use std::ops::Deref;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

const ER_MAX_ATTEMPTS: usize = 100;

/// Undirected, simple, connected graph on nodes `1..=p`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkGraph {
    p: usize,
    /// Each edge stored once as `(u, v)` with `u < v`, 1-based.
    edges: BTreeSet<(usize, usize)>,
    /// 0-based adjacency, sorted.
    adjacency: Vec<Vec<usize>>,
}

impl NetworkGraph {
    /// Builds and validates a graph. Edges may be listed in either orientation;
    /// repeated edges collapse to one.
    pub fn from_edge_list(p: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if p == 0 {
            return Err(Error::EmptyGraph);
        }
        let mut set = BTreeSet::new();
        for &(u, v) in edges {
            for node in [u, v] {
                if node == 0 || node > p {
                    return Err(Error::NodeOutOfRange { node, p });
                }
            }
            if u == v {
                return Err(Error::SelfLoop { node: u });
            }
            set.insert((u.min(v), u.max(v)));
        }
        let mut adjacency = vec![Vec::new(); p];
        for &(u, v) in &set {
            adjacency[u - 1].push(v - 1);
            adjacency[v - 1].push(u - 1);
        }
        for nbrs in &mut adjacency {
            nbrs.sort_unstable();
        }
        let graph = Self {
            p,
            edges: set,
            adjacency,
        };
        if let Some(node) = graph.first_unreachable() {
            return Err(Error::Disconnected { node });
        }
        Ok(graph)
    }

    /// Parses the plain-text edge-list format: a `p <count>` line followed by
    /// `u v` lines. Blank lines and lines starting with `#` are skipped.
    pub fn parse_edge_list(text: &str) -> Result<Self> {
        let mut p = None;
        let mut edges = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let parse = |s: &str| {
                s.parse::<usize>().map_err(|_| Error::Parse {
                    line: line_no,
                    reason: format!("`{s}` is not a node label"),
                })
            };
            match (p, fields.as_slice()) {
                (None, ["p", count]) => p = Some(parse(count)?),
                (None, _) => {
                    return Err(Error::Parse {
                        line: line_no,
                        reason: "expected header `p <count>`".into(),
                    })
                }
                (Some(_), [u, v]) => edges.push((parse(u)?, parse(v)?)),
                (Some(_), _) => {
                    return Err(Error::Parse {
                        line: line_no,
                        reason: "expected `u v`".into(),
                    })
                }
            }
        }
        let p = p.ok_or(Error::Parse {
            line: 0,
            reason: "missing header `p <count>`".into(),
        })?;
        Self::from_edge_list(p, &edges)
    }

    pub fn to_edge_list_string(&self) -> String {
        let mut out = format!("p {}\n", self.p);
        for (u, v) in &self.edges {
            out.push_str(&format!("{u} {v}\n"));
        }
        out
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Edges as `(u, v)` with `u < v`, 1-based, sorted.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.edges.contains(&(u.min(v), u.max(v)))
    }

    /// Neighbours of 1-based `node`, as 1-based labels.
    pub fn neighbors(&self, node: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacency[node - 1].iter().map(|&k| k + 1)
    }

    pub fn degree(&self, node: usize) -> usize {
        self.adjacency[node - 1].len()
    }

    pub(crate) fn adjacency(&self) -> &[Vec<usize>] {
        &self.adjacency
    }

    /// Same graph with node `i` renamed to `perm[i - 1]`.
    pub fn relabel(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.p {
            return Err(Error::ShapeMismatch(format!(
                "permutation of length {} for {} nodes",
                perm.len(),
                self.p
            )));
        }
        let mut seen = vec![false; self.p];
        for &x in perm {
            if x == 0 || x > self.p || std::mem::replace(&mut seen[x - 1], true) {
                return Err(Error::param("perm", "not a permutation of 1..=p"));
            }
        }
        let edges: Vec<_> = self
            .edges
            .iter()
            .map(|&(u, v)| (perm[u - 1], perm[v - 1]))
            .collect();
        Self::from_edge_list(self.p, &edges)
    }

    fn first_unreachable(&self) -> Option<usize> {
        let dist = bfs(&self.adjacency, 0);
        dist.iter().position(|&d| d == usize::MAX).map(|i| i + 1)
    }
}

/// The graph families used in experiments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GraphFamily {
    Path { p: usize },
    Cycle { p: usize },
    /// `dim`-dimensional grid with `side` nodes per axis; `wrapped` makes each
    /// axis a cycle (a torus).
    Grid {
        dim: usize,
        side: usize,
        wrapped: bool,
    },
    /// Complete binary tree filled level by level: node `i` has children
    /// `2i` and `2i + 1` when those are `<= p`.
    BinaryTree { p: usize },
    ErdosRenyi { p: usize, prob: f64, seed: u64 },
}

impl GraphFamily {
    /// Grid family with `p` total nodes; `p` must be an exact `dim`-th power.
    pub fn grid_with_nodes(dim: usize, p: usize, wrapped: bool) -> Result<Self> {
        if dim == 0 {
            return Err(Error::param("dim", "must be positive"));
        }
        let guess = (p as f64).powf(1.0 / dim as f64).round() as usize;
        for side in guess.saturating_sub(1)..=guess + 1 {
            if side.checked_pow(dim as u32) == Some(p) {
                return Ok(GraphFamily::Grid { dim, side, wrapped });
            }
        }
        Err(Error::GridSize {
            dim,
            side: guess,
            p,
        })
    }

    pub fn generate(&self) -> Result<NetworkGraph> {
        match *self {
            GraphFamily::Path { p } => {
                let edges: Vec<_> = (1..p).map(|i| (i, i + 1)).collect();
                NetworkGraph::from_edge_list(p, &edges)
            }
            GraphFamily::Cycle { p } => {
                if p < 3 {
                    return Err(Error::param("p", format!("cycle needs p >= 3, got {p}")));
                }
                let edges: Vec<_> = (1..=p).map(|i| (i, i % p + 1)).collect();
                NetworkGraph::from_edge_list(p, &edges)
            }
            GraphFamily::Grid { dim, side, wrapped } => grid(dim, side, wrapped),
            GraphFamily::BinaryTree { p } => {
                let edges: Vec<_> = (2..=p).map(|i| (i / 2, i)).collect();
                NetworkGraph::from_edge_list(p, &edges)
            }
            GraphFamily::ErdosRenyi { p, prob, seed } => erdos_renyi(p, prob, seed),
        }
    }
}

/// 1-based node label of the grid point with 1-based `coords`, where the
/// first coordinate varies fastest.
pub fn grid_node(side: usize, coords: &[usize]) -> usize {
    coords
        .iter()
        .rev()
        .fold(0, |acc, &c| acc * side + (c - 1))
        + 1
}

fn grid(dim: usize, side: usize, wrapped: bool) -> Result<NetworkGraph> {
    if dim == 0 || side == 0 {
        return Err(Error::param("grid", "dimension and side must be positive"));
    }
    let p = side
        .checked_pow(dim as u32)
        .ok_or_else(|| Error::param("grid", "too many nodes"))?;
    let mut edges = Vec::new();
    for node in 0..p {
        let mut stride = 1;
        for _ in 0..dim {
            let coord = (node / stride) % side;
            if coord + 1 < side {
                edges.push((node + 1, node + stride + 1));
            } else if wrapped && side > 2 {
                edges.push((node + 1, node - coord * stride + 1));
            }
            stride *= side;
        }
    }
    NetworkGraph::from_edge_list(p, &edges)
}

fn erdos_renyi(p: usize, prob: f64, seed: u64) -> Result<NetworkGraph> {
    if !(0.0..=1.0).contains(&prob) {
        return Err(Error::param("prob", format!("{prob} is not in [0, 1]")));
    }
    for attempt in 0..ER_MAX_ATTEMPTS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(attempt as u64));
        let mut edges = Vec::new();
        for u in 1..=p {
            for v in u + 1..=p {
                if rng.gen_bool(prob) {
                    edges.push((u, v));
                }
            }
        }
        match NetworkGraph::from_edge_list(p, &edges) {
            Ok(g) => return Ok(g),
            Err(Error::Disconnected { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::ErNotConnected {
        p,
        prob,
        attempts: ER_MAX_ATTEMPTS,
    })
}

fn bfs(adjacency: &[Vec<usize>], source: usize) -> Vec<usize> {
    let mut dist = vec![usize::MAX; adjacency.len()];
    let mut queue = VecDeque::new();
    dist[source] = 0;
    queue.push_back(source);
    while let Some(u) = queue.pop_front() {
        for &v in &adjacency[u] {
            if dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    dist
}

/// Square matrix of non-negative integer lags between nodes, 0-based.
///
/// Hop distances are the usual instance; rescaled distances used for
/// stochastic spreading are another.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LagMatrix {
    p: usize,
    data: Vec<usize>,
}

impl LagMatrix {
    pub fn from_vec(p: usize, data: Vec<usize>) -> Result<Self> {
        if data.len() != p * p {
            return Err(Error::ShapeMismatch(format!(
                "{} lags for {p} nodes",
                data.len()
            )));
        }
        Ok(Self { p, data })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// 0-based.
    #[inline]
    pub fn lag(&self, j: usize, k: usize) -> usize {
        self.data[j * self.p + k]
    }

    /// Lags from 0-based node `j` to every node.
    #[inline]
    pub fn row(&self, j: usize) -> &[usize] {
        &self.data[j * self.p..(j + 1) * self.p]
    }

    pub fn max_lag(&self) -> usize {
        self.data.iter().copied().max().unwrap_or(0)
    }
}

/// All-pairs hop distances of a [`NetworkGraph`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistanceMatrix(LagMatrix);

impl DistanceMatrix {
    /// Distance between 1-based nodes `j` and `k`.
    pub fn distance(&self, j: usize, k: usize) -> usize {
        self.0.lag(j - 1, k - 1)
    }

    pub fn as_lags(&self) -> &LagMatrix {
        &self.0
    }

    pub fn diameter(&self) -> usize {
        self.0.max_lag()
    }
}

impl Deref for DistanceMatrix {
    type Target = LagMatrix;

    fn deref(&self) -> &LagMatrix {
        &self.0
    }
}

/// Hop distances from 1-based `node` to every node, 0-based by target.
pub fn distances_from(g: &NetworkGraph, node: usize) -> Vec<usize> {
    bfs(g.adjacency(), node - 1)
}

/// Hop distances by one breadth-first search per node.
pub fn all_pairs_distances(g: &NetworkGraph) -> DistanceMatrix {
    let rows: Vec<Vec<usize>> = (0..g.p())
        .into_par_iter()
        .map(|s| bfs(g.adjacency(), s))
        .collect();
    DistanceMatrix(LagMatrix {
        p: g.p(),
        data: rows.concat(),
    })
}

/// Hop distances by Floyd-Warshall. `O(p^3)`; kept as a reference for
/// [`all_pairs_distances`].
pub fn floyd_warshall(g: &NetworkGraph) -> DistanceMatrix {
    let p = g.p();
    let inf = usize::MAX / 2;
    let mut d = vec![inf; p * p];
    for i in 0..p {
        d[i * p + i] = 0;
    }
    for (u, v) in g.edges() {
        d[(u - 1) * p + (v - 1)] = 1;
        d[(v - 1) * p + (u - 1)] = 1;
    }
    for k in 0..p {
        for i in 0..p {
            let dik = d[i * p + k];
            if dik == inf {
                continue;
            }
            for j in 0..p {
                let via = dik + d[k * p + j];
                if via < d[i * p + j] {
                    d[i * p + j] = via;
                }
            }
        }
    }
    DistanceMatrix(LagMatrix { p, data: d })
}

/// Identifiability count `m_G(C1)` for a true source `j_star` and change
/// time `z_star` on horizon `n`.
///
/// For each competing pair `(t, k)` in `[1, n-1] x [1, p]` other than
/// `(z_star, j_star)`, counts nodes `j` whose hypothesised spread time
/// `t + d(j, k)` is at least `c1 * (|z_star - t| + d(j_star, k))` away from
/// the true `z_star + d(j, j_star)`, and returns the minimum count.
pub fn identifiability_count(
    dist: &DistanceMatrix,
    c1: f64,
    z_star: usize,
    j_star: usize,
    n: usize,
) -> Result<usize> {
    let p = dist.p();
    validate_count_args(p, c1, z_star, n)?;
    if j_star == 0 || j_star > p {
        return Err(Error::NodeOutOfRange { node: j_star, p });
    }
    let src = dist.row(j_star - 1);
    (1..n)
        .into_par_iter()
        .map(|t| {
            let mut best = usize::MAX;
            for k in 0..p {
                let dt = z_star.abs_diff(t);
                let dsrc = src[k];
                if dt == 0 && dsrc == 0 {
                    continue;
                }
                let threshold = c1 * (dt + dsrc) as f64;
                let cand = dist.row(k);
                let shift = z_star as i64 - t as i64;
                let count = (0..p)
                    .filter(|&j| {
                        let gap = (shift + src[j] as i64 - cand[j] as i64).unsigned_abs();
                        gap as f64 >= threshold
                    })
                    .count();
                best = best.min(count);
            }
            best
        })
        .min()
        .filter(|&m| m != usize::MAX)
        .ok_or_else(|| Error::param("n", "no competing (time, node) pair exists"))
}

/// [`identifiability_count`] minimised over every source node, at a fixed
/// `z_star`.
pub fn identifiability_count_over_sources(
    dist: &DistanceMatrix,
    c1: f64,
    z_star: usize,
    n: usize,
) -> Result<usize> {
    validate_count_args(dist.p(), c1, z_star, n)?;
    (1..=dist.p())
        .map(|j| identifiability_count(dist, c1, z_star, j, n))
        .try_fold(usize::MAX, |acc, m| m.map(|m| acc.min(m)))
}

fn validate_count_args(p: usize, c1: f64, z_star: usize, n: usize) -> Result<()> {
    if !(c1 > 0.0 && c1.is_finite()) {
        return Err(Error::param("c1", format!("{c1} is not positive")));
    }
    if n < 2 || z_star == 0 || z_star >= n {
        return Err(Error::param(
            "z_star",
            format!("{z_star} is not in [1, {}]", n.saturating_sub(1)),
        ));
    }
    if p == 0 {
        return Err(Error::EmptyGraph);
    }
    Ok(())
}
