//! Reference implementations shared by the integration tests. Written
//! directly from the definitions, without the library's fast paths.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spreaddetect::cusum::CusumMatrix;
use spreaddetect::graph::NetworkGraph;
use spreaddetect::matrix::DataMatrix;

/// Q and L evaluated one `(j, t)` at a time, straight from the definition.
pub fn naive_stats(t: &CusumMatrix, dist: &[Vec<usize>]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let p = t.p();
    let n = t.n();
    let mut q = vec![vec![0.0; n - 1]; p];
    let mut l = vec![vec![0.0; n - 1]; p];
    for j in 0..p {
        for s in 1..n {
            let mut sq = 0.0;
            let mut lin = 0.0;
            for k in 0..p {
                let when = s + dist[j][k];
                if when < n {
                    let v = t.get(k, when - 1);
                    sq += v * v - 1.0;
                    lin += v;
                }
            }
            q[j][s - 1] = sq;
            l[j][s - 1] = lin.abs();
        }
    }
    (q, l)
}

/// Plain Floyd-Warshall on an adjacency matrix, independent of the library.
pub fn reference_distances(g: &NetworkGraph) -> Vec<Vec<usize>> {
    let p = g.p();
    let inf = usize::MAX / 4;
    let mut d = vec![vec![inf; p]; p];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0;
    }
    for (u, v) in g.edges() {
        d[u - 1][v - 1] = 1;
        d[v - 1][u - 1] = 1;
    }
    for k in 0..p {
        for i in 0..p {
            for j in 0..p {
                if d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    d
}

pub fn random_connected(p: usize, extra: f64, seed: u64) -> NetworkGraph {
    // Random spanning tree plus random extra edges.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for v in 2..=p {
        edges.push((rng.gen_range(1..v), v));
    }
    for u in 1..=p {
        for v in u + 1..=p {
            if rng.gen_bool(extra) {
                edges.push((u, v));
            }
        }
    }
    NetworkGraph::from_edge_list(p, &edges).unwrap()
}

pub fn random_data(p: usize, n: usize, seed: u64) -> DataMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (0..p)
        .map(|_| (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect())
        .collect();
    DataMatrix::from_rows(rows).unwrap()
}

