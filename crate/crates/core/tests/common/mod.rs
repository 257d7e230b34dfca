//! Reference implementations used as oracles. These deliberately avoid the
//! crate's sparse kernels and ndarray products: plain `Vec<Vec<f64>>` and
//! naive loops throughout.

#![allow(dead_code)]

use rand::Rng;
use textgcn::dataset::EmbeddingDataset;
use textgcn::graph::SparseAdjacency;

pub type Dense = Vec<Vec<f64>>;

pub fn to_dense(m: &ndarray::Array2<f64>) -> Dense {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

pub fn zeros(r: usize, c: usize) -> Dense {
    vec![vec![0.0; c]; r]
}

pub fn matmul(a: &Dense, b: &Dense) -> Dense {
    let (n, k, m) = (a.len(), b.len(), b[0].len());
    let mut out = zeros(n, m);
    for i in 0..n {
        for j in 0..m {
            let mut acc = 0.0;
            for t in 0..k {
                acc += a[i][t] * b[t][j];
            }
            out[i][j] = acc;
        }
    }
    out
}

pub fn max_abs_diff(a: &Dense, b: &Dense) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(r, s)| r.iter().zip(s).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max)
}

/// `D̂^-½ (A + I) D̂^-½` as three explicit dense matrices multiplied out.
pub fn dense_propagation(adj: &SparseAdjacency) -> Dense {
    let n = adj.n();
    let mut a_hat = zeros(n, n);
    for &(i, j) in adj.edges() {
        a_hat[i][j] = 1.0;
        a_hat[j][i] = 1.0;
    }
    for (i, row) in a_hat.iter_mut().enumerate() {
        row[i] += 1.0;
    }
    let mut d_inv_sqrt = zeros(n, n);
    for i in 0..n {
        let deg: f64 = a_hat[i].iter().sum();
        d_inv_sqrt[i][i] = 1.0 / deg.sqrt();
    }
    matmul(&matmul(&d_inv_sqrt, &a_hat), &d_inv_sqrt)
}

pub struct DenseOutput {
    pub z: Dense,
}

/// `softmax(S · ReLU(S · X · θ1) · θ2)` with naive loops.
pub fn dense_forward(s: &Dense, x: &Dense, theta1: &Dense, theta2: &Dense) -> DenseOutput {
    let mut h = matmul(&matmul(s, x), theta1);
    for row in &mut h {
        for v in row.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
    }
    let logits = matmul(&matmul(s, &h), theta2);
    let z = logits
        .iter()
        .map(|row| {
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = row.iter().map(|v| (v - m).exp()).collect();
            let sum: f64 = e.iter().sum();
            e.iter().map(|v| v / sum).collect()
        })
        .collect();
    DenseOutput { z }
}

/// `−Σ_{k∈labeled} ln Z[k][class_k]`.
pub fn dense_loss(z: &Dense, labeled: &[usize], classes: &[usize]) -> f64 {
    labeled.iter().zip(classes).map(|(&k, &c)| -z[k][c].ln()).sum()
}

/// Every node's `k` nearest by a full sort over `(distance, index)`, then
/// OR-symmetrized.
pub fn knn_oracle(x: &Dense, k: usize) -> Vec<(usize, usize)> {
    let n = x.len();
    let mut edges = std::collections::BTreeSet::new();
    for i in 0..n {
        let mut all: Vec<(f64, usize)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| {
                let d2: f64 = x[i].iter().zip(&x[j]).map(|(a, b)| (a - b) * (a - b)).sum();
                (d2.sqrt(), j)
            })
            .collect();
        all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        for &(_, j) in &all[..k] {
            edges.insert((i.min(j), i.max(j)));
        }
    }
    edges.into_iter().collect()
}

pub fn random_matrix(rng: &mut impl Rng, r: usize, c: usize, scale: f64) -> ndarray::Array2<f64> {
    ndarray::Array2::from_shape_simple_fn((r, c), || rng.random_range(-scale..scale))
}

pub fn dataset_from(x: ndarray::Array2<f64>) -> EmbeddingDataset {
    let ids = (0..x.nrows()).map(|i| format!("p{i}")).collect();
    EmbeddingDataset::new(ids, x, None, 2).unwrap()
}

/// Each node links to `k` random distinct others, then OR-symmetrize.
pub fn random_knn_style_graph(rng: &mut impl Rng, n: usize, k: usize) -> SparseAdjacency {
    let mut set = std::collections::BTreeSet::new();
    for i in 0..n {
        let mut others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        for _ in 0..k.min(n - 1) {
            let pick = others.swap_remove(rng.random_range(0..others.len()));
            set.insert((i.min(pick), i.max(pick)));
        }
    }
    SparseAdjacency::from_edges(n, set).unwrap()
}

/// Erdős–Rényi graph with edge probability `p`.
pub fn random_graph(rng: &mut impl Rng, n: usize, p: f64) -> SparseAdjacency {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(p) {
                edges.push((i, j));
            }
        }
    }
    SparseAdjacency::from_edges(n, edges).unwrap()
}
