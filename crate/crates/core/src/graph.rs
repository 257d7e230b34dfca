//! Similarity graphs over embedding rows and the renormalized propagation
//! matrix `S = D̂^-½ Â D̂^-½`, `Â = A + I`.
//!
//! Neighbor search is exact brute force (`O(n²·d)`), evaluated per node in
//! parallel and merged in node order, so results never depend on thread
//! scheduling.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array2, ArrayView1, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::EmbeddingDataset;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    #[default]
    Euclidean,
    /// `1 − cos(a, b)`.
    #[serde(alias = "cosine")]
    CosineDistance,
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(Metric::Euclidean),
            "cosine" | "cosine-distance" => Ok(Metric::CosineDistance),
            other => Err(Error::invalid("metric", format!("unknown metric `{other}`"))),
        }
    }
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Metric::Euclidean => "euclidean",
            Metric::CosineDistance => "cosine-distance",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    Knn,
    Epsilon,
    Full,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "knn" => Ok(Method::Knn),
            "epsilon" | "eps" => Ok(Method::Epsilon),
            "full" => Ok(Method::Full),
            other => Err(Error::invalid("graph method", format!("unknown method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphBuildConfig {
    pub method: Method,
    /// Neighbor count, used by [`Method::Knn`].
    pub k: usize,
    /// Distance threshold, used by [`Method::Epsilon`].
    pub eps: f64,
    pub metric: Metric,
}

impl Default for GraphBuildConfig {
    fn default() -> Self {
        GraphBuildConfig {
            method: Method::Knn,
            k: 5,
            eps: 1.0,
            metric: Metric::Euclidean,
        }
    }
}

impl GraphBuildConfig {
    pub fn knn(k: usize) -> Self {
        GraphBuildConfig {
            k,
            ..Default::default()
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        match self.method {
            Method::Knn if self.k < 1 || self.k + 1 > n => Err(Error::invalid(
                "graph config",
                format!("k = {} outside [1, n-1] for n = {n}", self.k),
            )),
            Method::Epsilon if self.eps.is_nan() || self.eps <= 0.0 => Err(Error::invalid(
                "graph config",
                format!("eps = {} must be > 0", self.eps),
            )),
            _ => Ok(()),
        }
    }

    pub fn describe(&self) -> String {
        match self.method {
            Method::Knn => format!("{}-NN graph, {} metric", self.k, self.metric),
            Method::Epsilon => format!("epsilon graph (eps = {}), {} metric", self.eps, self.metric),
            Method::Full => "fully connected graph".to_owned(),
        }
    }
}

pub fn build_graph(ds: &EmbeddingDataset, cfg: &GraphBuildConfig) -> Result<SparseAdjacency> {
    cfg.validate(ds.n())?;
    match cfg.method {
        Method::Knn => knn_graph(ds, cfg.k, cfg.metric),
        Method::Epsilon => epsilon_graph(ds, cfg.eps, cfg.metric),
        Method::Full => Ok(full_graph(ds.n())),
    }
}

pub fn pairwise_distance(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>, metric: Metric) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::shape(
            "pairwise_distance",
            format!("dimensions {} and {}", a.len(), b.len()),
        ));
    }
    match metric {
        Metric::Euclidean => Ok(a
            .iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()),
        Metric::CosineDistance => {
            let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
            for (x, y) in a.iter().zip(b) {
                dot += x * y;
                na += x * x;
                nb += y * y;
            }
            if na == 0.0 || nb == 0.0 {
                return Err(Error::invalid("cosine distance", "zero vector"));
            }
            // Rounding can push the cosine a hair past ±1.
            Ok((1.0 - dot / (na.sqrt() * nb.sqrt())).max(0.0))
        }
    }
}

fn check_cosine_rows(x: ArrayView2<'_, f64>, metric: Metric) -> Result<()> {
    if metric == Metric::CosineDistance {
        if let Some(i) = x.rows().into_iter().position(|r| r.iter().all(|&v| v == 0.0)) {
            return Err(Error::invalid(
                "cosine distance",
                format!("row {i} is the zero vector"),
            ));
        }
    }
    Ok(())
}

/// Undirected, unweighted graph without self-loops. Edges are stored once,
/// as `(i, j)` with `i < j`, sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseAdjacency {
    n: usize,
    edges: Vec<(usize, usize)>,
}

impl SparseAdjacency {
    /// Builds a graph from arbitrary pairs; order within a pair does not
    /// matter. Self-loops, duplicates and out-of-range nodes are rejected.
    pub fn from_edges(n: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut edges: Vec<(usize, usize)> = Vec::new();
        for (a, b) in pairs {
            if a == b {
                return Err(Error::invalid("graph", format!("self-loop on node {a}")));
            }
            if a.max(b) >= n {
                return Err(Error::invalid(
                    "graph",
                    format!("edge ({a}, {b}) out of range for n = {n}"),
                ));
            }
            edges.push((a.min(b), a.max(b)));
        }
        edges.sort_unstable();
        if let Some(w) = edges.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::invalid(
                "graph",
                format!("duplicate edge ({}, {})", w[0].0, w[0].1),
            ));
        }
        Ok(SparseAdjacency { n, edges })
    }

    fn from_sorted_unique(n: usize, edges: Vec<(usize, usize)>) -> Self {
        debug_assert!(edges.windows(2).all(|w| w[0] < w[1]));
        SparseAdjacency { n, edges }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges.binary_search(&(a.min(b), a.max(b))).is_ok()
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n];
        for &(i, j) in &self.edges {
            deg[i] += 1;
            deg[j] += 1;
        }
        deg
    }

    /// Sorted neighbor list of every node.
    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(i, j) in &self.edges {
            adj[i].push(j);
            adj[j].push(i);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    /// The graph with node `i` renamed to `perm_inv[i]`.
    pub fn relabeled(&self, perm_inv: &[usize]) -> Self {
        let edges = self.edges.iter().map(|&(i, j)| (perm_inv[i], perm_inv[j]));
        SparseAdjacency::from_edges(self.n, edges).expect("relabeling preserves validity")
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut a = Array2::zeros((self.n, self.n));
        for &(i, j) in &self.edges {
            a[[i, j]] = 1.0;
            a[[j, i]] = 1.0;
        }
        a
    }
}

/// Exact k-NN graph with OR-symmetrization: `{i, j}` is an edge when either
/// node is among the `k` nearest of the other. Distance ties go to the lower
/// index, so every node keeps exactly `k` neighbors before symmetrization.
pub fn knn_graph(ds: &EmbeddingDataset, k: usize, metric: Metric) -> Result<SparseAdjacency> {
    let n = ds.n();
    if k < 1 || k + 1 > n {
        return Err(Error::invalid("knn graph", format!("k = {k} outside [1, n-1] for n = {n}")));
    }
    check_cosine_rows(ds.x.view(), metric)?;

    let lists: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|i| -> Result<Vec<usize>> {
            let mut cand = Vec::with_capacity(n - 1);
            for j in (0..n).filter(|&j| j != i) {
                cand.push((pairwise_distance(ds.row(i), ds.row(j), metric)?, j));
            }
            let by_dist = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
            if k < cand.len() {
                cand.select_nth_unstable_by(k - 1, by_dist);
                cand.truncate(k);
            }
            Ok(cand.into_iter().map(|(_, j)| j).collect())
        })
        .collect::<Result<_>>()?;

    let mut edges: Vec<(usize, usize)> = lists
        .iter()
        .enumerate()
        .flat_map(|(i, js)| js.iter().map(move |&j| (i.min(j), i.max(j))))
        .collect();
    edges.sort_unstable();
    edges.dedup();
    Ok(SparseAdjacency::from_sorted_unique(n, edges))
}

/// Connects every pair at distance strictly below `eps`.
pub fn epsilon_graph(ds: &EmbeddingDataset, eps: f64, metric: Metric) -> Result<SparseAdjacency> {
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::invalid("epsilon graph", format!("eps = {eps} must be > 0")));
    }
    check_cosine_rows(ds.x.view(), metric)?;
    let n = ds.n();
    let rows: Vec<Vec<(usize, usize)>> = (0..n)
        .into_par_iter()
        .map(|i| -> Result<Vec<(usize, usize)>> {
            let mut out = Vec::new();
            for j in i + 1..n {
                if pairwise_distance(ds.row(i), ds.row(j), metric)? < eps {
                    out.push((i, j));
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(SparseAdjacency::from_sorted_unique(n, rows.concat()))
}

pub fn full_graph(n: usize) -> SparseAdjacency {
    let edges = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    SparseAdjacency::from_sorted_unique(n, edges)
}

/// `S = D̂^-½ (A + I) D̂^-½` in CSR form. Column indices within each row are
/// ascending and the diagonal is always present.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagationMatrix {
    n: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<f64>,
    degrees: Vec<f64>,
}

pub fn normalize(adj: &SparseAdjacency) -> PropagationMatrix {
    let n = adj.n();
    let neighbors = adj.neighbors();
    // d̂ first, then scale.
    let degrees: Vec<f64> = neighbors.iter().map(|l| (l.len() + 1) as f64).collect();

    let nnz = 2 * adj.num_edges() + n;
    let mut indptr = Vec::with_capacity(n + 1);
    let mut indices = Vec::with_capacity(nnz);
    let mut data = Vec::with_capacity(nnz);
    indptr.push(0);
    for (i, list) in neighbors.iter().enumerate() {
        let split = list.partition_point(|&j| j < i);
        let cols = list[..split].iter().copied().chain([i]).chain(list[split..].iter().copied());
        for j in cols {
            indices.push(j);
            data.push(1.0 / (degrees[i] * degrees[j]).sqrt());
        }
        indptr.push(indices.len());
    }
    PropagationMatrix {
        n,
        indptr,
        indices,
        data,
        degrees,
    }
}

impl PropagationMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    /// Diagonal of `D̂`, i.e. `1 + deg(i)`.
    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    /// `(column, value)` pairs of row `i`, ascending by column.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.indptr[i]..self.indptr[i + 1];
        self.indices[r.clone()].iter().copied().zip(self.data[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.indptr[i]..self.indptr[i + 1];
        match self.indices[r.clone()].binary_search(&j) {
            Ok(k) => self.data[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut s = Array2::zeros((self.n, self.n));
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                s[[i, j]] = v;
            }
        }
        s
    }

    /// `S · M`. Each output row accumulates its terms in ascending column
    /// order. `S` is symmetric, so this also serves for `Sᵀ · M`.
    pub fn matmul(&self, m: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if m.nrows() != self.n {
            return Err(Error::shape(
                "sparse matmul",
                format!("S is {0}x{0}, right operand has {1} rows", self.n, m.nrows()),
            ));
        }
        let mut out = Array2::zeros((self.n, m.ncols()));
        out.outer_iter_mut()
            .into_par_iter()
            .enumerate()
            .for_each(|(i, mut out_row)| {
                for (j, s) in self.row(i) {
                    out_row.scaled_add(s, &m.row(j));
                }
            });
        Ok(out)
    }
}

const EDGES: &str = "edge list";

/// Canonical edge-list text: optional `#nodes=<n>` header (written only when
/// the graph has isolated nodes), then one sorted `i\tj` line per edge.
pub fn to_edge_list(adj: &SparseAdjacency) -> String {
    let mut out = String::new();
    let implied = adj.edges.iter().map(|&(_, j)| j + 1).max().unwrap_or(0);
    if adj.degrees().contains(&0) || implied != adj.n {
        writeln!(out, "#nodes={}", adj.n).unwrap();
    }
    for &(i, j) in &adj.edges {
        writeln!(out, "{i}\t{j}").unwrap();
    }
    out
}

pub fn parse_edge_list(text: &str) -> Result<SparseAdjacency> {
    let mut declared: Option<usize> = None;
    let mut pairs = Vec::new();
    let mut lines_of = Vec::new();
    for (lineno, line) in text.lines().enumerate().map(|(i, l)| (i + 1, l)) {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(v) = comment.trim().strip_prefix("nodes=") {
                declared = Some(
                    v.trim()
                        .parse()
                        .map_err(|_| Error::parse(EDGES, lineno, format!("bad node count {v:?}")))?,
                );
            }
            continue;
        }
        let mut fields = line.split('\t');
        let (Some(a), Some(b), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(Error::parse(EDGES, lineno, format!("expected `i<TAB>j`, got {line:?}")));
        };
        let parse = |s: &str| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| Error::parse(EDGES, lineno, format!("bad node index {s:?}")))
        };
        let (a, b) = (parse(a)?, parse(b)?);
        if a == b {
            return Err(Error::parse(EDGES, lineno, format!("self-loop on node {a}")));
        }
        pairs.push((a.min(b), a.max(b)));
        lines_of.push(lineno);
    }

    let implied = pairs.iter().map(|&(_, j)| j + 1).max().unwrap_or(0);
    let n = match declared {
        Some(n) if n < implied => {
            return Err(Error::parse(
                EDGES,
                1,
                format!("#nodes={n} but edges reference node {}", implied - 1),
            ))
        }
        Some(n) => n,
        None if implied == 0 => return Err(Error::parse(EDGES, 1, "empty edge list needs a #nodes header")),
        None => implied,
    };

    let mut seen = std::collections::HashSet::with_capacity(pairs.len());
    for (&p, &lineno) in pairs.iter().zip(&lines_of) {
        if !seen.insert(p) {
            return Err(Error::parse(EDGES, lineno, format!("duplicate edge ({}, {})", p.0, p.1)));
        }
    }
    SparseAdjacency::from_edges(n, pairs)
}

pub fn save_graph(adj: &SparseAdjacency, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_edge_list(adj)).map_err(|e| Error::io(path, e))
}

pub fn load_graph(path: impl AsRef<Path>) -> Result<SparseAdjacency> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_edge_list(&text)
}
