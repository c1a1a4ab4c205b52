//! Pairwise distances, k-nearest-neighbor graphs and affinity kernels.

use std::collections::VecDeque;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{write_binary_matrix, Points};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Euclidean,
    Cosine,
}

impl FromStr for Metric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(Metric::Euclidean),
            "cosine" => Ok(Metric::Cosine),
            other => Err(Error::Config(format!("unknown metric {other}"))),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Euclidean => "euclidean",
            Metric::Cosine => "cosine",
        })
    }
}

/// Symmetric, non-negative, zero-diagonal `n x n` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    values: DMatrix<f64>,
}

impl DistanceMatrix {
    /// Validates and wraps a matrix. Symmetry is checked exactly.
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        let n = values.nrows();
        if values.ncols() != n {
            return Err(Error::ShapeMismatch {
                expected: "square matrix".into(),
                found: format!("{}x{}", values.nrows(), values.ncols()),
            });
        }
        for j in 0..n {
            if values[(j, j)] != 0.0 {
                return Err(Error::InvalidInput(format!("non-zero diagonal at {j}")));
            }
            for i in 0..j {
                let v = values[(i, j)];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::InvalidInput(format!("invalid distance {v} at ({i},{j})")));
                }
                if v != values[(j, i)] {
                    return Err(Error::NonSymmetric { max_asymmetry: (v - values[(j, i)]).abs() });
                }
            }
        }
        Ok(Self { values })
    }

    /// Symmetrizes by `(a + aᵀ)/2` and zeroes the diagonal before validating.
    pub fn from_nearly_symmetric(mut values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() == values.ncols() {
            let n = values.nrows();
            for j in 0..n {
                values[(j, j)] = 0.0;
                for i in 0..j {
                    let m = 0.5 * (values[(i, j)] + values[(j, i)]);
                    values[(i, j)] = m;
                    values[(j, i)] = m;
                }
            }
        }
        Self::new(values)
    }

    pub(crate) fn from_trusted(values: DMatrix<f64>) -> Self {
        debug_assert!(values.is_square());
        Self { values }
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }

    /// Distances from `i` to every point. Relies on symmetry: column `i` is row `i`.
    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.n();
        &self.values.as_slice()[i * n..(i + 1) * n]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.values
    }

    /// Entrywise squares.
    pub fn squared(&self) -> DMatrix<f64> {
        self.values.map(|v| v * v)
    }

    /// Dumps the matrix in the binary-f64 format.
    pub fn write_binary(&self, path: &Path) -> Result<()> {
        write_binary_matrix(path, self.n(), self.n(), self.values.as_slice())
    }
}

/// Exact dense distances. Each entry is computed independently, so the result does not
/// depend on how many workers share the rows.
pub fn pairwise_distances<P: Points + Sync + ?Sized>(x: &P, metric: Metric) -> Result<DistanceMatrix> {
    let n = x.n_points();
    let norms: Vec<f64> = match metric {
        Metric::Euclidean => Vec::new(),
        Metric::Cosine => {
            let norms: Vec<f64> = (0..n).map(|i| dot(x.point(i), x.point(i)).sqrt()).collect();
            if let Some(row) = norms.iter().position(|&v| v == 0.0) {
                return Err(Error::ZeroNormRow { row });
            }
            norms
        }
    };
    let mut data = vec![0.0; n * n];
    data.par_chunks_mut(n.max(1)).enumerate().for_each(|(j, col)| {
        let pj = x.point(j);
        for (i, slot) in col.iter_mut().enumerate() {
            if i == j {
                continue;
            }
            let pi = x.point(i);
            *slot = match metric {
                Metric::Euclidean => squared_euclidean(pi, pj).sqrt(),
                Metric::Cosine => (1.0 - dot(pi, pj) / (norms[i] * norms[j])).max(0.0),
            };
        }
    });
    Ok(DistanceMatrix::from_trusted(DMatrix::from_vec(n, n, data)))
}

fn squared_euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub distance: f64,
}

/// For every point, its `k` nearest other points in ascending distance order.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnGraph {
    k: usize,
    neighbors: Vec<Vec<Neighbor>>,
}

impl KnnGraph {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.neighbors.len()
    }

    pub fn neighbors(&self, i: usize) -> &[Neighbor] {
        &self.neighbors[i]
    }

    /// Undirected adjacency: an edge exists when either endpoint selected the other.
    /// Lists are sorted by neighbor index.
    pub fn undirected_edges(&self) -> Vec<Vec<Neighbor>> {
        let mut adj: Vec<Vec<Neighbor>> = vec![Vec::new(); self.n()];
        for (i, list) in self.neighbors.iter().enumerate() {
            for nb in list {
                adj[i].push(*nb);
                adj[nb.index].push(Neighbor { index: i, distance: nb.distance });
            }
        }
        for list in &mut adj {
            list.sort_by(|a, b| a.index.cmp(&b.index));
            list.dedup_by_key(|nb| nb.index);
        }
        adj
    }

    pub fn contains_edge(&self, i: usize, j: usize) -> bool {
        self.neighbors[i].iter().any(|nb| nb.index == j) || self.neighbors[j].iter().any(|nb| nb.index == i)
    }
}

/// The `k` smallest off-diagonal distances of every row; ties go to the smaller index.
pub fn knn_graph(d: &DistanceMatrix, k: usize) -> Result<KnnGraph> {
    let n = d.n();
    if k == 0 || k >= n {
        return Err(Error::KTooLarge { k, n });
    }
    let neighbors = (0..n)
        .into_par_iter()
        .map(|i| {
            let row = d.row(i);
            let mut cand: Vec<(f64, usize)> = (0..n).filter(|&j| j != i).map(|j| (row[j], j)).collect();
            let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
            if k < cand.len() {
                cand.select_nth_unstable_by(k - 1, cmp);
                cand.truncate(k);
            }
            cand.sort_by(cmp);
            cand.into_iter().map(|(distance, index)| Neighbor { index, distance }).collect()
        })
        .collect();
    Ok(KnnGraph { k, neighbors })
}

/// Square matrix of non-negative edge weights.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityMatrix {
    weights: DMatrix<f64>,
    symmetric: bool,
}

impl AffinityMatrix {
    pub fn new(weights: DMatrix<f64>) -> Result<Self> {
        if !weights.is_square() {
            return Err(Error::ShapeMismatch {
                expected: "square matrix".into(),
                found: format!("{}x{}", weights.nrows(), weights.ncols()),
            });
        }
        if let Some(v) = weights.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidInput(format!("invalid affinity weight {v}")));
        }
        let symmetric = weights == weights.transpose();
        Ok(Self { weights, symmetric })
    }

    pub fn n(&self) -> usize {
        self.weights.nrows()
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.weights[(i, j)]
    }

    /// Multiplies every weight by `c > 0`.
    pub fn scaled(&self, c: f64) -> Self {
        Self { weights: &self.weights * c, symmetric: self.symmetric }
    }

    /// Connected components of the graph with an edge wherever `w(i,j) > 0`, `i != j`.
    pub fn components(&self) -> Vec<usize> {
        let n = self.n();
        let adj: Vec<Vec<usize>> = (0..n)
            .map(|i| (0..n).filter(|&j| j != i && (self.weights[(i, j)] > 0.0 || self.weights[(j, i)] > 0.0)).collect())
            .collect();
        label_components(&adj)
    }
}

/// Gaussian kernel `exp(-d^2 / (2 sigma^2))` with a zero diagonal. With `sparsify`, only
/// pairs joined by a kNN edge in either direction keep their weight.
pub fn gaussian_affinity(d: &DistanceMatrix, sigma: f64, sparsify: Option<&KnnGraph>) -> Result<AffinityMatrix> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::NonPositiveSigma(sigma));
    }
    let n = d.n();
    let denom = 2.0 * sigma * sigma;
    let mut w = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            let v = d.get(i, j);
            (-(v * v) / denom).exp()
        }
    });
    if let Some(graph) = sparsify {
        let mut keep = DMatrix::from_element(n, n, false);
        for i in 0..n {
            for nb in graph.neighbors(i) {
                keep[(i, nb.index)] = true;
                keep[(nb.index, i)] = true;
            }
        }
        for j in 0..n {
            for i in 0..n {
                if !keep[(i, j)] {
                    w[(i, j)] = 0.0;
                }
            }
        }
    }
    AffinityMatrix::new(w)
}

/// Adaptive-bandwidth kernel
/// `w(i,j) = (exp(-(d/eps_i)^alpha) + exp(-(d/eps_j)^alpha)) / 2`, where `eps_i` is the
/// distance from `i` to its k-th neighbor. The diagonal is 1.
pub fn alpha_decay_kernel(d: &DistanceMatrix, knn: &KnnGraph, alpha: f64) -> Result<AffinityMatrix> {
    if !(alpha >= 1.0) {
        return Err(Error::Config(format!("alpha must be >= 1, got {alpha}")));
    }
    if knn.k() < 2 {
        return Err(Error::Config(format!("alpha-decay kernel needs k >= 2, got {}", knn.k())));
    }
    let n = d.n();
    let mut bandwidth = Vec::with_capacity(n);
    for i in 0..n {
        let eps = knn.neighbors(i)[knn.k() - 1].distance;
        if eps <= 0.0 {
            return Err(Error::ZeroBandwidth { point: i });
        }
        bandwidth.push(eps);
    }
    let w = DMatrix::from_fn(n, n, |i, j| {
        let v = d.get(i, j);
        0.5 * ((-(v / bandwidth[i]).powf(alpha)).exp() + (-(v / bandwidth[j]).powf(alpha)).exp())
    });
    AffinityMatrix::new(w)
}

/// Component label per node, edges taken as undirected. Labels are assigned by BFS from
/// the lowest unvisited node, so they are `0..c` in order of each component's smallest node.
pub fn connected_components(graph: &KnnGraph) -> Vec<usize> {
    let adj: Vec<Vec<usize>> =
        graph.undirected_edges().into_iter().map(|l| l.into_iter().map(|nb| nb.index).collect()).collect();
    label_components(&adj)
}

pub(crate) fn label_components(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let mut label = vec![usize::MAX; n];
    let mut next = 0;
    let mut queue = VecDeque::new();
    for start in 0..n {
        if label[start] != usize::MAX {
            continue;
        }
        label[start] = next;
        queue.push_back(start);
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if label[v] == usize::MAX {
                    label[v] = next;
                    queue.push_back(v);
                }
            }
        }
        next += 1;
    }
    label
}

/// Member count of each component label.
pub fn component_sizes(labels: &[usize]) -> Vec<usize> {
    let count = labels.iter().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0; count];
    for &l in labels {
        sizes[l] += 1;
    }
    sizes
}
