//! Laplacian Eigenmaps and Locally Linear Embedding.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::dataset::{EmbeddingMatrix, Points};
use crate::embedding::Embedding;
use crate::error::{Error, Result};
use crate::linalg::{fix_sign, symmetric_eigen, Side};
use crate::neighbors::{component_sizes, knn_graph, pairwise_distances, AffinityMatrix, KnnGraph, Metric};

/// Eigenvalues at or below this fraction of the largest computed one count as trivial.
pub const TRIVIAL_EIGENVALUE_RATIO: f64 = 1e-9;
pub const DEFAULT_LLE_REG: f64 = 1e-3;

/// Laplacian Eigenmaps output with the spectrum it was read from.
#[derive(Debug, Clone)]
pub struct SpectralEmbedding {
    pub embedding: Embedding,
    /// Generalized eigenvalue of each output column.
    pub eigenvalues: Vec<f64>,
    /// The discarded eigenvalue of the constant direction.
    pub trivial_eigenvalue: f64,
    /// Row sums of `W`.
    pub degrees: Vec<f64>,
}

/// Solves `L y = lambda D y` for the `m` smallest non-trivial eigenpairs via the
/// symmetric normalization `I - D^{-1/2} W D^{-1/2}`. Output columns are `D^{-1/2} v`
/// rescaled to unit length, so they do not depend on the overall scale of `W`.
pub fn laplacian_eigenmaps(w: &AffinityMatrix, m: usize) -> Result<Embedding> {
    laplacian_eigenmaps_detailed(w, m).map(|s| s.embedding)
}

pub fn laplacian_eigenmaps_detailed(w: &AffinityMatrix, m: usize) -> Result<SpectralEmbedding> {
    let n = w.n();
    if m == 0 || m + 1 > n {
        return Err(Error::Config(format!("target dimension {m} needs at least {} samples, got {n}", m + 1)));
    }
    if !w.is_symmetric() {
        let wm = w.weights();
        return Err(Error::NonSymmetric { max_asymmetry: (wm - wm.transpose()).amax() });
    }
    let weights = w.weights();
    let degrees: Vec<f64> = (0..n).map(|i| weights.row(i).sum()).collect();
    if let Some(node) = degrees.iter().position(|&d| d <= 0.0) {
        return Err(Error::ZeroDegreeNode { node });
    }
    let sizes = component_sizes(&w.components());
    if sizes.len() > 1 {
        return Err(Error::DisconnectedGraph { sizes });
    }

    let inv_sqrt: Vec<f64> = degrees.iter().map(|d| 1.0 / d.sqrt()).collect();
    let mut lap = DMatrix::from_fn(n, n, |i, j| -weights[(i, j)] * inv_sqrt[i] * inv_sqrt[j]);
    for i in 0..n {
        lap[(i, i)] += 1.0;
    }
    let eig = symmetric_eigen(&lap, m + 1, Side::Smallest)?;
    let top = eig.values.iter().copied().fold(0.0f64, f64::max);
    let trivial: Vec<usize> = (0..=m).filter(|&j| eig.values[j] <= TRIVIAL_EIGENVALUE_RATIO * top).collect();
    if trivial.len() != 1 {
        // Only a near-disconnected graph produces several numerically zero eigenvalues.
        return Err(Error::DisconnectedGraph { sizes: vec![n; trivial.len().max(1)] });
    }
    let mut columns = Vec::with_capacity(m);
    let mut values = Vec::with_capacity(m);
    for j in (0..=m).filter(|j| *j != trivial[0]) {
        let mut y: Vec<f64> = (0..n).map(|i| eig.vectors[(i, j)] * inv_sqrt[i]).collect();
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        y.iter_mut().for_each(|v| *v /= norm);
        fix_sign(&mut y);
        columns.push(y);
        values.push(eig.values[j]);
    }
    let embedding = Embedding::from_columns("laplacian_eigenmaps", &columns)?.with_param("dim", m);
    Ok(SpectralEmbedding { embedding, eigenvalues: values, trivial_eigenvalue: eig.values[trivial[0]], degrees })
}

/// Sparse reconstruction weights: for each point, `(neighbor index, weight)` pairs
/// summing to one.
pub type LleWeights = Vec<Vec<(usize, f64)>>;

/// Solves the local constrained least-squares problem of every point.
pub fn lle_weights<P: Points + Sync + ?Sized>(x: &P, graph: &KnnGraph, reg: f64) -> Result<LleWeights> {
    if !(reg >= 0.0) {
        return Err(Error::Config(format!("regularization must be >= 0, got {reg}")));
    }
    (0..x.n_points())
        .into_par_iter()
        .map(|i| {
            let nbs: Vec<usize> = graph.neighbors(i).iter().map(|nb| nb.index).collect();
            let w = local_weights(x, i, &nbs, reg)?;
            Ok(nbs.into_iter().zip(w).collect())
        })
        .collect()
}

fn local_weights<P: Points + ?Sized>(x: &P, i: usize, nbs: &[usize], reg: f64) -> Result<Vec<f64>> {
    let k = nbs.len();
    let xi = x.point(i);
    let diffs = DMatrix::from_fn(x.dim(), k, |d, c| x.point(nbs[c])[d] - xi[d]);
    let mut gram = diffs.transpose() * &diffs;
    let shift = reg * gram.trace() / k as f64;
    for a in 0..k {
        gram[(a, a)] += shift;
    }
    let chol = gram.cholesky().ok_or(Error::SingularLocalGram { point: i })?;
    let diag = chol.l_dirty().diagonal();
    let (lo, hi) = diag.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !(lo > 1e-7 * hi) {
        return Err(Error::SingularLocalGram { point: i });
    }
    let w = chol.solve(&DVector::from_element(k, 1.0));
    let total = w.sum();
    Ok(w.iter().map(|v| v / total).collect())
}

/// `sum_i |x_i - sum_j w_ij x_j|^2`.
pub fn reconstruction_error<P: Points + ?Sized>(x: &P, weights: &LleWeights) -> f64 {
    weights
        .iter()
        .enumerate()
        .map(|(i, row)| {
            (0..x.dim())
                .map(|d| {
                    let recon: f64 = row.iter().map(|&(j, w)| w * x.point(j)[d]).sum();
                    (x.point(i)[d] - recon).powi(2)
                })
                .sum::<f64>()
        })
        .sum()
}

/// Locally Linear Embedding with Euclidean neighborhoods.
pub fn lle(x: &EmbeddingMatrix, k: usize, m: usize, reg: f64) -> Result<Embedding> {
    let d = pairwise_distances(x, Metric::Euclidean)?;
    let graph = knn_graph(&d, k)?;
    lle_with_graph(x, &graph, m, reg)
}

/// LLE on a precomputed neighborhood graph: weights from the local problems, then the
/// bottom eigenvectors of `M = (I - W)ᵀ(I - W)` with the constant one skipped.
pub fn lle_with_graph<P: Points + Sync + ?Sized>(x: &P, graph: &KnnGraph, m: usize, reg: f64) -> Result<Embedding> {
    let n = x.n_points();
    if m == 0 || m + 1 > n {
        return Err(Error::Config(format!("target dimension {m} needs at least {} samples, got {n}", m + 1)));
    }
    let weights = lle_weights(x, graph, reg)?;
    let mut cost = DMatrix::<f64>::identity(n, n);
    for (i, row) in weights.iter().enumerate() {
        for &(j, w) in row {
            cost[(i, j)] -= w;
            cost[(j, i)] -= w;
        }
        for &(j, wj) in row {
            for &(l, wl) in row {
                cost[(j, l)] += wj * wl;
            }
        }
    }
    let eig = symmetric_eigen(&cost, m + 1, Side::Smallest)?;
    let columns: Vec<Vec<f64>> = (1..=m).map(|j| eig.vectors.column(j).iter().copied().collect()).collect();
    Ok(Embedding::from_columns("lle", &columns)?.with_param("k", graph.k()).with_param("dim", m).with_param("reg", reg))
}
