//! Geodesic distances, classical MDS, ISOMAP and SMACOF metric MDS.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::dataset::EmbeddingMatrix;
use crate::embedding::Embedding;
use crate::error::{Error, Result};
use crate::linalg::{double_center, symmetric_eigen, Side};
use crate::neighbors::{
    component_sizes, connected_components, knn_graph, pairwise_distances, DistanceMatrix, KnnGraph, Metric,
};
use crate::rng::Rng;

pub const DEFAULT_SMACOF_ITER: usize = 300;
pub const DEFAULT_SMACOF_EPS: f64 = 1e-6;

/// Pairs closer than this are skipped by the Guttman transform.
const COINCIDENT: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq)]
struct HeapEntry {
    dist: f64,
    node: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.dist.total_cmp(&self.dist).then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn dijkstra(adj: &[Vec<(usize, f64)>], source: usize) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; adj.len()];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(HeapEntry { dist: 0.0, node: source });
    while let Some(HeapEntry { dist: d, node }) = heap.pop() {
        if d > dist[node] {
            continue;
        }
        for &(next, w) in &adj[node] {
            let cand = d + w;
            if cand < dist[next] {
                dist[next] = cand;
                heap.push(HeapEntry { dist: cand, node: next });
            }
        }
    }
    dist
}

/// All-pairs shortest paths over the undirected kNN graph (one Dijkstra run per source).
pub fn geodesic_distances(graph: &KnnGraph) -> Result<DistanceMatrix> {
    let sizes = component_sizes(&connected_components(graph));
    if sizes.len() > 1 {
        return Err(Error::DisconnectedGraph { sizes });
    }
    let n = graph.n();
    let adj: Vec<Vec<(usize, f64)>> = graph
        .undirected_edges()
        .into_iter()
        .map(|l| l.into_iter().map(|nb| (nb.index, nb.distance)).collect())
        .collect();
    let mut data = vec![0.0; n * n];
    data.par_chunks_mut(n).enumerate().for_each(|(s, col)| {
        col.copy_from_slice(&dijkstra(&adj, s));
    });
    let mut g = DMatrix::from_vec(n, n, data);
    // A path summed from either end can differ in the last bit.
    for j in 0..n {
        for i in 0..j {
            let m = g[(i, j)].min(g[(j, i)]);
            g[(i, j)] = m;
            g[(j, i)] = m;
        }
    }
    DistanceMatrix::new(g)
}

/// Coordinates from the top `m` eigenpairs of the double-centered squared distances.
/// Negative eigenvalues are clamped to zero.
pub fn classical_mds(d: &DistanceMatrix, m: usize) -> Result<Embedding> {
    let n = d.n();
    if m == 0 || m > n {
        return Err(Error::Config(format!("target dimension {m} outside 1..={n}")));
    }
    let b = double_center(&d.squared());
    let eig = symmetric_eigen(&b, n, Side::Smallest)?;
    let lambda_max = eig.values[n - 1].max(0.0);
    let lambda_min = eig.values[0];
    if lambda_min < 0.0 && lambda_min.abs() > 1e-8 * lambda_max {
        log::warn!("classical MDS: non-Euclidean input, clamping negative eigenvalues (min {lambda_min:e})");
    }
    let columns: Vec<Vec<f64>> = (0..m)
        .map(|c| {
            let j = n - 1 - c;
            let scale = eig.values[j].max(0.0).sqrt();
            eig.vectors.column(j).iter().map(|v| v * scale).collect()
        })
        .collect();
    Ok(Embedding::from_columns("classical_mds", &columns)?.with_param("dim", m))
}

/// ISOMAP on Euclidean distances.
pub fn isomap(x: &EmbeddingMatrix, k: usize, m: usize) -> Result<Embedding> {
    let d = pairwise_distances(x, Metric::Euclidean)?;
    isomap_from_distances(&d, k, m)
}

pub fn isomap_from_distances(d: &DistanceMatrix, k: usize, m: usize) -> Result<Embedding> {
    let graph = knn_graph(d, k)?;
    let geo = geodesic_distances(&graph)?;
    let mut e = classical_mds(&geo, m)?;
    e.algorithm = "isomap".into();
    Ok(e.with_param("k", k))
}

/// Result of a SMACOF run.
#[derive(Debug, Clone)]
pub struct SmacofResult {
    pub embedding: Embedding,
    /// Raw stress of the starting configuration followed by the stress after each iteration.
    pub stress: Vec<f64>,
    pub iterations: usize,
}

impl SmacofResult {
    pub fn final_stress(&self) -> f64 {
        *self.stress.last().unwrap()
    }
}

/// `sum_{i<j} (d_ij - |y_i - y_j|)^2` for a row-major `n x m` configuration.
pub fn raw_stress(d: &DistanceMatrix, y: &[f64], m: usize) -> f64 {
    let n = d.n();
    let per_row: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let yi = &y[i * m..(i + 1) * m];
            let row = d.row(i);
            (i + 1..n)
                .map(|j| {
                    let yj = &y[j * m..(j + 1) * m];
                    let dist = yi.iter().zip(yj).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                    (row[j] - dist).powi(2)
                })
                .sum()
        })
        .collect();
    per_row.iter().sum()
}

/// Raw stress divided by `sum_{i<j} d_ij^2`.
pub fn normalized_stress(d: &DistanceMatrix, y: &[f64], m: usize) -> f64 {
    let n = d.n();
    let total: f64 = (0..n).map(|i| (i + 1..n).map(|j| d.get(i, j).powi(2)).sum::<f64>()).sum();
    if total == 0.0 {
        return 0.0;
    }
    raw_stress(d, y, m) / total
}

/// Metric MDS by stress majorization from a uniform `[-1, 1]^m` start drawn from `seed`.
pub fn smacof_mds(d: &DistanceMatrix, m: usize, max_iter: usize, eps: f64, seed: u64) -> Result<SmacofResult> {
    let mut rng = Rng::new(seed);
    let init: Vec<f64> = (0..d.n() * m).map(|_| rng.uniform_in(-1.0, 1.0)).collect();
    let mut r = smacof_from(d, init, m, max_iter, eps)?;
    r.embedding = r.embedding.with_seed(seed);
    Ok(r)
}

/// SMACOF from a given row-major starting configuration. Stops when the relative stress
/// decrease drops below `eps` or after `max_iter` Guttman transforms.
pub fn smacof_from(d: &DistanceMatrix, init: Vec<f64>, m: usize, max_iter: usize, eps: f64) -> Result<SmacofResult> {
    let n = d.n();
    if max_iter == 0 {
        return Err(Error::Config("max_iter must be at least 1".into()));
    }
    if m == 0 || init.len() != n * m {
        return Err(Error::ShapeMismatch {
            expected: format!("{n}x{m} start"),
            found: format!("{} values", init.len()),
        });
    }
    let mut y = init;
    let mut stress = vec![raw_stress(d, &y, m)];
    let mut iterations = 0;
    while iterations < max_iter {
        y = guttman_transform(d, &y, m);
        iterations += 1;
        let current = raw_stress(d, &y, m);
        if !current.is_finite() {
            return Err(Error::NumericalOverflow { iteration: iterations });
        }
        let previous = *stress.last().unwrap();
        stress.push(current);
        if previous == 0.0 || (previous - current) / previous < eps {
            break;
        }
    }
    let embedding =
        Embedding::new("smacof", m, y)?.with_param("dim", m).with_param("max_iter", max_iter).with_param("eps", eps);
    Ok(SmacofResult { embedding, stress, iterations })
}

/// `Y <- B(Y) Y / n` with `b_ij = -d_ij / |y_i - y_j|` off the diagonal.
fn guttman_transform(d: &DistanceMatrix, y: &[f64], m: usize) -> Vec<f64> {
    let n = d.n();
    let mut out = vec![0.0; n * m];
    out.par_chunks_mut(m).enumerate().for_each(|(i, row_out)| {
        let yi = &y[i * m..(i + 1) * m];
        let row = d.row(i);
        let mut diag = 0.0;
        for j in 0..n {
            if j == i {
                continue;
            }
            let yj = &y[j * m..(j + 1) * m];
            let dist = yi.iter().zip(yj).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            if dist < COINCIDENT {
                continue;
            }
            let b = -row[j] / dist;
            diag -= b;
            for c in 0..m {
                row_out[c] += b * yj[c];
            }
        }
        for c in 0..m {
            row_out[c] = (row_out[c] + diag * yi[c]) / n as f64;
        }
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{generate, oracle, Generator, SyntheticSpec};
    use crate::linalg::{procrustes_error, to_matrix};
    use crate::quality::{rank_correlation, trustworthiness};

    fn dist_of(rows: &[Vec<f64>]) -> DistanceMatrix {
        let x = EmbeddingMatrix::from_rows((0..rows.len()).map(|i| i.to_string()).collect(), rows).unwrap();
        pairwise_distances(&x, Metric::Euclidean).unwrap()
    }

    fn random_rows(n: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = Rng::new(seed);
        (0..n).map(|_| (0..dim).map(|_| rng.normal()).collect()).collect()
    }

    #[test]
    fn path_sum_on_line() {
        let d = dist_of(&[vec![0.0], vec![1.0], vec![3.0]]);
        let g = knn_graph(&d, 1).unwrap();
        let geo = geodesic_distances(&g).unwrap();
        assert_eq!(geo.get(0, 2), 3.0);
    }

    #[test]
    fn complete_graph_reduces_to_direct_distances() {
        let d = dist_of(&random_rows(15, 3, 1));
        let geo = geodesic_distances(&knn_graph(&d, 14).unwrap()).unwrap();
        assert!((geo.matrix() - d.matrix()).amax() <= 1e-12);
    }

    #[test]
    fn matches_floyd_warshall() {
        for seed in 0..5 {
            let rows = random_rows(30, 3, seed);
            let d = dist_of(&rows);
            let g = knn_graph(&d, 4).unwrap();
            let Ok(geo) = geodesic_distances(&g) else { continue };
            let mut edges = Vec::new();
            for i in 0..30 {
                for nb in g.neighbors(i) {
                    edges.push((i, nb.index, nb.distance));
                }
            }
            let fw = oracle::floyd_warshall(30, &edges);
            for i in 0..30 {
                for j in 0..30 {
                    assert!((geo.get(i, j) - fw[i][j]).abs() <= 1e-12);
                    assert!(geo.get(i, j) >= d.get(i, j) - 1e-12);
                }
            }
        }
    }

    #[test]
    fn disconnected_reports_sizes() {
        let mut rows = random_rows(5, 2, 3);
        rows.extend(random_rows(5, 2, 4).into_iter().map(|r| vec![r[0] + 100.0, r[1]]));
        let d = dist_of(&rows);
        let err = geodesic_distances(&knn_graph(&d, 2).unwrap()).unwrap_err();
        assert_eq!(err.to_string(), "DisconnectedGraph components=2 sizes=5,5");
    }

    #[test]
    fn classical_mds_cases() {
        let zero = DistanceMatrix::new(DMatrix::zeros(4, 4)).unwrap();
        assert!(classical_mds(&zero, 2).unwrap().coords().iter().all(|&v| v == 0.0));

        let square = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0]];
        let e = classical_mds(&dist_of(&square), 2).unwrap();
        let truth = DMatrix::from_fn(4, 2, |i, j| square[i][j]);
        assert!(procrustes_error(&truth, &to_matrix(&e)).unwrap() <= 1e-9);

        let pts = random_rows(10, 2, 8);
        let e = classical_mds(&dist_of(&pts), 2).unwrap();
        let truth = DMatrix::from_fn(10, 2, |i, j| pts[i][j]);
        assert!(procrustes_error(&truth, &to_matrix(&e)).unwrap() <= 1e-9);
    }

    #[test]
    fn isomap_unrolls_a_line() {
        let s = generate(&SyntheticSpec::new(Generator::Line1d, 40, 3)).unwrap();
        let e = isomap(&s.dataset.embeddings, 2, 1).unwrap();
        let truth = DMatrix::from_column_slice(40, 1, s.ground_truth.values());
        assert!(procrustes_error(&truth, &to_matrix(&e)).unwrap() <= 1e-9);
        assert!((rank_correlation(&e.column(0), s.ground_truth.values()).abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn isomap_with_full_graph_is_classical_mds() {
        let rows = random_rows(20, 2, 6);
        let d = dist_of(&rows);
        let a = isomap_from_distances(&d, 19, 2).unwrap();
        let b = classical_mds(&d, 2).unwrap();
        assert!(procrustes_error(&to_matrix(&a), &to_matrix(&b)).unwrap() <= 1e-9);
    }

    #[test]
    fn isomap_swiss_roll() {
        let s = generate(&SyntheticSpec::new(Generator::SwissRoll, 1000, 7)).unwrap();
        let e = isomap(&s.dataset.embeddings, 10, 2).unwrap();
        assert!(trustworthiness(&s.ground_truth, &e, 12).unwrap() >= 0.95);
    }

    #[test]
    fn smacof_two_points_exact() {
        let d = DistanceMatrix::new(DMatrix::from_row_slice(2, 2, &[0.0, 3.25, 3.25, 0.0])).unwrap();
        let r = smacof_mds(&d, 2, 5, 1e-9, 11).unwrap();
        let e = &r.embedding;
        let dist = ((e.row(0)[0] - e.row(1)[0]).powi(2) + (e.row(0)[1] - e.row(1)[1]).powi(2)).sqrt();
        assert!((dist - 3.25).abs() <= 1e-14);
    }

    #[test]
    fn smacof_monotone_and_realizable() {
        for seed in 0..4 {
            let pts = random_rows(20, 2, 100 + seed);
            let d = dist_of(&pts);
            let r = smacof_mds(&d, 2, 500, 0.0, seed).unwrap();
            for w in r.stress.windows(2) {
                assert!(w[1] <= w[0] + 1e-12 * w[0].max(1.0), "{} -> {}", w[0], w[1]);
            }
            assert!(normalized_stress(&d, r.embedding.coords(), 2) <= 1e-6);
        }
    }

    #[test]
    fn smacof_rejects_zero_iterations() {
        let d = dist_of(&random_rows(4, 2, 1));
        assert!(smacof_mds(&d, 2, 0, 1e-6, 0).is_err());
    }
}
