//! Straightforward O(n^2)..O(n^3) reference implementations.
//!
//! Everything here works on plain `Vec<Vec<f64>>` and uses nothing from the rest of the
//! crate, so agreement with the optimized paths is evidence rather than tautology. Only
//! tests should call these.

/// All-pairs Euclidean distances by double loop.
pub fn euclidean_distances(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            let mut s = 0.0;
            for k in 0..points[i].len() {
                let diff = points[i][k] - points[j][k];
                s += diff * diff;
            }
            d[i][j] = s.sqrt();
        }
    }
    d
}

/// `k` nearest neighbors of every row by full stable sort on `(distance, index)`.
pub fn knn(dist: &[Vec<f64>], k: usize) -> Vec<Vec<usize>> {
    let n = dist.len();
    (0..n)
        .map(|i| {
            let mut others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            others.sort_by(|&a, &b| dist[i][a].partial_cmp(&dist[i][b]).unwrap().then(a.cmp(&b)));
            others.truncate(k);
            others
        })
        .collect()
}

/// Floyd-Warshall over undirected weighted edges. Unreachable pairs stay infinite.
pub fn floyd_warshall(n: usize, edges: &[(usize, usize, f64)]) -> Vec<Vec<f64>> {
    let mut d = vec![vec![f64::INFINITY; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0.0;
    }
    for &(a, b, w) in edges {
        if w < d[a][b] {
            d[a][b] = w;
            d[b][a] = w;
        }
    }
    for m in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = d[i][m] + d[m][j];
                if via < d[i][j] {
                    d[i][j] = via;
                }
            }
        }
    }
    d
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
/// Returns ascending eigenvalues and the matching eigenvectors as rows.
pub fn jacobi_eigen(a: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut v = vec![vec![0.0; n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    off += m[i][j] * m[i][j];
                }
            }
        }
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k][p];
                    let mkq = m[k][q];
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p][k];
                    let mqk = m[q][k];
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for row in v.iter_mut() {
                    let vkp = row[p];
                    let vkq = row[q];
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| m[x][x].partial_cmp(&m[y][y]).unwrap());
    let values = order.iter().map(|&i| m[i][i]).collect();
    let vectors = order.iter().map(|&c| (0..n).map(|r| v[r][c]).collect()).collect();
    (values, vectors)
}

/// LLE reconstruction weights of `target` from `neighbors`, minimizing
/// `wᵀ (C + r I) w` subject to `sum w = 1` where `C` is the local Gram matrix and
/// `r = reg * trace(C) / k`. Solved through the KKT system by Gaussian elimination.
pub fn lle_weights(target: &[f64], neighbors: &[Vec<f64>], reg: f64) -> Vec<f64> {
    let k = neighbors.len();
    let diffs: Vec<Vec<f64>> = neighbors.iter().map(|nb| nb.iter().zip(target).map(|(a, b)| a - b).collect()).collect();
    let mut c = vec![vec![0.0; k]; k];
    for a in 0..k {
        for b in 0..k {
            c[a][b] = diffs[a].iter().zip(&diffs[b]).map(|(x, y)| x * y).sum();
        }
    }
    let trace: f64 = (0..k).map(|a| c[a][a]).sum();
    let r = reg * trace / k as f64;
    // [2(C + rI)  1] [w]   [0]
    // [   1ᵀ      0] [l] = [1]
    let size = k + 1;
    let mut sys = vec![vec![0.0; size + 1]; size];
    for a in 0..k {
        for b in 0..k {
            sys[a][b] = 2.0 * (c[a][b] + if a == b { r } else { 0.0 });
        }
        sys[a][k] = 1.0;
        sys[k][a] = 1.0;
    }
    sys[k][size] = 1.0;
    let sol = gauss_solve(sys);
    sol[..k].to_vec()
}

/// `|x - sum_j w_j nb_j|^2`.
pub fn reconstruction_error(target: &[f64], neighbors: &[Vec<f64>], w: &[f64]) -> f64 {
    (0..target.len())
        .map(|d| {
            let recon: f64 = neighbors.iter().zip(w).map(|(nb, wj)| wj * nb[d]).sum();
            (target[d] - recon).powi(2)
        })
        .sum()
}

/// Regularized local objective `wᵀ (C + r I) w` for the weights above.
pub fn lle_objective(target: &[f64], neighbors: &[Vec<f64>], reg: f64, w: &[f64]) -> f64 {
    let k = neighbors.len();
    let trace: f64 = neighbors.iter().map(|nb| nb.iter().zip(target).map(|(a, b)| (a - b).powi(2)).sum::<f64>()).sum();
    let r = reg * trace / k as f64;
    reconstruction_error(target, neighbors, w) + r * w.iter().map(|x| x * x).sum::<f64>()
}

fn gauss_solve(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&x, &y| a[x][col].abs().partial_cmp(&a[y][col].abs()).unwrap()).unwrap();
        a.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for c in col..=n {
                a[row][c] -= f * a[col][c];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut s = a[row][n];
        for c in row + 1..n {
            s -= a[row][c] * x[c];
        }
        x[row] = s / a[row][row];
    }
    x
}

/// Trustworthiness by explicit rank tables.
pub fn trustworthiness(x: &[Vec<f64>], y: &[Vec<f64>], k: usize) -> f64 {
    let n = x.len();
    let dx = euclidean_distances(x);
    let dy = euclidean_distances(y);
    let order_x = knn(&dx, n - 1);
    let nn_x = knn(&dx, k);
    let nn_y = knn(&dy, k);
    let mut penalty = 0.0;
    for i in 0..n {
        for &j in &nn_y[i] {
            if !nn_x[i].contains(&j) {
                let rank = order_x[i].iter().position(|&m| m == j).unwrap() + 1;
                penalty += (rank - k) as f64;
            }
        }
    }
    let (n, k) = (n as f64, k as f64);
    1.0 - 2.0 / (n * k * (2.0 * n - 3.0 * k - 1.0)) * penalty
}

/// Mean silhouette by double loop; singleton classes score 0.
pub fn silhouette(y: &[Vec<f64>], labels: &[usize]) -> f64 {
    let n = y.len();
    let d = euclidean_distances(y);
    let classes = labels.iter().max().unwrap() + 1;
    let mut total = 0.0;
    for i in 0..n {
        let mut sum = vec![0.0; classes];
        let mut count = vec![0usize; classes];
        for j in 0..n {
            if j != i {
                sum[labels[j]] += d[i][j];
                count[labels[j]] += 1;
            }
        }
        let own = labels[i];
        if count[own] == 0 {
            continue;
        }
        let a = sum[own] / count[own] as f64;
        let mut b = f64::INFINITY;
        for c in 0..classes {
            if c != own && count[c] > 0 {
                b = b.min(sum[c] / count[c] as f64);
            }
        }
        let m = a.max(b);
        if m > 0.0 {
            total += (b - a) / m;
        }
    }
    total / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobi_diagonalizes_known_matrix() {
        let (vals, vecs) = jacobi_eigen(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
        assert!((vals[0] - 1.0).abs() < 1e-14 && (vals[1] - 3.0).abs() < 1e-14);
        assert!((vecs[1][0].abs() - 0.5f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn floyd_warshall_path() {
        let d = floyd_warshall(3, &[(0, 1, 1.0), (1, 2, 2.0)]);
        assert_eq!(d[0][2], 3.0);
    }

    #[test]
    fn kkt_weights_midpoint() {
        let w = lle_weights(&[0.5], &[vec![0.0], vec![1.0]], 1e-3);
        assert!((w[0] - 0.5).abs() < 1e-12 && (w[1] - 0.5).abs() < 1e-12);
    }
}
