//! Exact t-SNE: perplexity calibration and gradient descent on the O(n^2) objective.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::EmbeddingMatrix;
use crate::embedding::Embedding;
use crate::error::{Error, Result};
use crate::neighbors::{pairwise_distances, DistanceMatrix, Metric};
use crate::rng::Rng;

const SIGMA_MIN: f64 = 1e-20;
const SIGMA_MAX: f64 = 1e20;
const MAX_BISECTIONS: usize = 64;
const PERPLEXITY_TOL: f64 = 1e-5;
/// Floor applied to `p_ij` inside the logarithm of the loss.
pub const P_FLOOR: f64 = 1e-12;
const MIN_GAIN: f64 = 0.01;

/// Symmetric joint input probabilities.
#[derive(Debug, Clone)]
pub struct CalibratedAffinities {
    p: DMatrix<f64>,
    perplexity: f64,
    sigmas: Vec<f64>,
}

impl CalibratedAffinities {
    /// Wraps an already-computed joint distribution. Bandwidths are left as NaN.
    pub fn from_joint(p: DMatrix<f64>) -> Result<Self> {
        let n = p.nrows();
        if n < 2 || p.ncols() != n {
            return Err(Error::ShapeMismatch {
                expected: "square matrix with n >= 2".into(),
                found: format!("{}x{}", p.nrows(), p.ncols()),
            });
        }
        let mut asym: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let v = p[(i, j)];
                if !v.is_finite() || v < 0.0 || (i == j && v != 0.0) {
                    return Err(Error::InvalidInput(format!("joint probability ({i},{j})={v}")));
                }
                asym = asym.max((v - p[(j, i)]).abs());
            }
        }
        if asym > 1e-12 {
            return Err(Error::NonSymmetric { max_asymmetry: asym });
        }
        let total = p.sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidInput(format!("joint probabilities sum to {total}")));
        }
        Ok(CalibratedAffinities { p, perplexity: f64::NAN, sigmas: vec![f64::NAN; n] })
    }

    pub fn p(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn perplexity(&self) -> f64 {
        self.perplexity
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    pub fn n(&self) -> usize {
        self.p.nrows()
    }
}

/// Conditional distribution `p_{j|i}` for bandwidth `sigma`, plus its entropy in bits.
pub fn conditional_row(d: &DistanceMatrix, i: usize, sigma: f64) -> (Vec<f64>, f64) {
    let row = d.row(i);
    let n = row.len();
    let min_sq = (0..n).filter(|&j| j != i).map(|j| row[j] * row[j]).fold(f64::INFINITY, f64::min);
    let scale = 1.0 / (2.0 * sigma * sigma);
    let mut p: Vec<f64> =
        (0..n).map(|j| if j == i { 0.0 } else { (-(row[j] * row[j] - min_sq) * scale).exp() }).collect();
    let total: f64 = p.iter().sum();
    let mut h = 0.0;
    for v in p.iter_mut() {
        *v /= total;
        if *v > 0.0 {
            h -= *v * v.log2();
        }
    }
    (p, h)
}

fn calibrate_row(d: &DistanceMatrix, i: usize, perplexity: f64) -> Result<(Vec<f64>, f64)> {
    let fail = || Error::CalibrationFailure { point: i, perplexity };
    let perp_at = |s: f64| conditional_row(d, i, s).1.exp2();
    if perp_at(SIGMA_MIN) > perplexity + PERPLEXITY_TOL || perp_at(SIGMA_MAX) < perplexity - PERPLEXITY_TOL {
        return Err(fail());
    }
    let (mut lo, mut hi) = (SIGMA_MIN, SIGMA_MAX);
    for _ in 0..MAX_BISECTIONS {
        let mid = (lo * hi).sqrt();
        let (p, h) = conditional_row(d, i, mid);
        let perp = h.exp2();
        if (perp - perplexity).abs() <= PERPLEXITY_TOL {
            return Ok((p, mid));
        }
        if perp > perplexity {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Err(fail())
}

/// Per-point bandwidth search followed by symmetrization `P = (P_{j|i} + P_{i|j}) / 2n`.
pub fn calibrate_perplexity(d: &DistanceMatrix, perplexity: f64) -> Result<CalibratedAffinities> {
    let n = d.n();
    if !(perplexity > 1.0 && perplexity < n as f64) {
        return Err(Error::Config(format!("perplexity {perplexity} outside (1, {n})")));
    }
    if perplexity > (n - 1) as f64 / 3.0 {
        log::warn!("perplexity {perplexity} is large for {n} points");
    }
    let rows: Vec<(Vec<f64>, f64)> =
        (0..n).into_par_iter().map(|i| calibrate_row(d, i, perplexity)).collect::<Result<_>>()?;
    let denom = 2.0 * n as f64;
    let p = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { (rows[i].0[j] + rows[j].0[i]) / denom });
    Ok(CalibratedAffinities { p, perplexity, sigmas: rows.into_iter().map(|r| r.1).collect() })
}

/// Optimizer settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub dim: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub final_momentum: f64,
    pub momentum_switch_iter: usize,
    pub exaggeration: f64,
    pub exaggeration_iters: usize,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        TsneConfig {
            perplexity: 30.0,
            dim: 2,
            learning_rate: 200.0,
            momentum: 0.5,
            final_momentum: 0.8,
            momentum_switch_iter: 250,
            exaggeration: 12.0,
            exaggeration_iters: 250,
            max_iter: 1000,
            seed: 0,
        }
    }
}

impl TsneConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.perplexity > 1.0 && self.perplexity < n as f64) {
            return Err(Error::Config(format!("perplexity {} outside (1, {n})", self.perplexity)));
        }
        if !(self.exaggeration >= 1.0) {
            return Err(Error::Config(format!("exaggeration {} below 1", self.exaggeration)));
        }
        if !(self.learning_rate > 0.0) || self.dim == 0 || self.max_iter == 0 {
            return Err(Error::Config("learning_rate, dim and max_iter must be positive".into()));
        }
        Ok(())
    }
}

/// Map plus `KL(P||Q)` before the first update and after every update.
#[derive(Debug, Clone)]
pub struct TsneResult {
    pub embedding: Embedding,
    pub kl: Vec<f64>,
}

impl TsneResult {
    pub fn final_kl(&self) -> f64 {
        *self.kl.last().unwrap()
    }
}

fn kernel(yi: &[f64], yj: &[f64]) -> f64 {
    1.0 / (1.0 + yi.iter().zip(yj).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
}

fn normalizer(y: &[f64], m: usize) -> f64 {
    let n = y.len() / m;
    let rows: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let yi = &y[i * m..(i + 1) * m];
            (0..n).filter(|&j| j != i).map(|j| kernel(yi, &y[j * m..(j + 1) * m])).sum()
        })
        .collect();
    rows.iter().sum()
}

/// KL divergence and its gradient; `p` is multiplied by `exaggeration` in the gradient only.
/// Rows are independent and each is summed in index order, so the result does not depend
/// on the thread count.
fn kl_and_gradient(p: &DMatrix<f64>, y: &[f64], m: usize, exaggeration: f64) -> (f64, Vec<f64>) {
    let n = p.nrows();
    let z = normalizer(y, m);
    let mut grad = vec![0.0; n * m];
    let kl_rows: Vec<f64> = grad
        .par_chunks_mut(m)
        .enumerate()
        .map(|(i, g)| {
            let yi = &y[i * m..(i + 1) * m];
            let prow = p.column(i);
            let mut kl = 0.0;
            for j in 0..n {
                if j == i {
                    continue;
                }
                let yj = &y[j * m..(j + 1) * m];
                let num = kernel(yi, yj);
                let q = num / z;
                let pij = prow[j];
                if pij > 0.0 {
                    kl += pij * (pij.max(P_FLOOR) / q).ln();
                }
                let coeff = 4.0 * (exaggeration * pij - q) * num;
                for c in 0..m {
                    g[c] += coeff * (yi[c] - yj[c]);
                }
            }
            kl
        })
        .collect();
    (kl_rows.iter().sum(), grad)
}

/// `KL(P||Q)` for a row-major `n x m` map.
pub fn kl_divergence(p: &CalibratedAffinities, y: &[f64], m: usize) -> f64 {
    kl_and_gradient(&p.p, y, m, 1.0).0
}

/// Analytic gradient `4 sum_j (p_ij - q_ij) (1 + |y_i - y_j|^2)^-1 (y_i - y_j)`.
pub fn gradient(p: &CalibratedAffinities, y: &[f64], m: usize) -> Vec<f64> {
    kl_and_gradient(&p.p, y, m, 1.0).1
}

/// Gradient descent with momentum, early exaggeration and per-coordinate adaptive gains.
pub fn tsne_embed(p: &CalibratedAffinities, cfg: &TsneConfig) -> Result<TsneResult> {
    let n = p.n();
    let m = cfg.dim;
    if !p.perplexity.is_nan() {
        cfg.validate(n)?;
    } else if !(cfg.learning_rate > 0.0) || m == 0 || cfg.max_iter == 0 || !(cfg.exaggeration >= 1.0) {
        return Err(Error::Config("invalid optimizer settings".into()));
    }
    let mut rng = Rng::new(cfg.seed);
    let mut y: Vec<f64> = (0..n * m).map(|_| 1e-4 * rng.normal()).collect();
    let mut update = vec![0.0; n * m];
    let mut gains = vec![1.0f64; n * m];
    let mut kl = Vec::with_capacity(cfg.max_iter + 1);

    for iter in 0..cfg.max_iter {
        let exaggeration = if iter < cfg.exaggeration_iters { cfg.exaggeration } else { 1.0 };
        let momentum = if iter < cfg.momentum_switch_iter { cfg.momentum } else { cfg.final_momentum };
        // The loss term uses the unexaggerated P.
        let (loss, grad) = kl_and_gradient(&p.p, &y, m, exaggeration);
        kl.push(loss);
        if !kl[iter].is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NumericalOverflow { iteration: iter });
        }
        for idx in 0..n * m {
            let g = grad[idx];
            gains[idx] =
                if (g > 0.0) != (update[idx] > 0.0) { gains[idx] + 0.2 } else { (gains[idx] * 0.8).max(MIN_GAIN) };
            update[idx] = momentum * update[idx] - cfg.learning_rate * gains[idx] * g;
            y[idx] += update[idx];
        }
        for c in 0..m {
            let mean = (0..n).map(|i| y[i * m + c]).sum::<f64>() / n as f64;
            for i in 0..n {
                y[i * m + c] -= mean;
            }
        }
    }
    let last = kl_divergence(p, &y, m);
    if !last.is_finite() || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalOverflow { iteration: cfg.max_iter });
    }
    kl.push(last);

    let mut embedding = Embedding::new("tsne", m, y)?
        .with_param("dim", m)
        .with_param("learning_rate", cfg.learning_rate)
        .with_param("exaggeration", cfg.exaggeration)
        .with_param("exaggeration_iters", cfg.exaggeration_iters)
        .with_param("max_iter", cfg.max_iter)
        .with_seed(cfg.seed);
    if !p.perplexity.is_nan() {
        embedding = embedding.with_param("perplexity", p.perplexity);
    }
    Ok(TsneResult { embedding, kl })
}

/// Euclidean distances, calibration and optimization in one call.
pub fn tsne(x: &EmbeddingMatrix, cfg: &TsneConfig) -> Result<TsneResult> {
    cfg.validate(x.n_samples())?;
    let d = pairwise_distances(x, Metric::Euclidean)?;
    let p = calibrate_perplexity(&d, cfg.perplexity)?;
    tsne_embed(&p, cfg)
}
