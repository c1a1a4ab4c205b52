//! PHATE: diffusion operator, entropy-based timescale, potential distances and MDS readout.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dataset::{EmbeddingMatrix, Points};
use crate::embedding::Embedding;
use crate::error::{Error, Result};
use crate::geodesic::{classical_mds, smacof_from, smacof_mds, DEFAULT_SMACOF_EPS, DEFAULT_SMACOF_ITER};
use crate::linalg::symmetric_eigenvalues;
use crate::neighbors::{alpha_decay_kernel, knn_graph, pairwise_distances, AffinityMatrix, DistanceMatrix, Metric};

/// Added inside the logarithm of the potential transform.
pub const LOG_FLOOR: f64 = 1e-7;
/// Eigenvalues at or below this magnitude are left out of the entropy.
const ZERO_EIGENVALUE: f64 = 1e-12;

/// Row-stochastic `P = D^-1 W` with its spectrum and a cache of requested powers.
#[derive(Debug, Clone)]
pub struct DiffusionOperator {
    p: DMatrix<f64>,
    spectrum: Vec<f64>,
    powers: BTreeMap<usize, DMatrix<f64>>,
}

/// Builds the operator; the spectrum comes from the symmetric conjugate `D^-1/2 W D^-1/2`.
pub fn diffusion_operator(w: &AffinityMatrix) -> Result<DiffusionOperator> {
    if !w.is_symmetric() {
        let max_asymmetry = (w.weights() - w.weights().transpose()).amax();
        return Err(Error::NonSymmetric { max_asymmetry });
    }
    let n = w.n();
    let weights = w.weights();
    let degree: Vec<f64> = (0..n).map(|i| weights.row(i).sum()).collect();
    if let Some(row) = degree.iter().position(|&d| !(d > 0.0)) {
        return Err(Error::ZeroRowSum { row });
    }
    let p = DMatrix::from_fn(n, n, |i, j| weights[(i, j)] / degree[i]);
    let inv_sqrt: Vec<f64> = degree.iter().map(|d| 1.0 / d.sqrt()).collect();
    let conj = DMatrix::from_fn(n, n, |i, j| weights[(i, j)] * inv_sqrt[i] * inv_sqrt[j]);
    let spectrum = symmetric_eigenvalues(&conj)?;
    Ok(DiffusionOperator { p, spectrum, powers: BTreeMap::new() })
}

impl DiffusionOperator {
    pub fn n(&self) -> usize {
        self.p.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.p
    }

    /// Eigenvalues in ascending order.
    pub fn spectrum(&self) -> &[f64] {
        &self.spectrum
    }

    /// `P^t` by repeated multiplication, starting from the largest cached power below `t`.
    pub fn power(&mut self, t: usize) -> &DMatrix<f64> {
        assert!(t >= 1, "diffusion power must be at least 1");
        if !self.powers.contains_key(&t) {
            let (mut have, mut m) = match self.powers.range(..t).next_back() {
                Some((&s, m)) => (s, m.clone()),
                None => (1, self.p.clone()),
            };
            while have < t {
                m = &m * &self.p;
                have += 1;
            }
            self.powers.insert(t, m);
        }
        &self.powers[&t]
    }
}

/// Shannon entropy of the normalized `|lambda|^t` for `t = 1..=t_max`.
pub fn von_neumann_entropy(op: &DiffusionOperator, t_max: usize) -> Result<Vec<f64>> {
    let mags: Vec<f64> = op.spectrum.iter().map(|l| l.abs()).filter(|&l| l > ZERO_EIGENVALUE).collect();
    if mags.len() < 2 {
        return Err(Error::DegenerateSpectrum { nonzero: mags.len() });
    }
    let top = mags.iter().cloned().fold(0.0, f64::max);
    Ok((1..=t_max)
        .map(|t| {
            // Dividing by the top magnitude first keeps large powers away from underflow.
            let w: Vec<f64> = mags.iter().map(|l| (l / top).powi(t as i32)).collect();
            let total: f64 = w.iter().sum();
            -w.iter().map(|x| x / total).filter(|&e| e > 0.0).map(|e| e * e.ln()).sum::<f64>()
        })
        .collect())
}

/// Index (1-based `t`) of the point farthest from the chord joining the first and last
/// entries. Ties go to the smallest `t`.
pub fn knee(values: &[f64]) -> usize {
    let n = values.len();
    if n <= 2 {
        return 1;
    }
    let (x0, y0) = (1.0, values[0]);
    let (x1, y1) = (n as f64, values[n - 1]);
    let (dx, dy) = (x1 - x0, y1 - y0);
    let norm = (dx * dx + dy * dy).sqrt();
    let mut best = (1, f64::NEG_INFINITY);
    for (idx, &v) in values.iter().enumerate() {
        let x = (idx + 1) as f64;
        let dist = (dy * (x - x0) - dx * (v - y0)).abs() / norm;
        if dist > best.1 {
            best = (idx + 1, dist);
        }
    }
    best.0
}

/// Diffusion time at the knee of the entropy curve over `1..=t_max`.
pub fn select_t(op: &DiffusionOperator, t_max: usize) -> Result<usize> {
    if t_max < 2 {
        return Err(Error::Config(format!("t_max must be at least 2, got {t_max}")));
    }
    Ok(knee(&von_neumann_entropy(op, t_max)?))
}

/// Row distances between `-log(P^t + 1e-7)`.
pub fn potential_distances(op: &mut DiffusionOperator, t: usize) -> Result<DistanceMatrix> {
    if t == 0 {
        return Err(Error::Config("diffusion time must be at least 1".into()));
    }
    let n = op.n();
    let pt = op.power(t);
    let mut values = Vec::with_capacity(n * n);
    for i in 0..n {
        values.extend(pt.row(i).iter().map(|v| -(v + LOG_FLOOR).ln()));
    }
    let u = EmbeddingMatrix::from_row_major(n, values)?;
    pairwise_distances(&u, Metric::Euclidean)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhateConfig {
    pub k: usize,
    pub alpha: f64,
    pub dim: usize,
    /// Fixed diffusion time; chosen by [`select_t`] when absent.
    pub t: Option<usize>,
    pub t_max: usize,
    pub max_iter: usize,
    pub eps: f64,
    pub seed: u64,
}

impl Default for PhateConfig {
    fn default() -> Self {
        PhateConfig {
            k: 5,
            alpha: 40.0,
            dim: 2,
            t: None,
            t_max: 100,
            max_iter: DEFAULT_SMACOF_ITER,
            eps: DEFAULT_SMACOF_EPS,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PhateResult {
    pub embedding: Embedding,
    pub t: usize,
    /// Entropy curve for `t = 1..=t_max`; empty when `t` was given.
    pub entropy: Vec<f64>,
    pub stress: Vec<f64>,
}

/// Euclidean distances, then [`phate_from_distances`].
pub fn phate_embed<P: Points + Sync + ?Sized>(x: &P, cfg: &PhateConfig) -> Result<PhateResult> {
    phate_from_distances(&pairwise_distances(x, Metric::Euclidean)?, cfg)
}

/// kNN graph, alpha-decay kernel, diffusion operator, timescale, potential distances and
/// SMACOF started from classical MDS of the potential distances.
pub fn phate_from_distances(d: &DistanceMatrix, cfg: &PhateConfig) -> Result<PhateResult> {
    if cfg.k < 2 {
        return Err(Error::Config(format!("PHATE needs k >= 2, got {}", cfg.k)));
    }
    let graph = knn_graph(d, cfg.k)?;
    let w = alpha_decay_kernel(d, &graph, cfg.alpha)?;
    let mut op = diffusion_operator(&w)?;
    let (t, entropy) = match cfg.t {
        Some(t) => (t, Vec::new()),
        None => {
            if cfg.t_max < 2 {
                return Err(Error::Config(format!("t_max must be at least 2, got {}", cfg.t_max)));
            }
            let h = von_neumann_entropy(&op, cfg.t_max)?;
            (knee(&h), h)
        }
    };
    let potential = potential_distances(&mut op, t)?;
    let init = classical_mds(&potential, cfg.dim)?;
    let run = if init.coords().iter().all(|&v| v == 0.0) {
        log::warn!("PHATE: degenerate MDS start, using a random one");
        smacof_mds(&potential, cfg.dim, cfg.max_iter, cfg.eps, cfg.seed)?
    } else {
        smacof_from(&potential, init.coords().to_vec(), cfg.dim, cfg.max_iter, cfg.eps)?
    };
    let mut embedding = run.embedding;
    embedding.algorithm = "phate".into();
    let embedding = embedding
        .with_param("k", cfg.k)
        .with_param("alpha", cfg.alpha)
        .with_param("t", t)
        .with_param("t_max", cfg.t_max)
        .with_param("dim", cfg.dim)
        .with_seed(cfg.seed);
    Ok(PhateResult { embedding, t, entropy, stress: run.stress })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{generate, Generator, SyntheticSpec};
    use crate::geodesic::raw_stress;
    use crate::linalg::principal_scores;
    use crate::quality::{rank_correlation, silhouette};
    use crate::rng::Rng;
    use proptest::prelude::*;

    fn random_affinity(n: usize, seed: u64) -> AffinityMatrix {
        let mut rng = Rng::new(seed);
        let mut w = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = rng.uniform();
                w[(i, j)] = v;
                w[(j, i)] = v;
            }
        }
        AffinityMatrix::new(w).unwrap()
    }

    fn cluster_operator() -> DiffusionOperator {
        let s = generate(&SyntheticSpec::new(Generator::GaussianClusters, 90, 2)).unwrap();
        let d = pairwise_distances(&s.dataset.embeddings, Metric::Euclidean).unwrap();
        let w = alpha_decay_kernel(&d, &knn_graph(&d, 5).unwrap(), 40.0).unwrap();
        diffusion_operator(&w).unwrap()
    }

    #[test]
    fn diagonal_affinity_gives_identity() {
        let w = AffinityMatrix::new(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 0.5, 3.0]))).unwrap();
        let op = diffusion_operator(&w).unwrap();
        assert_eq!(op.matrix(), &DMatrix::identity(3, 3));
    }

    #[test]
    fn zero_row_rejected() {
        let w = AffinityMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0])).unwrap();
        assert!(matches!(diffusion_operator(&w), Err(Error::ZeroRowSum { row: 1 })));
    }

    #[test]
    fn powers_stay_stochastic() {
        let mut op = cluster_operator();
        for t in [1, 2, 3, 7, 20, 40] {
            let pt = op.power(t).clone();
            for i in 0..op.n() {
                assert!((pt.row(i).sum() - 1.0).abs() <= 1e-12, "t={t}");
                assert!(pt.row(i).iter().all(|&v| v >= 0.0));
            }
        }
    }

    #[test]
    fn cached_power_matches_direct() {
        let mut op = cluster_operator();
        let direct = op.clone().power(5).clone();
        op.power(3);
        assert!((op.power(5) - direct).amax() <= 1e-15);
    }

    #[test]
    fn entropy_is_non_increasing() {
        let op = cluster_operator();
        let h = von_neumann_entropy(&op, 100).unwrap();
        for w in h.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[test]
    fn knee_matches_brute_force_scan() {
        let op = cluster_operator();
        let h = von_neumann_entropy(&op, 60).unwrap();
        let chosen = select_t(&op, 60).unwrap();
        // Perpendicular distance by explicit projection onto the chord.
        let (ax, ay, bx, by) = (1.0, h[0], 60.0, h[59]);
        let dist = |t: usize| {
            let (px, py) = (t as f64, h[t - 1]);
            let (vx, vy) = (bx - ax, by - ay);
            let s = ((px - ax) * vx + (py - ay) * vy) / (vx * vx + vy * vy);
            ((px - ax - s * vx).powi(2) + (py - ay - s * vy).powi(2)).sqrt()
        };
        let best = (1..=60).map(dist).fold(0.0, f64::max);
        assert!((dist(chosen) - best).abs() < 1e-12);
        assert!(chosen < 30, "knee at {chosen}");
        assert!([1, 2].contains(&select_t(&op, 2).unwrap()));
        assert!(select_t(&op, 1).is_err());
    }

    #[test]
    fn degenerate_spectrum() {
        let w = AffinityMatrix::new(DMatrix::from_element(4, 4, 1.0)).unwrap();
        let op = diffusion_operator(&w).unwrap();
        assert!(matches!(von_neumann_entropy(&op, 10), Err(Error::DegenerateSpectrum { nonzero: 1 })));
    }

    #[test]
    fn identical_rows_have_zero_potential_distance() {
        let w =
            AffinityMatrix::new(DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 0.5, 1.0, 1.0, 0.5, 0.5, 0.5, 1.0])).unwrap();
        let mut op = diffusion_operator(&w).unwrap();
        let d = potential_distances(&mut op, 2).unwrap();
        assert_eq!(d.get(0, 1), 0.0);
        assert!(d.get(0, 2) > 0.0);
    }

    #[test]
    fn potential_separates_two_clusters() {
        let mut rng = Rng::new(9);
        let rows: Vec<Vec<f64>> = (0..60)
            .map(|i| {
                let c = if i < 30 { 0.0 } else { 10.0 };
                vec![c + 0.5 * rng.normal(), 0.5 * rng.normal()]
            })
            .collect();
        let x = EmbeddingMatrix::from_rows((0..60).map(|i| i.to_string()).collect(), &rows).unwrap();
        let d = pairwise_distances(&x, Metric::Euclidean).unwrap();
        let w = alpha_decay_kernel(&d, &knn_graph(&d, 5).unwrap(), 40.0).unwrap();
        let mut op = diffusion_operator(&w).unwrap();
        let pd = potential_distances(&mut op, 10).unwrap();
        let (mut within, mut nw, mut between, mut nb) = (0.0, 0, 0.0, 0);
        for i in 0..60 {
            for j in i + 1..60 {
                if (i < 30) == (j < 30) {
                    within += pd.get(i, j);
                    nw += 1;
                } else {
                    between += pd.get(i, j);
                    nb += 1;
                }
            }
        }
        assert!(within / nw as f64 <= between / nb as f64);
        assert!(DistanceMatrix::new(pd.matrix().clone()).is_ok());
    }

    #[test]
    fn clusters_have_high_silhouette() {
        let s = generate(&SyntheticSpec::new(Generator::GaussianClusters, 300, 7)).unwrap();
        let r = phate_embed(&s.dataset.embeddings, &PhateConfig { seed: 7, ..Default::default() }).unwrap();
        assert!(silhouette(&r.embedding, s.dataset.labels()).unwrap() >= 0.5);
    }

    #[test]
    fn trajectory_follows_arc_length() {
        // Chains much longer than the diffusion range saturate the log floor and close
        // into a ring, so the fixture is kept short.
        let s = generate(&SyntheticSpec::new(Generator::Trajectory, 50, 3)).unwrap();
        let r = phate_embed(&s.dataset.embeddings, &PhateConfig { seed: 3, ..Default::default() }).unwrap();
        let rho = rank_correlation(&principal_scores(&r.embedding), s.ground_truth.values());
        assert!(rho.abs() >= 0.99, "rho {rho}");
    }

    #[test]
    fn fixed_t_is_bitwise_reproducible() {
        let s = generate(&SyntheticSpec::new(Generator::GaussianClusters, 60, 1)).unwrap();
        let cfg = PhateConfig { t: Some(8), seed: 1, ..Default::default() };
        let a = phate_embed(&s.dataset.embeddings, &cfg).unwrap();
        let b = phate_embed(&s.dataset.embeddings, &cfg).unwrap();
        assert_eq!(a.embedding.coords(), b.embedding.coords());
        assert_eq!(a.t, 8);
        assert!(a.entropy.is_empty());
    }

    #[test]
    fn mds_start_no_worse_than_random() {
        for (g, n) in [(Generator::GaussianClusters, 150), (Generator::Trajectory, 150)] {
            let s = generate(&SyntheticSpec::new(g, n, 4)).unwrap();
            let cfg = PhateConfig { seed: 4, ..Default::default() };
            let ours = phate_embed(&s.dataset.embeddings, &cfg).unwrap();
            let d = pairwise_distances(&s.dataset.embeddings, Metric::Euclidean).unwrap();
            let w = alpha_decay_kernel(&d, &knn_graph(&d, cfg.k).unwrap(), cfg.alpha).unwrap();
            let mut op = diffusion_operator(&w).unwrap();
            let pd = potential_distances(&mut op, ours.t).unwrap();
            let random = smacof_mds(&pd, 2, cfg.max_iter, cfg.eps, cfg.seed).unwrap();
            let mds_stress = raw_stress(&pd, ours.embedding.coords(), 2);
            // Both runs stop once the relative decrease falls below eps.
            assert!(
                mds_stress <= random.final_stress() * (1.0 + cfg.eps),
                "{g}: {mds_stress} vs {}",
                random.final_stress()
            );
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn rows_sum_to_one_and_spectrum_bounded(seed in 0u64..10_000, n in 3usize..25) {
            let op = diffusion_operator(&random_affinity(n, seed)).unwrap();
            for i in 0..n {
                prop_assert!((op.matrix().row(i).sum() - 1.0).abs() <= 1e-12);
            }
            for &l in op.spectrum() {
                prop_assert!((-1.0 - 1e-10..=1.0 + 1e-10).contains(&l));
            }
        }
    }
}
