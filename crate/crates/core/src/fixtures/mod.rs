//! Seeded synthetic datasets with known ground truth, and brute-force reference
//! implementations used to cross-check the optimized code paths.

pub mod oracle;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{join, write_embeddings, AnnotationTable, EmbeddingMatrix, LabeledDataset, MatrixFormat};
use crate::error::{Error, Result};
use crate::rng::Rng;

pub const LABEL_COLUMN: &str = "label";
pub const CLUSTER_COUNT: usize = 3;
pub const CLUSTER_SIGMA: f64 = 0.5;
pub const CLUSTER_DIM: usize = 10;
/// Cluster `c` is centered at `CLUSTER_OFFSET * e_c`, so centers are `8 sqrt 2` apart.
pub const CLUSTER_OFFSET: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    SwissRoll,
    GaussianClusters,
    #[serde(rename = "line_1d")]
    Line1d,
    Trajectory,
}

impl FromStr for Generator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "swiss_roll" => Ok(Self::SwissRoll),
            "gaussian_clusters" => Ok(Self::GaussianClusters),
            "line_1d" => Ok(Self::Line1d),
            "trajectory" => Ok(Self::Trajectory),
            other => Err(Error::InvalidSpec(format!("unknown generator {other}"))),
        }
    }
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::SwissRoll => "swiss_roll",
            Self::GaussianClusters => "gaussian_clusters",
            Self::Line1d => "line_1d",
            Self::Trajectory => "trajectory",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub generator: Generator,
    pub n: usize,
    /// Standard deviation of isotropic gaussian noise added to the observed coordinates.
    #[serde(default)]
    pub noise: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn new(generator: Generator, n: usize, seed: u64) -> Self {
        Self { generator, n, noise: 0.0, seed }
    }
}

/// A generated dataset together with the parameterization it was sampled from.
#[derive(Debug, Clone, PartialEq)]
pub struct Synthetic {
    pub spec: SyntheticSpec,
    pub dataset: LabeledDataset,
    /// swiss_roll: `(t, h)`; gaussian_clusters: cluster index; line_1d: position along the
    /// line; trajectory: arc length.
    pub ground_truth: EmbeddingMatrix,
}

/// Samples a dataset. Regenerating from the same spec is bitwise stable.
///
/// * `swiss_roll`: `(t cos t, h, t sin t)`, `t ~ U[1.5 pi, 4.5 pi]`, `h ~ U[0, 20]`, labels are
///   four equal-width bands of `t`.
/// * `gaussian_clusters`: three isotropic clusters (sigma 0.5) in 10-D, sizes as equal as
///   possible with earlier clusters taking the remainder.
/// * `line_1d`: `s` in `[0, 10]` placed along a fixed direction in 3-D.
/// * `trajectory`: helix `(2 cos u, 2 sin u, 1.5 u)`, `u` in `[0, 3 pi]`, arc length `2.5 u`.
///
/// The two curve generators draw their parameter from a jittered grid (one point per cell,
/// offset at most a quarter cell) in shuffled order, so consecutive gaps stay within
/// `[0.75, 1.25]` cells and every point's two nearest neighbors are its curve neighbors.
pub fn generate(spec: &SyntheticSpec) -> Result<Synthetic> {
    if spec.n < 4 {
        return Err(Error::InvalidSpec(format!("n must be at least 4, got {}", spec.n)));
    }
    if !(spec.noise >= 0.0) || !spec.noise.is_finite() {
        return Err(Error::InvalidSpec(format!("noise must be finite and >= 0, got {}", spec.noise)));
    }
    let mut rng = Rng::new(spec.seed);
    let n = spec.n;
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut truth: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut labels: Vec<String> = Vec::with_capacity(n);

    let band = |x: f64, lo: f64, hi: f64, bands: usize| -> String {
        let b = (((x - lo) / (hi - lo)) * bands as f64).floor() as usize;
        format!("band_{}", b.min(bands - 1))
    };

    match spec.generator {
        Generator::SwissRoll => {
            let (lo, hi) = (1.5 * std::f64::consts::PI, 4.5 * std::f64::consts::PI);
            for _ in 0..n {
                let t = rng.uniform_in(lo, hi);
                let h = rng.uniform_in(0.0, 20.0);
                rows.push(vec![t * t.cos(), h, t * t.sin()]);
                truth.push(vec![t, h]);
                labels.push(band(t, lo, hi, 4));
            }
        }
        Generator::GaussianClusters => {
            for c in 0..CLUSTER_COUNT {
                let size = n / CLUSTER_COUNT + usize::from(c < n % CLUSTER_COUNT);
                for _ in 0..size {
                    let row = (0..CLUSTER_DIM)
                        .map(|j| if j == c { CLUSTER_OFFSET } else { 0.0 } + CLUSTER_SIGMA * rng.normal())
                        .collect();
                    rows.push(row);
                    truth.push(vec![c as f64]);
                    labels.push(format!("cluster_{c}"));
                }
            }
        }
        Generator::Line1d => {
            let dir = [1.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0];
            let origin = [1.0, -1.0, 0.5];
            for s in jittered_grid(&mut rng, n, 0.0, 10.0) {
                rows.push((0..3).map(|j| origin[j] + s * dir[j]).collect());
                truth.push(vec![s]);
                labels.push(band(s, 0.0, 10.0, 3));
            }
        }
        Generator::Trajectory => {
            let top = 3.0 * std::f64::consts::PI;
            for u in jittered_grid(&mut rng, n, 0.0, top) {
                rows.push(vec![2.0 * u.cos(), 2.0 * u.sin(), 1.5 * u]);
                truth.push(vec![2.5 * u]);
                labels.push(band(u, 0.0, top, 3));
            }
        }
    }
    if spec.noise > 0.0 {
        for row in &mut rows {
            for v in row.iter_mut() {
                *v += spec.noise * rng.normal();
            }
        }
    }

    let ids: Vec<String> = (0..n).map(|i| i.to_string()).collect();
    let embeddings = EmbeddingMatrix::from_rows(ids.clone(), &rows)?;
    let annotations = AnnotationTable::new(ids.clone(), vec![(LABEL_COLUMN.to_string(), labels)])?;
    let dataset = join(&embeddings, &annotations, LABEL_COLUMN)?;
    Ok(Synthetic { spec: *spec, dataset, ground_truth: EmbeddingMatrix::from_rows(ids, &truth)? })
}

fn jittered_grid(rng: &mut Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    let cell = (hi - lo) / n as f64;
    let mut v: Vec<f64> = (0..n).map(|i| lo + (i as f64 + 0.5 + 0.25 * (rng.uniform() - 0.5)) * cell).collect();
    for i in (1..n).rev() {
        let j = (rng.next_u64() % (i as u64 + 1)) as usize;
        v.swap(i, j);
    }
    v
}

/// Paths written by [`Synthetic::write`].
#[derive(Debug, Clone)]
pub struct WrittenFixture {
    pub embeddings: PathBuf,
    pub annotations: PathBuf,
    pub ground_truth: PathBuf,
}

impl Synthetic {
    /// Writes `<name>.embeddings.csv`, `<name>.annotations.csv` and `<name>.truth.csv`.
    pub fn write(&self, dir: &Path) -> Result<WrittenFixture> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let name = self.spec.generator.to_string();
        let out = WrittenFixture {
            embeddings: dir.join(format!("{name}.embeddings.csv")),
            annotations: dir.join(format!("{name}.annotations.csv")),
            ground_truth: dir.join(format!("{name}.truth.csv")),
        };
        write_embeddings(&out.embeddings, &self.dataset.embeddings, MatrixFormat::Csv)?;
        self.dataset.annotations.write_csv(&out.annotations)?;
        write_embeddings(&out.ground_truth, &self.ground_truth, MatrixFormat::Csv)?;
        Ok(out)
    }
}
