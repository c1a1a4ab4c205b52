use std::collections::BTreeMap;
use std::path::Path;

use serde_json::Value;

use crate::dataset::{index_ids, write_matrix_csv, HasIds, Points};
use crate::error::{Error, Result};

/// Low-dimensional coordinates produced by one of the reduction algorithms, plus the
/// provenance needed to reproduce them.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    sample_ids: Vec<String>,
    dim: usize,
    coords: Vec<f64>,
    pub algorithm: String,
    pub params: BTreeMap<String, Value>,
    pub seed: Option<u64>,
}

impl Embedding {
    /// Row-major `n x dim` coordinates; ids default to the row index.
    pub fn new(algorithm: &str, dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 || coords.len() % dim != 0 {
            return Err(Error::ShapeMismatch {
                expected: format!("multiple of {dim}"),
                found: coords.len().to_string(),
            });
        }
        if coords.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalOverflow { iteration: 0 });
        }
        Ok(Self {
            sample_ids: index_ids(coords.len() / dim),
            dim,
            coords,
            algorithm: algorithm.to_string(),
            params: BTreeMap::new(),
            seed: None,
        })
    }

    pub(crate) fn from_columns(algorithm: &str, columns: &[Vec<f64>]) -> Result<Self> {
        let n = columns.first().map_or(0, Vec::len);
        let mut coords = Vec::with_capacity(n * columns.len());
        for i in 0..n {
            coords.extend(columns.iter().map(|c| c[i]));
        }
        Self::new(algorithm, columns.len(), coords)
    }

    pub fn with_ids(mut self, ids: Vec<String>) -> Result<Self> {
        if ids.len() != self.n_samples() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} ids", self.n_samples()),
                found: ids.len().to_string(),
            });
        }
        self.sample_ids = ids;
        Ok(self)
    }

    pub fn with_param(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.params.insert(key.to_string(), value.into());
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn n_samples(&self) -> usize {
        self.sample_ids.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_samples()).map(|i| self.coords[i * self.dim + j]).collect()
    }

    /// Writes `id,y1..ym` with shortest round-trip float formatting.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let header = std::iter::once("id".to_string()).chain((1..=self.dim).map(|j| format!("y{j}")));
        write_matrix_csv(path, header, self)
    }

    /// Reads a CSV written by [`Embedding::write_csv`]. Provenance fields come back empty.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let m = crate::dataset::load_embeddings(path, crate::dataset::MatrixFormat::Csv)?;
        Self::new("unknown", m.n_features(), m.values().to_vec())?.with_ids(m.sample_ids().to_vec())
    }
}

impl Points for Embedding {
    fn n_points(&self) -> usize {
        self.n_samples()
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn point(&self, i: usize) -> &[f64] {
        self.row(i)
    }
}

impl HasIds for Embedding {
    fn id(&self, i: usize) -> &str {
        &self.sample_ids[i]
    }
}
