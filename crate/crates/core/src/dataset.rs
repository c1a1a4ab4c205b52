//! Feature matrices, annotation tables and the labeled dataset formed by joining them.
//!
//! Two matrix formats are supported:
//!
//! * CSV: one row per sample, the first cell is the sample id and the remaining cells are
//!   the features. A header row is present iff its first cell is exactly `id`.
//! * binary-f64: a 16-byte header (`b"MFLDF64\0"`, `n: u32 LE`, `d: u32 LE`) followed by
//!   `n * d` little-endian `f64` values in row-major order. The format carries no ids;
//!   rows are named `"0"`, `"1"`, ... on load.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const BINARY_MAGIC: &[u8; 8] = b"MFLDF64\0";

/// Read-only view of a set of points stored row by row.
pub trait Points {
    fn n_points(&self) -> usize;
    fn dim(&self) -> usize;
    fn point(&self, i: usize) -> &[f64];
}

/// `n x d` matrix of feature vectors, one row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    sample_ids: Vec<String>,
    n_features: usize,
    values: Vec<f64>,
}

impl EmbeddingMatrix {
    /// Builds a matrix from row-major `values`, checking every invariant.
    pub fn new(sample_ids: Vec<String>, n_features: usize, values: Vec<f64>) -> Result<Self> {
        if sample_ids.is_empty() || n_features == 0 {
            return Err(Error::InvalidInput(format!(
                "matrix must be non-empty (n={} d={n_features})",
                sample_ids.len()
            )));
        }
        if values.len() != sample_ids.len() * n_features {
            return Err(Error::ShapeMismatch {
                expected: format!("{}x{}", sample_ids.len(), n_features),
                found: format!("{} values", values.len()),
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite value at row {} column {}",
                pos / n_features,
                pos % n_features
            )));
        }
        let mut seen = HashSet::with_capacity(sample_ids.len());
        for (line, id) in sample_ids.iter().enumerate() {
            if !seen.insert(id.as_str()) {
                return Err(Error::DuplicateKey { id: id.clone(), line: line as u64 + 1 });
            }
        }
        Ok(Self { sample_ids, n_features, values })
    }

    pub fn from_rows(sample_ids: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidInput("ragged rows".into()));
        }
        Self::new(sample_ids, d, rows.concat())
    }

    /// Matrix with ids `"0".."n-1"`.
    pub fn from_row_major(n_features: usize, values: Vec<f64>) -> Result<Self> {
        let n = if n_features == 0 { 0 } else { values.len() / n_features };
        Self::new(index_ids(n), n_features, values)
    }

    pub fn n_samples(&self) -> usize {
        self.sample_ids.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_features..(i + 1) * self.n_features]
    }

    /// New matrix made of the given rows, in the given order.
    pub fn select(&self, rows: &[usize]) -> Self {
        let mut values = Vec::with_capacity(rows.len() * self.n_features);
        let mut ids = Vec::with_capacity(rows.len());
        for &r in rows {
            values.extend_from_slice(self.row(r));
            ids.push(self.sample_ids[r].clone());
        }
        Self { sample_ids: ids, n_features: self.n_features, values }
    }
}

impl Points for EmbeddingMatrix {
    fn n_points(&self) -> usize {
        self.n_samples()
    }
    fn dim(&self) -> usize {
        self.n_features
    }
    fn point(&self, i: usize) -> &[f64] {
        self.row(i)
    }
}

pub(crate) fn index_ids(n: usize) -> Vec<String> {
    (0..n).map(|i| i.to_string()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFormat {
    Csv,
    BinaryF64,
}

impl MatrixFormat {
    /// `.bin` and `.f64` files are binary, anything else is CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("bin") | Some("f64") => MatrixFormat::BinaryF64,
            _ => MatrixFormat::Csv,
        }
    }
}

pub fn load_embeddings(path: &Path, format: MatrixFormat) -> Result<EmbeddingMatrix> {
    match format {
        MatrixFormat::Csv => load_embeddings_csv(path),
        MatrixFormat::BinaryF64 => load_embeddings_binary(path),
    }
}

fn format_error(path: &Path, line: u64, reason: impl Into<String>) -> Error {
    Error::Format { path: path.to_path_buf(), line, reason: reason.into() }
}

fn load_embeddings_csv(path: &Path) -> Result<EmbeddingMatrix> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(BufReader::new(file));

    let mut ids = Vec::new();
    let mut values = Vec::new();
    let mut width: Option<usize> = None;
    let mut seen = HashMap::new();

    for (index, record) in reader.records().enumerate() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            format_error(path, line, e.to_string())
        })?;
        let line = record.position().map_or(index as u64 + 1, |p| p.line());
        if index == 0 && record.get(0).map(str::trim) == Some("id") {
            width = Some(record.len() - 1);
            continue;
        }
        if record.len() == 1 && record.get(0).is_some_and(|c| c.trim().is_empty()) {
            continue;
        }
        let expected = *width.get_or_insert(record.len() - 1);
        if record.len() - 1 != expected {
            return Err(format_error(
                path,
                line,
                format!("expected {} features, found {}", expected, record.len() - 1),
            ));
        }
        let id = record[0].trim().to_string();
        if let Some(first) = seen.insert(id.clone(), line) {
            return Err(format_error(path, line, format!("duplicate id {id} (first on line {first})")));
        }
        for cell in record.iter().skip(1) {
            let v: f64 =
                cell.trim().parse().map_err(|_| format_error(path, line, format!("non-numeric cell {cell:?}")))?;
            if !v.is_finite() {
                return Err(format_error(path, line, format!("non-finite value {cell:?}")));
            }
            values.push(v);
        }
        ids.push(id);
    }
    if ids.is_empty() {
        return Err(Error::EmptyInput { path: path.to_path_buf() });
    }
    let d = width.unwrap_or(0);
    if d == 0 {
        return Err(format_error(path, 1, "rows carry no feature columns"));
    }
    EmbeddingMatrix::new(ids, d, values)
}

fn load_embeddings_binary(path: &Path) -> Result<EmbeddingMatrix> {
    let (n, d, values) = read_binary_matrix(path)?;
    if n == 0 {
        return Err(Error::EmptyInput { path: path.to_path_buf() });
    }
    if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
        return Err(format_error(path, (pos / d) as u64 + 1, "non-finite value"));
    }
    EmbeddingMatrix::new(index_ids(n), d, values)
}

/// Reads a raw binary-f64 matrix as `(rows, cols, row-major values)`.
pub fn read_binary_matrix(path: &Path) -> Result<(usize, usize, Vec<f64>)> {
    let mut bytes = Vec::new();
    File::open(path).and_then(|mut f| f.read_to_end(&mut bytes)).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 16 || &bytes[..8] != BINARY_MAGIC {
        return Err(format_error(path, 0, "missing binary-f64 header"));
    }
    let n = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let d = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let body = &bytes[16..];
    if body.len() != n * d * 8 {
        return Err(format_error(path, 0, format!("header declares {n}x{d} but body holds {} bytes", body.len())));
    }
    let values = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Ok((n, d, values))
}

/// Writes a row-major matrix in the binary-f64 format.
pub fn write_binary_matrix(path: &Path, rows: usize, cols: usize, values: &[f64]) -> Result<()> {
    assert_eq!(values.len(), rows * cols);
    let to_u32 = |v: usize| u32::try_from(v).map_err(|_| Error::InvalidInput(format!("dimension {v} exceeds u32")));
    let (rows32, cols32) = (to_u32(rows)?, to_u32(cols)?);
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let mut write = || -> std::io::Result<()> {
        out.write_all(BINARY_MAGIC)?;
        out.write_all(&rows32.to_le_bytes())?;
        out.write_all(&cols32.to_le_bytes())?;
        for v in values {
            out.write_all(&v.to_le_bytes())?;
        }
        out.flush()
    };
    write().map_err(|e| Error::io(path, e))
}

pub fn write_embeddings(path: &Path, matrix: &EmbeddingMatrix, format: MatrixFormat) -> Result<()> {
    match format {
        MatrixFormat::BinaryF64 => write_binary_matrix(path, matrix.n_samples(), matrix.n_features(), matrix.values()),
        MatrixFormat::Csv => {
            let header = std::iter::once("id".to_string()).chain((1..=matrix.n_features()).map(|j| format!("x{j}")));
            write_matrix_csv(path, header, matrix)
        }
    }
}

/// CSV writer shared by feature matrices and embeddings. Floats use the shortest
/// representation that parses back to the same bits.
pub(crate) fn write_matrix_csv<P: Points + ?Sized>(
    path: &Path,
    header: impl Iterator<Item = String>,
    points: &P,
) -> Result<()>
where
    P: HasIds,
{
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::WriterBuilder::new().from_writer(BufWriter::new(file));
    let csv_err = |e: csv::Error| Error::Format { path: path.to_path_buf(), line: 0, reason: e.to_string() };
    w.write_record(header).map_err(csv_err)?;
    let mut record = Vec::with_capacity(points.dim() + 1);
    for i in 0..points.n_points() {
        record.clear();
        record.push(points.id(i).to_string());
        record.extend(points.point(i).iter().map(|v| v.to_string()));
        w.write_record(&record).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Anything that names its rows.
pub trait HasIds {
    fn id(&self, i: usize) -> &str;
}

impl HasIds for EmbeddingMatrix {
    fn id(&self, i: usize) -> &str {
        &self.sample_ids[i]
    }
}

/// Per-sample categorical metadata keyed by sample id.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationTable {
    ids: Vec<String>,
    columns: Vec<(String, Vec<String>)>,
    label_sets: BTreeMap<String, BTreeSet<String>>,
}

impl AnnotationTable {
    pub fn new(ids: Vec<String>, columns: Vec<(String, Vec<String>)>) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::MissingColumn { column: "<label>".into() });
        }
        for (name, values) in &columns {
            if values.len() != ids.len() {
                return Err(Error::ShapeMismatch {
                    expected: format!("{} values in column {name}", ids.len()),
                    found: values.len().to_string(),
                });
            }
        }
        let mut seen = HashSet::with_capacity(ids.len());
        for (i, id) in ids.iter().enumerate() {
            if !seen.insert(id.as_str()) {
                return Err(Error::DuplicateKey { id: id.clone(), line: i as u64 + 2 });
            }
        }
        Ok(Self { ids, columns, label_sets: BTreeMap::new() })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn column_names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|(n, _)| n.as_str())
    }

    pub fn column(&self, name: &str) -> Option<&[String]> {
        self.columns.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }

    pub fn require_column(&self, name: &str) -> Result<&[String]> {
        self.column(name).ok_or_else(|| Error::MissingColumn { column: name.to_string() })
    }

    /// Declares the closed label set of `column`; every present value must belong to it.
    pub fn with_label_set(mut self, column: &str, labels: BTreeSet<String>) -> Result<Self> {
        let values = self.require_column(column)?;
        if let Some(bad) = values.iter().find(|v| !labels.contains(*v)) {
            return Err(Error::UnknownLabel { column: column.to_string(), label: bad.clone() });
        }
        self.label_sets.insert(column.to_string(), labels);
        Ok(self)
    }

    /// Declared label set, or the set of observed values when none was declared.
    pub fn label_set(&self, column: &str) -> Result<BTreeSet<String>> {
        if let Some(set) = self.label_sets.get(column) {
            return Ok(set.clone());
        }
        Ok(self.require_column(column)?.iter().cloned().collect())
    }

    pub fn histogram(&self, column: &str) -> Result<BTreeMap<String, usize>> {
        let mut counts = BTreeMap::new();
        for v in self.require_column(column)? {
            *counts.entry(v.clone()).or_insert(0) += 1;
        }
        Ok(counts)
    }

    /// Values of `column` for each of `ids`, in that order. Every id must be present.
    pub fn labels_for(&self, ids: &[String], column: &str) -> Result<Vec<String>> {
        let values = self.require_column(column)?;
        let index: HashMap<&str, usize> = self.ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
        let missing: Vec<&String> = ids.iter().filter(|id| !index.contains_key(id.as_str())).collect();
        if let Some(first) = missing.first() {
            return Err(Error::IdMismatch { missing: missing.len(), example: (*first).clone() });
        }
        Ok(ids.iter().map(|id| values[index[id.as_str()]].clone()).collect())
    }

    pub fn select(&self, rows: &[usize]) -> Self {
        Self {
            ids: rows.iter().map(|&r| self.ids[r].clone()).collect(),
            columns: self
                .columns
                .iter()
                .map(|(n, v)| (n.clone(), rows.iter().map(|&r| v[r].clone()).collect()))
                .collect(),
            label_sets: self.label_sets.clone(),
        }
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(BufWriter::new(file));
        let csv_err = |e: csv::Error| Error::Format { path: path.to_path_buf(), line: 0, reason: e.to_string() };
        let header = std::iter::once("id").chain(self.column_names());
        w.write_record(header).map_err(csv_err)?;
        for (i, id) in self.ids.iter().enumerate() {
            let row = std::iter::once(id.as_str()).chain(self.columns.iter().map(|(_, v)| v[i].as_str()));
            w.write_record(row).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Loads an annotation CSV. The header must contain an `id` column and at least one other.
pub fn load_annotations(path: &Path) -> Result<AnnotationTable> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(BufReader::new(file));
    let headers = reader.headers().map_err(|e| format_error(path, 1, e.to_string()))?.clone();
    let id_col =
        headers.iter().position(|h| h.trim() == "id").ok_or_else(|| Error::MissingColumn { column: "id".into() })?;
    let names: Vec<(usize, String)> =
        headers.iter().enumerate().filter(|&(i, _)| i != id_col).map(|(i, h)| (i, h.trim().to_string())).collect();
    if names.is_empty() {
        return Err(Error::MissingColumn { column: "<label>".into() });
    }

    let mut ids = Vec::new();
    let mut columns: Vec<Vec<String>> = vec![Vec::new(); names.len()];
    let mut seen: HashSet<String> = HashSet::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            format_error(path, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let id = record[id_col].trim().to_string();
        if !seen.insert(id.clone()) {
            return Err(Error::DuplicateKey { id, line });
        }
        for (slot, (i, _)) in columns.iter_mut().zip(&names) {
            slot.push(record.get(*i).unwrap_or("").to_string());
        }
        ids.push(id);
    }
    AnnotationTable::new(ids, names.into_iter().map(|(_, n)| n).zip(columns).collect())
}

/// Relabels `column` through `mapping`. Labels absent from the mapping are untouched.
pub fn merge_categories(
    table: &AnnotationTable,
    column: &str,
    mapping: &BTreeMap<String, String>,
) -> Result<AnnotationTable> {
    let labels = table.label_set(column)?;
    if let Some(unknown) = mapping.keys().find(|k| !labels.contains(*k)) {
        return Err(Error::UnknownLabel { column: column.to_string(), label: unknown.clone() });
    }
    let mut out = table.clone();
    for (name, values) in out.columns.iter_mut() {
        if name == column {
            for v in values.iter_mut() {
                if let Some(new) = mapping.get(v) {
                    *v = new.clone();
                }
            }
        }
    }
    if let Some(set) = out.label_sets.get_mut(column) {
        *set = set.iter().map(|l| mapping.get(l).unwrap_or(l).clone()).collect();
    }
    Ok(out)
}

/// Embeddings and annotations restricted to their common ids, rows aligned.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub embeddings: EmbeddingMatrix,
    pub annotations: AnnotationTable,
    pub label_column: String,
    /// Ids present on only one side of the join.
    pub dropped: usize,
}

impl LabeledDataset {
    pub fn labels(&self) -> &[String] {
        self.annotations.column(&self.label_column).expect("label column checked at join")
    }

    pub fn len(&self) -> usize {
        self.embeddings.n_samples()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Inner join on sample id. Rows follow the annotation table's order; ids present on only
/// one side are dropped with a warning.
pub fn join(embeddings: &EmbeddingMatrix, annotations: &AnnotationTable, label_column: &str) -> Result<LabeledDataset> {
    annotations.require_column(label_column)?;
    let emb_index: HashMap<&str, usize> =
        embeddings.sample_ids().iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    let mut emb_rows = Vec::new();
    let mut ann_rows = Vec::new();
    for (a, id) in annotations.ids().iter().enumerate() {
        if let Some(&e) = emb_index.get(id.as_str()) {
            emb_rows.push(e);
            ann_rows.push(a);
        }
    }
    if emb_rows.is_empty() {
        return Err(Error::EmptyIntersection { embeddings: embeddings.n_samples(), annotations: annotations.len() });
    }
    let dropped = embeddings.n_samples() + annotations.len() - 2 * emb_rows.len();
    if dropped > 0 {
        log::warn!("join kept {} samples and dropped {dropped} ids present on only one side", emb_rows.len());
    }
    Ok(LabeledDataset {
        embeddings: embeddings.select(&emb_rows),
        annotations: annotations.select(&ann_rows),
        label_column: label_column.to_string(),
        dropped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::PathBuf;

    fn bundled() -> PathBuf {
        Path::new(env!("CARGO_MANIFEST_DIR")).join("data/annotations.csv")
    }

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> PathBuf {
        let p = dir.path().join(name);
        std::fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn labels_for_follows_requested_order() {
        let t = AnnotationTable::new(
            vec!["a".into(), "b".into(), "c".into()],
            vec![("period".into(), vec!["x".into(), "y".into(), "z".into()])],
        )
        .unwrap();
        assert_eq!(t.labels_for(&["c".into(), "a".into()], "period").unwrap(), vec!["z", "x"]);
        assert!(matches!(t.labels_for(&["a".into(), "q".into()], "period"), Err(Error::IdMismatch { missing: 1, .. })));
        assert!(matches!(t.labels_for(&["a".into()], "nope"), Err(Error::MissingColumn { .. })));
    }

    #[test]
    fn csv_without_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "m.csv", "a,1,2\nb,3,4\nc,5,6");
        let m = load_embeddings(&p, MatrixFormat::Csv).unwrap();
        assert_eq!((m.n_samples(), m.n_features()), (3, 2));
        assert_eq!(m.sample_ids(), ["a", "b", "c"]);
        assert_eq!(m.row(2), [5.0, 6.0]);
    }

    #[test]
    fn csv_with_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "m.csv", "id,x1\nq,0.5\n");
        let m = load_embeddings(&p, MatrixFormat::Csv).unwrap();
        assert_eq!(m.sample_ids(), ["q"]);
    }

    #[test]
    fn nan_is_format_error_with_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "m.csv", "a,1,2\nx,1,NaN\n");
        match load_embeddings(&p, MatrixFormat::Csv) {
            Err(Error::Format { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn ragged_and_non_numeric_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "r.csv", "a,1,2\nb,3\n");
        assert!(matches!(load_embeddings(&p, MatrixFormat::Csv), Err(Error::Format { .. })));
        let p = write(&dir, "s.csv", "a,1,two\n");
        assert!(matches!(load_embeddings(&p, MatrixFormat::Csv), Err(Error::Format { .. })));
    }

    #[test]
    fn empty_and_missing_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "e.csv", "");
        assert!(matches!(load_embeddings(&p, MatrixFormat::Csv), Err(Error::EmptyInput { .. })));
        let p = write(&dir, "h.csv", "id,x1\n");
        assert!(matches!(load_embeddings(&p, MatrixFormat::Csv), Err(Error::EmptyInput { .. })));
        let missing = dir.path().join("nope.csv");
        assert!(matches!(load_embeddings(&missing, MatrixFormat::Csv), Err(Error::Io { .. })));
    }

    #[test]
    fn binary_rejects_truncated_body() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.bin");
        write_binary_matrix(&p, 2, 2, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        let mut bytes = std::fs::read(&p).unwrap();
        bytes.pop();
        std::fs::write(&p, bytes).unwrap();
        assert!(matches!(load_embeddings(&p, MatrixFormat::BinaryF64), Err(Error::Format { .. })));
    }

    #[test]
    fn bundled_annotations_match_period_table() {
        let t = load_annotations(&bundled()).unwrap();
        assert_eq!(t.len(), 3198);
        let h = t.histogram("period").unwrap();
        let expect = [
            ("Medieval", 721),
            ("Early Renaissance", 448),
            ("Northern Renaissance", 385),
            ("Baroque", 724),
            ("Romanticism", 302),
            ("Impressionism", 618),
        ];
        assert_eq!(h.len(), 6);
        for (label, count) in expect {
            assert_eq!(h[label], count, "{label}");
        }
        assert_eq!(h.values().sum::<usize>(), 3198);
        assert_eq!(t.histogram("artist").unwrap().len(), 12);
    }

    #[test]
    fn renaissance_merge() {
        let t = load_annotations(&bundled()).unwrap();
        let mapping: BTreeMap<String, String> =
            [("Early Renaissance", "Renaissance"), ("Northern Renaissance", "Renaissance")]
                .into_iter()
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .collect();
        let merged = merge_categories(&t, "period", &mapping).unwrap();
        let h = merged.histogram("period").unwrap();
        assert_eq!(h.len(), 5);
        assert_eq!(h["Renaissance"], 833);
        assert_eq!(h["Baroque"], 724);
        assert_eq!(merged.len(), t.len());
    }

    #[test]
    fn merge_identity_and_unknown_label() {
        let t = load_annotations(&bundled()).unwrap();
        assert_eq!(merge_categories(&t, "period", &BTreeMap::new()).unwrap(), t);
        let bad: BTreeMap<_, _> = [("Gothic".to_string(), "X".to_string())].into();
        assert!(matches!(merge_categories(&t, "period", &bad), Err(Error::UnknownLabel { .. })));
    }

    #[test]
    fn declared_label_sets_are_closed_and_follow_merges() {
        let t =
            AnnotationTable::new(vec!["1".into(), "2".into()], vec![("period".into(), vec!["A".into(), "B".into()])])
                .unwrap();
        let declared: BTreeSet<String> = ["A", "B", "C"].iter().map(|s| s.to_string()).collect();
        let t = t.with_label_set("period", declared).unwrap();
        // C is declared but unobserved, so it may be mapped.
        let m: BTreeMap<_, _> = [("C".to_string(), "A".to_string())].into();
        let merged = merge_categories(&t, "period", &m).unwrap();
        assert_eq!(merged.label_set("period").unwrap().len(), 2);
        let narrow: BTreeSet<String> = ["A".to_string()].into();
        assert!(t.with_label_set("period", narrow).is_err());
    }

    #[test]
    fn duplicate_annotation_id() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "a.csv", "id,period\n1034,A\n7,B\n1034,C\n");
        match load_annotations(&p) {
            Err(Error::DuplicateKey { id, line }) => {
                assert_eq!(id, "1034");
                assert_eq!(line, 4);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn annotations_need_id_and_label_columns() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "a.csv", "key,period\n1,A\n");
        assert!(matches!(load_annotations(&p), Err(Error::MissingColumn { .. })));
        let p = write(&dir, "b.csv", "id\n1\n");
        assert!(matches!(load_annotations(&p), Err(Error::MissingColumn { .. })));
    }

    fn table(ids: &[&str]) -> AnnotationTable {
        AnnotationTable::new(
            ids.iter().map(|s| s.to_string()).collect(),
            vec![("label".into(), ids.iter().map(|s| s.to_uppercase()).collect())],
        )
        .unwrap()
    }

    fn matrix(ids: &[&str]) -> EmbeddingMatrix {
        let values = (0..ids.len()).flat_map(|i| [i as f64, -(i as f64)]).collect();
        EmbeddingMatrix::new(ids.iter().map(|s| s.to_string()).collect(), 2, values).unwrap()
    }

    #[test]
    fn join_intersects_and_reports_drops() {
        let ds = join(&matrix(&["a", "b", "c"]), &table(&["b", "c", "d"]), "label").unwrap();
        assert_eq!(ds.embeddings.sample_ids(), ["b", "c"]);
        assert_eq!(ds.annotations.ids(), ["b", "c"]);
        assert_eq!(ds.dropped, 2);
        assert_eq!(ds.embeddings.row(0), [1.0, -1.0]);
        assert_eq!(ds.labels(), ["B", "C"]);
    }

    #[test]
    fn join_follows_annotation_order() {
        let ds = join(&matrix(&["a", "b", "c"]), &table(&["c", "a", "b"]), "label").unwrap();
        assert_eq!(ds.dropped, 0);
        assert_eq!(ds.embeddings.sample_ids(), ds.annotations.ids());
        assert_eq!(ds.embeddings.sample_ids(), ["c", "a", "b"]);
    }

    #[test]
    fn join_errors() {
        assert!(matches!(join(&matrix(&["a"]), &table(&["z"]), "label"), Err(Error::EmptyIntersection { .. })));
        assert!(matches!(join(&matrix(&["a"]), &table(&["a"]), "period"), Err(Error::MissingColumn { .. })));
    }

    #[test]
    fn join_is_idempotent() {
        let ds = join(&matrix(&["a", "b", "c", "e"]), &table(&["e", "b", "c", "d"]), "label").unwrap();
        let again = join(&ds.embeddings, &ds.annotations, "label").unwrap();
        assert_eq!(again.embeddings, ds.embeddings);
        assert_eq!(again.annotations, ds.annotations);
        assert_eq!(again.dropped, 0);
    }
}
