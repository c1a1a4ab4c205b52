//! Command-line front end: `embed`, `evaluate`, `plot`, `pipeline` and `fixtures`.
//!
//! Every command returns a [`Result`]; the binary maps errors to exit codes through
//! [`Error::exit_code`] and prints their one-line `Display` form on standard error.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::dataset::{
    join, load_annotations, load_embeddings, merge_categories, AnnotationTable, EmbeddingMatrix, MatrixFormat,
};
use crate::embedding::Embedding;
use crate::error::{Error, Result};
use crate::fixtures::{generate, Generator, SyntheticSpec, LABEL_COLUMN};
use crate::geodesic::{classical_mds, isomap_from_distances, smacof_mds, DEFAULT_SMACOF_EPS, DEFAULT_SMACOF_ITER};
use crate::neighbors::{gaussian_affinity, knn_graph, pairwise_distances, DistanceMatrix, Metric};
use crate::phate::{phate_from_distances, PhateConfig};
use crate::plot::{write_svg, PlotSpec};
use crate::quality::{summary_table, QualityReport, DEFAULT_K};
use crate::spectral::{laplacian_eigenmaps, lle_with_graph, DEFAULT_LLE_REG};
use crate::tsne::{calibrate_perplexity, tsne_embed, TsneConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    LaplacianEigenmaps,
    Lle,
    Isomap,
    ClassicalMds,
    Smacof,
    Tsne,
    Phate,
}

impl Algorithm {
    pub const ALL: [Algorithm; 7] = [
        Algorithm::LaplacianEigenmaps,
        Algorithm::Lle,
        Algorithm::Isomap,
        Algorithm::ClassicalMds,
        Algorithm::Smacof,
        Algorithm::Tsne,
        Algorithm::Phate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::LaplacianEigenmaps => "laplacian_eigenmaps",
            Algorithm::Lle => "lle",
            Algorithm::Isomap => "isomap",
            Algorithm::ClassicalMds => "classical_mds",
            Algorithm::Smacof => "smacof",
            Algorithm::Tsne => "tsne",
            Algorithm::Phate => "phate",
        }
    }

    /// Hyperparameter flags the algorithm accepts besides `dim` and `metric`.
    fn accepts(self) -> &'static [&'static str] {
        match self {
            Algorithm::LaplacianEigenmaps => &["k", "sigma"],
            Algorithm::Lle | Algorithm::Isomap => &["k"],
            Algorithm::ClassicalMds => &[],
            Algorithm::Smacof => &["iters", "eps"],
            Algorithm::Tsne => &["perplexity", "iters"],
            Algorithm::Phate => &["k", "alpha", "t", "iters", "eps"],
        }
    }
}

impl FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown algorithm {s}")))
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Optional hyperparameters shared by the `embed` flags and pipeline stages.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparameters {
    /// Neighborhood size
    #[arg(long)]
    pub k: Option<usize>,
    /// Gaussian kernel bandwidth (laplacian_eigenmaps)
    #[arg(long)]
    pub sigma: Option<f64>,
    /// t-SNE perplexity
    #[arg(long)]
    pub perplexity: Option<f64>,
    /// PHATE kernel decay
    #[arg(long)]
    pub alpha: Option<f64>,
    /// PHATE diffusion time (chosen automatically when absent)
    #[arg(long)]
    pub t: Option<usize>,
    /// Target dimension
    #[arg(long)]
    pub dim: Option<usize>,
    /// Iteration cap
    #[arg(long)]
    pub iters: Option<usize>,
    /// Relative stress tolerance
    #[arg(long)]
    pub eps: Option<f64>,
    /// Input distance: euclidean or cosine
    #[arg(long)]
    pub metric: Option<Metric>,
}

impl Hyperparameters {
    fn given(&self) -> Vec<&'static str> {
        let mut v = Vec::new();
        let flags = [
            ("k", self.k.is_some()),
            ("sigma", self.sigma.is_some()),
            ("perplexity", self.perplexity.is_some()),
            ("alpha", self.alpha.is_some()),
            ("t", self.t.is_some()),
            ("iters", self.iters.is_some()),
            ("eps", self.eps.is_some()),
        ];
        for (name, set) in flags {
            if set {
                v.push(name);
            }
        }
        v
    }
}

pub const DEFAULT_NEIGHBORS: usize = 10;

/// Result of one algorithm run together with every resolved setting.
#[derive(Debug, Clone)]
pub struct AlgorithmRun {
    pub embedding: Embedding,
    pub params: BTreeMap<String, Value>,
    /// `(iteration, KL)` for t-SNE.
    pub loss: Option<Vec<f64>>,
    /// `(t, H(t))` for PHATE when `t` was selected automatically.
    pub entropy: Option<Vec<f64>>,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Runs `algorithm` on the rows of `x` with defaults filled in.
pub fn run_algorithm(
    algorithm: Algorithm,
    x: &EmbeddingMatrix,
    h: &Hyperparameters,
    seed: u64,
) -> Result<AlgorithmRun> {
    if let Some(bad) = h.given().into_iter().find(|f| !algorithm.accepts().contains(f)) {
        return Err(Error::Config(format!("{algorithm} does not take --{bad}")));
    }
    let metric = h.metric.unwrap_or_default();
    let dim = h.dim.unwrap_or(2);
    if dim == 0 {
        return Err(Error::Config("dim must be at least 1".into()));
    }
    if algorithm == Algorithm::Lle && metric != Metric::Euclidean {
        return Err(Error::Config("lle reconstructs coordinates and needs the euclidean metric".into()));
    }
    let mut params: BTreeMap<String, Value> = BTreeMap::new();
    params.insert("dim".into(), dim.into());
    params.insert("metric".into(), metric.to_string().into());
    params.insert("seed".into(), seed.into());
    let d: DistanceMatrix = pairwise_distances(x, metric)?;
    let mut loss = None;
    let mut entropy = None;
    let embedding = match algorithm {
        Algorithm::LaplacianEigenmaps => {
            let k = h.k.unwrap_or(DEFAULT_NEIGHBORS);
            let graph = knn_graph(&d, k)?;
            let sigma = match h.sigma {
                Some(s) => s,
                None => median((0..d.n()).map(|i| graph.neighbors(i)[k - 1].distance).collect()),
            };
            params.insert("k".into(), k.into());
            params.insert("sigma".into(), sigma.into());
            let w = gaussian_affinity(&d, sigma, Some(&graph))?;
            laplacian_eigenmaps(&w, dim)?
        }
        Algorithm::Lle => {
            let k = h.k.unwrap_or(DEFAULT_NEIGHBORS);
            params.insert("k".into(), k.into());
            params.insert("reg".into(), DEFAULT_LLE_REG.into());
            lle_with_graph(x, &knn_graph(&d, k)?, dim, DEFAULT_LLE_REG)?
        }
        Algorithm::Isomap => {
            let k = h.k.unwrap_or(DEFAULT_NEIGHBORS);
            params.insert("k".into(), k.into());
            isomap_from_distances(&d, k, dim)?
        }
        Algorithm::ClassicalMds => classical_mds(&d, dim)?,
        Algorithm::Smacof => {
            let iters = h.iters.unwrap_or(DEFAULT_SMACOF_ITER);
            let eps = h.eps.unwrap_or(DEFAULT_SMACOF_EPS);
            params.insert("iters".into(), iters.into());
            params.insert("eps".into(), eps.into());
            smacof_mds(&d, dim, iters, eps, seed)?.embedding
        }
        Algorithm::Tsne => {
            let defaults = TsneConfig::default();
            let cfg = TsneConfig {
                perplexity: h.perplexity.unwrap_or(defaults.perplexity),
                dim,
                max_iter: h.iters.unwrap_or(defaults.max_iter),
                seed,
                ..defaults
            };
            cfg.validate(d.n())?;
            for (key, v) in [
                ("perplexity", Value::from(cfg.perplexity)),
                ("iters", cfg.max_iter.into()),
                ("learning_rate", cfg.learning_rate.into()),
                ("momentum", cfg.momentum.into()),
                ("final_momentum", cfg.final_momentum.into()),
                ("momentum_switch_iter", cfg.momentum_switch_iter.into()),
                ("exaggeration", cfg.exaggeration.into()),
                ("exaggeration_iters", cfg.exaggeration_iters.into()),
            ] {
                params.insert(key.into(), v);
            }
            let p = calibrate_perplexity(&d, cfg.perplexity)?;
            let run = tsne_embed(&p, &cfg)?;
            loss = Some(run.kl);
            run.embedding
        }
        Algorithm::Phate => {
            let defaults = PhateConfig::default();
            let cfg = PhateConfig {
                k: h.k.unwrap_or(defaults.k),
                alpha: h.alpha.unwrap_or(defaults.alpha),
                dim,
                t: h.t,
                max_iter: h.iters.unwrap_or(defaults.max_iter),
                eps: h.eps.unwrap_or(defaults.eps),
                seed,
                ..defaults
            };
            let run = phate_from_distances(&d, &cfg)?;
            for (key, v) in [
                ("k", Value::from(cfg.k)),
                ("alpha", cfg.alpha.into()),
                ("t", run.t.into()),
                ("t_selected", cfg.t.is_none().into()),
                ("t_max", cfg.t_max.into()),
                ("iters", cfg.max_iter.into()),
                ("eps", cfg.eps.into()),
            ] {
                params.insert(key.into(), v);
            }
            if cfg.t.is_none() {
                entropy = Some(run.entropy);
            }
            run.embedding
        }
    };
    let mut embedding = embedding.with_ids(x.sample_ids().to_vec())?.with_seed(seed);
    embedding.algorithm = algorithm.name().to_string();
    embedding.params = params.clone();
    Ok(AlgorithmRun { embedding, params, loss, entropy })
}

/// Hex SHA-256 of a file's bytes.
pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputRecord {
    pub path: PathBuf,
    pub sha256: String,
}

impl InputRecord {
    fn of(path: &Path) -> Result<Self> {
        Ok(InputRecord {
            path: std::fs::canonicalize(path).unwrap_or_else(|_| path.to_path_buf()),
            sha256: sha256_file(path)?,
        })
    }
}

/// Provenance written next to every embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub algorithm: String,
    pub seed: u64,
    pub hyperparameters: BTreeMap<String, Value>,
    pub label_column: Option<String>,
    pub inputs: BTreeMap<String, InputRecord>,
    pub n_samples: usize,
    pub dropped_ids: usize,
    pub outputs: BTreeMap<String, String>,
    pub wall_time_seconds: f64,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            line: e.line() as u64,
            reason: e.to_string(),
        })
    }
}

/// Everything `embed` needs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    pub input: PathBuf,
    pub annotations: Option<PathBuf>,
    pub label_column: String,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub hyper: Hyperparameters,
}

/// Paths produced by one `embed` run.
#[derive(Debug, Clone)]
pub struct EmbedOutcome {
    pub embedding: Embedding,
    pub csv: PathBuf,
    pub manifest: PathBuf,
    pub svg: PathBuf,
    pub extra: Vec<PathBuf>,
}

fn write_series(path: &Path, header: &str, first_index: usize, values: &[f64]) -> Result<()> {
    let mut out = String::from(header);
    out.push('\n');
    for (i, v) in values.iter().enumerate() {
        out.push_str(&format!("{},{v:?}\n", i + first_index));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn require_label_column(table: &AnnotationTable, column: &str) -> Result<()> {
    if table.column(column).is_none() {
        return Err(Error::Config(format!("label column {column} not in annotations")));
    }
    Ok(())
}

/// Embeds the input, then writes `<algo>.csv`, `<algo>.svg`, `<algo>.manifest.json` and,
/// for t-SNE and PHATE, the loss or entropy trace.
pub fn cmd_embed(cfg: &RunConfig) -> Result<EmbedOutcome> {
    let started = Instant::now();
    let features = load_embeddings(&cfg.input, MatrixFormat::from_path(&cfg.input))?;
    let (x, labels, dropped) = match &cfg.annotations {
        Some(path) => {
            let table = load_annotations(path)?;
            require_label_column(&table, &cfg.label_column)?;
            let ds = join(&features, &table, &cfg.label_column)?;
            let labels = ds.labels().to_vec();
            (ds.embeddings, labels, ds.dropped)
        }
        None => {
            let n = features.n_samples();
            (features, vec!["all".to_string(); n], 0)
        }
    };
    let run = run_algorithm(cfg.algorithm, &x, &cfg.hyper, cfg.seed)?;

    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;
    let name = cfg.algorithm.name();
    let csv = cfg.out_dir.join(format!("{name}.csv"));
    let svg = cfg.out_dir.join(format!("{name}.svg"));
    let manifest_path = cfg.out_dir.join(format!("{name}.manifest.json"));
    run.embedding.write_csv(&csv)?;
    let plot = PlotSpec { color_by: cfg.label_column.clone(), title: Some(name.to_string()), ..Default::default() };
    write_svg(&svg, &run.embedding, &labels, &plot)?;
    let mut extra = Vec::new();
    if let Some(kl) = &run.loss {
        let p = cfg.out_dir.join(format!("{name}.loss.csv"));
        write_series(&p, "iter,kl", 0, kl)?;
        extra.push(p);
    }
    if let Some(h) = &run.entropy {
        let p = cfg.out_dir.join(format!("{name}.entropy.csv"));
        write_series(&p, "t,entropy", 1, h)?;
        extra.push(p);
    }

    let mut inputs = BTreeMap::new();
    inputs.insert("embeddings".to_string(), InputRecord::of(&cfg.input)?);
    if let Some(a) = &cfg.annotations {
        inputs.insert("annotations".to_string(), InputRecord::of(a)?);
    }
    let file_name = |p: &Path| p.file_name().unwrap().to_string_lossy().into_owned();
    let mut outputs = BTreeMap::new();
    outputs.insert("embedding".to_string(), file_name(&csv));
    outputs.insert("plot".to_string(), file_name(&svg));
    for p in &extra {
        let key = if p.to_string_lossy().ends_with(".loss.csv") { "loss" } else { "entropy" };
        outputs.insert(key.to_string(), file_name(p));
    }
    let manifest = Manifest {
        tool: "manifold".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        algorithm: name.into(),
        seed: cfg.seed,
        hyperparameters: run.params.clone(),
        label_column: cfg.annotations.as_ref().map(|_| cfg.label_column.clone()),
        inputs,
        n_samples: run.embedding.n_samples(),
        dropped_ids: dropped,
        outputs,
        wall_time_seconds: started.elapsed().as_secs_f64(),
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    std::fs::write(&manifest_path, json).map_err(|e| Error::io(&manifest_path, e))?;
    log::info!("{name}: wrote {}", csv.display());
    Ok(EmbedOutcome { embedding: run.embedding, csv, manifest: manifest_path, svg, extra })
}

/// `<dir>/<stem>.manifest.json` for an embedding written by `embed`.
pub fn manifest_path_for(embedding: &Path) -> PathBuf {
    let stem = embedding.file_stem().unwrap_or_default().to_string_lossy();
    embedding.with_file_name(format!("{stem}.manifest.json"))
}

/// Arguments of `evaluate`.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluateConfig {
    pub embedding: PathBuf,
    pub annotations: PathBuf,
    pub label_column: String,
    pub k: usize,
    /// Feature matrix; read from the embedding's manifest when absent.
    pub input: Option<PathBuf>,
    /// Directory for the reports; defaults to the embedding's directory.
    pub out_dir: Option<PathBuf>,
}

/// Writes `<stem>.quality.json` and `<stem>.quality.txt`.
pub fn cmd_evaluate(cfg: &EvaluateConfig) -> Result<(QualityReport, PathBuf, PathBuf)> {
    let y = Embedding::read_csv(&cfg.embedding)?;
    let table = load_annotations(&cfg.annotations)?;
    require_label_column(&table, &cfg.label_column)?;
    let mpath = manifest_path_for(&cfg.embedding);
    let manifest = if mpath.exists() { Some(Manifest::read(&mpath)?) } else { None };
    let input = match (&cfg.input, &manifest) {
        (Some(p), _) => p.clone(),
        (None, Some(m)) => m
            .inputs
            .get("embeddings")
            .map(|r| r.path.clone())
            .ok_or_else(|| Error::Config(format!("manifest {} lists no embeddings input", mpath.display())))?,
        (None, None) => {
            return Err(Error::Config(format!("no --input given and no manifest at {}", mpath.display())));
        }
    };
    let stem = cfg.embedding.file_stem().unwrap_or_default().to_string_lossy().into_owned();
    let algorithm = manifest.map(|m| m.algorithm).unwrap_or_else(|| stem.clone());
    let features = load_embeddings(&input, MatrixFormat::from_path(&input))?;
    let labels = table.labels_for(y.sample_ids(), &cfg.label_column)?;
    let index: std::collections::HashMap<&str, usize> =
        features.sample_ids().iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    let missing: Vec<&String> = y.sample_ids().iter().filter(|id| !index.contains_key(id.as_str())).collect();
    if let Some(first) = missing.first() {
        return Err(Error::IdMismatch { missing: missing.len(), example: (*first).clone() });
    }
    let rows: Vec<usize> = y.sample_ids().iter().map(|id| index[id.as_str()]).collect();
    let x = features.select(&rows);
    let report = QualityReport::compute(&algorithm, &x, &y, &labels, &cfg.label_column, cfg.k)?;
    let dir = match &cfg.out_dir {
        Some(d) => d.clone(),
        None => cfg.embedding.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let json = dir.join(format!("{stem}.quality.json"));
    let text = dir.join(format!("{stem}.quality.txt"));
    report.write(&json, &text)?;
    Ok((report, json, text))
}

/// Colors an embedding by an annotation column and writes the SVG.
pub fn cmd_plot(embedding: &Path, annotations: &Path, spec: &PlotSpec, out: &Path) -> Result<()> {
    let y = Embedding::read_csv(embedding)?;
    let table = load_annotations(annotations)?;
    require_label_column(&table, &spec.color_by)?;
    let labels = table.labels_for(y.sample_ids(), &spec.color_by)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    write_svg(out, &y, &labels, spec)
}

/// Where a pipeline's samples come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineInput {
    pub embeddings: Option<PathBuf>,
    pub annotations: Option<PathBuf>,
    pub synthetic: Option<SyntheticSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MergeConfig {
    pub column: String,
    pub mapping: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageConfig {
    pub algorithm: Algorithm,
    #[serde(flatten)]
    pub hyper: Hyperparameters,
}

fn default_stages() -> Vec<StageConfig> {
    Algorithm::ALL.into_iter().map(|algorithm| StageConfig { algorithm, hyper: Hyperparameters::default() }).collect()
}

fn default_label() -> String {
    LABEL_COLUMN.to_string()
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("pipeline_out")
}

fn default_k() -> usize {
    DEFAULT_K
}

/// Pipeline configuration file (TOML, or JSON by `.json` extension).
///
/// Input paths are resolved against the configuration file's directory; `out_dir` is
/// resolved against the working directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub input: PipelineInput,
    #[serde(default = "default_label")]
    pub label_column: String,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default = "default_k")]
    pub eval_k: usize,
    pub merge: Option<MergeConfig>,
    #[serde(default = "default_stages")]
    pub stages: Vec<StageConfig>,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: PipelineConfig = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        } else {
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {}", path.display(), e.message())))?
        };
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.input.embeddings, &mut cfg.input.annotations].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }
}

/// Files written by a pipeline run.
#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub reports: Vec<QualityReport>,
    pub summary: PathBuf,
    pub label_counts: BTreeMap<String, usize>,
}

/// Input, optional category merge, then embed, evaluate and plot for every stage in order.
/// Stops at the first failing stage; files from earlier stages stay on disk.
pub fn cmd_pipeline(cfg: &PipelineConfig) -> Result<PipelineOutcome> {
    let out = &cfg.out_dir;
    let input_dir = out.join("input");
    std::fs::create_dir_all(&input_dir).map_err(|e| Error::io(&input_dir, e))?;
    let (features, annotations) = match (&cfg.input.synthetic, &cfg.input.embeddings, &cfg.input.annotations) {
        (Some(spec), None, None) => {
            let written = generate(spec)?.write(&input_dir)?;
            (written.embeddings, written.annotations)
        }
        (None, Some(e), Some(a)) => (e.clone(), a.clone()),
        _ => return Err(Error::Config("input needs either `synthetic` or both `embeddings` and `annotations`".into())),
    };
    let mut table = load_annotations(&annotations)?;
    require_label_column(&table, &cfg.label_column)?;
    let annotations = match &cfg.merge {
        Some(m) => {
            table = merge_categories(&table, &m.column, &m.mapping)?;
            let merged = input_dir.join("annotations.merged.csv");
            table.write_csv(&merged)?;
            merged
        }
        None => annotations,
    };
    let features_matrix = load_embeddings(&features, MatrixFormat::from_path(&features))?;
    let ds = join(&features_matrix, &table, &cfg.label_column)?;
    let label_counts = ds.annotations.histogram(&cfg.label_column)?;

    let mut reports = Vec::new();
    for stage in &cfg.stages {
        let run = RunConfig {
            algorithm: stage.algorithm,
            input: features.clone(),
            annotations: Some(annotations.clone()),
            label_column: cfg.label_column.clone(),
            out_dir: out.clone(),
            seed: cfg.seed,
            hyper: stage.hyper.clone(),
        };
        let done = cmd_embed(&run)?;
        let (report, _, _) = cmd_evaluate(&EvaluateConfig {
            embedding: done.csv.clone(),
            annotations: annotations.clone(),
            label_column: cfg.label_column.clone(),
            k: cfg.eval_k,
            input: Some(features.clone()),
            out_dir: None,
        })?;
        eprintln!("{}: done", stage.algorithm);
        reports.push(report);
    }

    let mut text = String::new();
    text.push_str(&format!("samples: {}\n", ds.len()));
    text.push_str(&format!("seed: {}\n", cfg.seed));
    text.push_str(&format!("label column: {}\n", cfg.label_column));
    text.push_str(&format!("labels: {}\n", label_counts.len()));
    let width = label_counts.keys().map(|k| k.len()).max().unwrap_or(0);
    for (label, count) in &label_counts {
        text.push_str(&format!("  {label:<width$}  {count}\n"));
    }
    text.push('\n');
    text.push_str(&summary_table(&reports));
    let summary = out.join("summary.txt");
    std::fs::write(&summary, text).map_err(|e| Error::io(&summary, e))?;
    Ok(PipelineOutcome { reports, summary, label_counts })
}

#[derive(Debug, Parser)]
#[command(name = "manifold", version, about = "Manifold-learning embeddings, quality metrics and SVG plots")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Embed a feature matrix with one algorithm
    Embed(EmbedArgs),
    /// Score an embedding against its features and labels
    Evaluate(EvaluateArgs),
    /// Draw an embedding as an SVG scatter plot
    Plot(PlotArgs),
    /// Run merge, embed, evaluate and plot from a configuration file
    Pipeline(PipelineArgs),
    /// Synthetic datasets
    #[command(subcommand)]
    Fixtures(FixturesCommand),
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    /// laplacian_eigenmaps, lle, isomap, classical_mds, smacof, tsne or phate
    #[arg(long)]
    pub algo: String,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub annotations: Option<PathBuf>,
    /// Annotation column used to color the plot
    #[arg(long, default_value = LABEL_COLUMN)]
    pub label: String,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    pub hyper: Hyperparameters,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub embedding: PathBuf,
    #[arg(long)]
    pub annotations: PathBuf,
    #[arg(long)]
    pub label: String,
    #[arg(long, default_value_t = DEFAULT_K)]
    pub k: usize,
    /// Feature matrix (defaults to the input recorded in the embedding's manifest)
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Report directory (defaults to the embedding's directory)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[arg(long)]
    pub embedding: PathBuf,
    #[arg(long)]
    pub annotations: PathBuf,
    #[arg(long)]
    pub color_by: String,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 800)]
    pub width: u32,
    #[arg(long, default_value_t = 600)]
    pub height: u32,
    #[arg(long, default_value_t = 3.0)]
    pub radius: f64,
    #[arg(long)]
    pub no_legend: bool,
    #[arg(long)]
    pub title: Option<String>,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides `out_dir` from the configuration
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum FixturesCommand {
    /// Write a synthetic dataset as embeddings, annotations and ground-truth CSVs
    Generate {
        /// swiss_roll, gaussian_clusters, line_1d or trajectory
        #[arg(long)]
        spec: String,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Executes a parsed command, writing data to `stdout`.
pub fn run(cli: Cli, stdout: &mut dyn std::io::Write) -> Result<()> {
    let out_err = |e: std::io::Error| Error::io("<stdout>", e);
    match cli.command {
        Command::Embed(a) => {
            let cfg = RunConfig {
                algorithm: a.algo.parse()?,
                input: a.input,
                annotations: a.annotations,
                label_column: a.label,
                out_dir: a.out,
                seed: a.seed,
                hyper: a.hyper,
            };
            let done = cmd_embed(&cfg)?;
            writeln!(stdout, "{}", done.csv.display()).map_err(out_err)?;
        }
        Command::Evaluate(a) => {
            let (report, _, _) = cmd_evaluate(&EvaluateConfig {
                embedding: a.embedding,
                annotations: a.annotations,
                label_column: a.label,
                k: a.k,
                input: a.input,
                out_dir: a.out,
            })?;
            write!(stdout, "{}", report.to_text()).map_err(out_err)?;
        }
        Command::Plot(a) => {
            let spec = PlotSpec {
                color_by: a.color_by,
                width: a.width,
                height: a.height,
                radius: a.radius,
                legend: !a.no_legend,
                title: a.title,
            };
            cmd_plot(&a.embedding, &a.annotations, &spec, &a.out)?;
            writeln!(stdout, "{}", a.out.display()).map_err(out_err)?;
        }
        Command::Pipeline(a) => {
            let mut cfg = PipelineConfig::load(&a.config)?;
            if let Some(out) = a.out {
                cfg.out_dir = out;
            }
            let done = cmd_pipeline(&cfg)?;
            let text = std::fs::read_to_string(&done.summary).map_err(|e| Error::io(&done.summary, e))?;
            write!(stdout, "{text}").map_err(out_err)?;
        }
        Command::Fixtures(FixturesCommand::Generate { spec, n, seed, noise, out }) => {
            let generator: Generator = spec.parse()?;
            let written = generate(&SyntheticSpec { generator, n, noise, seed })?.write(&out)?;
            for p in [written.embeddings, written.annotations, written.ground_truth] {
                writeln!(stdout, "{}", p.display()).map_err(out_err)?;
            }
        }
    }
    Ok(())
}
