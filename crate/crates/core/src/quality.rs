//! Embedding quality metrics and the per-embedding report.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Points;
use crate::error::{Error, Result};

pub const DEFAULT_K: usize = 10;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Indices `j != i` ordered by distance from `i`, ties broken by index.
fn order_from<P: Points + ?Sized>(p: &P, i: usize) -> Vec<usize> {
    let pi = p.point(i);
    let dist: Vec<f64> = (0..p.n_points()).map(|j| sq_dist(pi, p.point(j)).sqrt()).collect();
    let mut order: Vec<usize> = (0..p.n_points()).filter(|&j| j != i).collect();
    order.sort_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(a.cmp(&b)));
    order
}

fn check_same_n(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::ShapeMismatch { expected: format!("{a} samples"), found: format!("{b} samples") });
    }
    Ok(())
}

/// Penalizes points that are among the `k` nearest in `near` but not in `reference`,
/// weighted by their rank in `reference`.
fn rank_penalty<A, B>(reference: &A, near: &B, k: usize) -> Result<f64>
where
    A: Points + Sync + ?Sized,
    B: Points + Sync + ?Sized,
{
    let n = reference.n_points();
    check_same_n(n, near.n_points())?;
    if k == 0 || 2 * k >= n {
        return Err(Error::KTooLarge { k, n });
    }
    let per_point: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let ref_order = order_from(reference, i);
            let mut rank = vec![0usize; n];
            for (r, &j) in ref_order.iter().enumerate() {
                rank[j] = r + 1;
            }
            order_from(near, i)[..k].iter().filter(|&&j| rank[j] > k).map(|&j| (rank[j] - k) as f64).sum()
        })
        .collect();
    let penalty: f64 = per_point.iter().sum();
    let (nf, kf) = (n as f64, k as f64);
    Ok(1.0 - 2.0 / (nf * kf * (2.0 * nf - 3.0 * kf - 1.0)) * penalty)
}

/// Fraction-style score of how few embedding neighbors are false neighbors. Requires `1 <= k < n/2`.
pub fn trustworthiness<X, Y>(x: &X, y: &Y, k: usize) -> Result<f64>
where
    X: Points + Sync + ?Sized,
    Y: Points + Sync + ?Sized,
{
    rank_penalty(x, y, k)
}

/// Counterpart of [`trustworthiness`]: penalizes true neighbors missing from the embedding.
pub fn continuity<X, Y>(x: &X, y: &Y, k: usize) -> Result<f64>
where
    X: Points + Sync + ?Sized,
    Y: Points + Sync + ?Sized,
{
    rank_penalty(y, x, k)
}

fn distinct_labels<S: AsRef<str>>(labels: &[S]) -> usize {
    let mut seen: Vec<&str> = labels.iter().map(|s| s.as_ref()).collect();
    seen.sort_unstable();
    seen.dedup();
    seen.len()
}

/// Mean fraction of each point's `k` nearest embedding neighbors that share its label.
/// A single-class labeling returns 1.0 and logs a warning.
pub fn knn_label_agreement<Y, S>(y: &Y, labels: &[S], k: usize) -> Result<f64>
where
    Y: Points + Sync + ?Sized,
    S: AsRef<str> + Sync,
{
    let n = y.n_points();
    check_same_n(n, labels.len())?;
    if k == 0 || k >= n {
        return Err(Error::KTooLarge { k, n });
    }
    if distinct_labels(labels) < 2 {
        log::warn!("knn label agreement: single class, returning 1.0");
        return Ok(1.0);
    }
    let per_point: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let own = labels[i].as_ref();
            let hits = order_from(y, i)[..k].iter().filter(|&&j| labels[j].as_ref() == own).count();
            hits as f64 / k as f64
        })
        .collect();
    Ok(per_point.iter().sum::<f64>() / n as f64)
}

/// Mean silhouette over all points. Points in singleton classes score 0, and `0/0` counts as 0.
pub fn silhouette<Y, S>(y: &Y, labels: &[S]) -> Result<f64>
where
    Y: Points + Sync + ?Sized,
    S: AsRef<str> + Sync,
{
    let n = y.n_points();
    check_same_n(n, labels.len())?;
    let mut names: Vec<&str> = labels.iter().map(|s| s.as_ref()).collect();
    names.sort_unstable();
    names.dedup();
    if names.len() < 2 {
        return Err(Error::SingleClass { label: names.first().map(|s| s.to_string()).unwrap_or_default() });
    }
    let class: Vec<usize> = labels.iter().map(|l| names.binary_search(&l.as_ref()).unwrap()).collect();
    let c = names.len();
    let per_point: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut sum = vec![0.0; c];
            let mut count = vec![0usize; c];
            let yi = y.point(i);
            for j in 0..n {
                if j != i {
                    sum[class[j]] += sq_dist(yi, y.point(j)).sqrt();
                    count[class[j]] += 1;
                }
            }
            let own = class[i];
            if count[own] == 0 {
                return 0.0;
            }
            let a = sum[own] / count[own] as f64;
            let b = (0..c)
                .filter(|&o| o != own && count[o] > 0)
                .map(|o| sum[o] / count[o] as f64)
                .fold(f64::INFINITY, f64::min);
            let m = a.max(b);
            if m > 0.0 {
                (b - a) / m
            } else {
                0.0
            }
        })
        .collect();
    Ok(per_point.iter().sum::<f64>() / n as f64)
}

fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]).then(a.cmp(&b)));
    let mut ranks = vec![0.0; v.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && v[order[end]] == v[order[start]] {
            end += 1;
        }
        let avg = (start + end - 1) as f64 / 2.0 + 1.0;
        for &idx in &order[start..end] {
            ranks[idx] = avg;
        }
        start = end;
    }
    ranks
}

/// Spearman rank correlation with averaged ties. Returns 0 when either side is constant.
pub fn rank_correlation(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "rank_correlation: length mismatch");
    let (ra, rb) = (average_ranks(a), average_ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in ra.iter().zip(&rb) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va == 0.0 || vb == 0.0 {
        return 0.0;
    }
    cov / (va * vb).sqrt()
}

/// Metrics for one embedding against its input features and labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub algorithm: String,
    pub n_samples: usize,
    pub k: usize,
    pub label_column: String,
    pub trustworthiness: f64,
    pub continuity: f64,
    pub knn_label_agreement: f64,
    /// `None` when the labels contain a single class.
    pub silhouette: Option<f64>,
}

impl QualityReport {
    pub fn compute<X, Y, S>(algorithm: &str, x: &X, y: &Y, labels: &[S], label_column: &str, k: usize) -> Result<Self>
    where
        X: Points + Sync + ?Sized,
        Y: Points + Sync + ?Sized,
        S: AsRef<str> + Sync,
    {
        let silhouette = match silhouette(y, labels) {
            Ok(s) => Some(s),
            Err(Error::SingleClass { .. }) => None,
            Err(e) => return Err(e),
        };
        let report = QualityReport {
            algorithm: algorithm.to_string(),
            n_samples: y.n_points(),
            k,
            label_column: label_column.to_string(),
            trustworthiness: trustworthiness(x, y, k)?,
            continuity: continuity(x, y, k)?,
            knn_label_agreement: knn_label_agreement(y, labels, k)?,
            silhouette,
        };
        report.validate()?;
        Ok(report)
    }

    /// Checks that every metric is finite and inside its range.
    pub fn validate(&self) -> Result<()> {
        let mut checks = vec![
            ("trustworthiness", self.trustworthiness, 0.0, 1.0),
            ("continuity", self.continuity, 0.0, 1.0),
            ("knn_label_agreement", self.knn_label_agreement, 0.0, 1.0),
        ];
        if let Some(s) = self.silhouette {
            checks.push(("silhouette", s, -1.0, 1.0));
        }
        const SLACK: f64 = 1e-12;
        for (name, v, lo, hi) in checks {
            if !v.is_finite() || v < lo - SLACK || v > hi + SLACK {
                return Err(Error::InvalidInput(format!("{name}={v} outside [{lo}, {hi}]")));
            }
        }
        Ok(())
    }

    fn rows(&self) -> Vec<(&'static str, String)> {
        vec![
            ("algorithm", self.algorithm.clone()),
            ("n_samples", self.n_samples.to_string()),
            ("k", self.k.to_string()),
            ("label_column", self.label_column.clone()),
            ("trustworthiness", format!("{:.6}", self.trustworthiness)),
            ("continuity", format!("{:.6}", self.continuity)),
            ("knn_label_agreement", format!("{:.6}", self.knn_label_agreement)),
            ("silhouette", self.silhouette.map_or_else(|| "n/a".to_string(), |s| format!("{s:.6}"))),
        ]
    }

    /// Two-column aligned plain-text table.
    pub fn to_text(&self) -> String {
        let rows = self.rows();
        let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        let mut out = String::new();
        for (key, value) in rows {
            writeln!(out, "{key:<width$}  {value}").unwrap();
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn write(&self, json_path: &Path, text_path: &Path) -> Result<()> {
        std::fs::write(json_path, self.to_json() + "\n").map_err(|e| Error::io(json_path, e))?;
        std::fs::write(text_path, self.to_text()).map_err(|e| Error::io(text_path, e))
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            line: e.line() as u64,
            reason: e.to_string(),
        })
    }
}

/// Side-by-side table of several reports, one row per algorithm.
pub fn summary_table(reports: &[QualityReport]) -> String {
    let header = ["algorithm", "trustworthiness", "continuity", "knn_agreement", "silhouette"];
    let mut rows: Vec<[String; 5]> = vec![header.map(String::from)];
    for r in reports {
        let values: BTreeMap<&str, String> = r.rows().into_iter().collect();
        rows.push([
            r.algorithm.clone(),
            values["trustworthiness"].clone(),
            values["continuity"].clone(),
            values["knn_label_agreement"].clone(),
            values["silhouette"].clone(),
        ]);
    }
    let widths: Vec<usize> = (0..5).map(|c| rows.iter().map(|r| r[c].len()).max().unwrap()).collect();
    let mut out = String::new();
    for row in rows {
        let line: Vec<String> = row.iter().zip(&widths).map(|(v, w)| format!("{v:<w$}")).collect();
        writeln!(out, "{}", line.join("  ").trim_end()).unwrap();
    }
    out
}
