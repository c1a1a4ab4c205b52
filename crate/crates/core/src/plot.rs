//! Deterministic SVG scatter plots.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::Points;
use crate::error::{Error, Result};

/// Twelve fixed colors, handed out in sorted label order and reused cyclically.
pub const PALETTE: [&str; 12] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
    "#393b79", "#b5cf6b",
];

const MARGIN: f64 = 0.05;
const LEGEND_WIDTH: u32 = 180;
const LEGEND_ROW: f64 = 18.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlotSpec {
    pub color_by: String,
    pub width: u32,
    pub height: u32,
    pub radius: f64,
    pub legend: bool,
    pub title: Option<String>,
}

impl Default for PlotSpec {
    fn default() -> Self {
        PlotSpec { color_by: "label".into(), width: 800, height: 600, radius: 3.0, legend: true, title: None }
    }
}

/// Label to color, by position of the label in sorted order.
pub fn palette_color(sorted_labels: &BTreeSet<&str>, label: &str) -> &'static str {
    let idx = sorted_labels.iter().position(|l| *l == label).unwrap_or(0);
    PALETTE[idx % PALETTE.len()]
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

/// Renders the first two coordinates of `y` (a 1-D map is drawn on a horizontal line).
pub fn render_svg<P, S>(y: &P, labels: &[S], spec: &PlotSpec) -> Result<String>
where
    P: Points + ?Sized,
    S: AsRef<str>,
{
    let n = y.n_points();
    if labels.len() != n {
        return Err(Error::ShapeMismatch {
            expected: format!("{n} labels"),
            found: format!("{} labels", labels.len()),
        });
    }
    if spec.width == 0 || spec.height == 0 || !(spec.radius > 0.0) {
        return Err(Error::Config("plot width, height and radius must be positive".into()));
    }
    let coord = |i: usize| -> (f64, f64) {
        let p = y.point(i);
        (p[0], if p.len() > 1 { p[1] } else { 0.0 })
    };

    let plot_w = if spec.legend { spec.width.saturating_sub(LEGEND_WIDTH).max(1) } else { spec.width } as f64;
    let plot_h = spec.height as f64;
    let (mut xmin, mut xmax, mut ymin, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..n {
        let (a, b) = coord(i);
        xmin = xmin.min(a);
        xmax = xmax.max(a);
        ymin = ymin.min(b);
        ymax = ymax.max(b);
    }
    let (xr, yr) = (xmax - xmin, ymax - ymin);
    let avail_w = plot_w * (1.0 - 2.0 * MARGIN);
    let avail_h = plot_h * (1.0 - 2.0 * MARGIN);
    let scale = match (xr > 0.0, yr > 0.0) {
        (true, true) => (avail_w / xr).min(avail_h / yr),
        (true, false) => avail_w / xr,
        (false, true) => avail_h / yr,
        (false, false) => 0.0,
    };
    let (xmid, ymid) = (0.5 * (xmin + xmax), 0.5 * (ymin + ymax));
    let (cx, cy) = (plot_w / 2.0, plot_h / 2.0);

    let sorted: BTreeSet<&str> = labels.iter().map(|l| l.as_ref()).collect();
    let mut svg = String::new();
    writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8"?>"#).unwrap();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#,
        w = spec.width,
        h = spec.height
    )
    .unwrap();
    writeln!(svg, r##"<rect width="{}" height="{}" fill="#ffffff"/>"##, spec.width, spec.height).unwrap();
    if let Some(title) = &spec.title {
        writeln!(
            svg,
            r#"<text x="{:.2}" y="16" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#,
            cx,
            escape(title)
        )
        .unwrap();
    }
    writeln!(svg, r#"<g id="points">"#).unwrap();
    for (i, label) in labels.iter().enumerate() {
        let (a, b) = coord(i);
        let px = cx + (a - xmid) * scale;
        let py = cy - (b - ymid) * scale;
        writeln!(
            svg,
            r#"<circle cx="{px:.2}" cy="{py:.2}" r="{:.2}" fill="{}"/>"#,
            spec.radius,
            palette_color(&sorted, label.as_ref())
        )
        .unwrap();
    }
    writeln!(svg, "</g>").unwrap();
    if spec.legend {
        writeln!(svg, r#"<g id="legend" font-family="sans-serif" font-size="12">"#).unwrap();
        let x = plot_w + 10.0;
        for (row, label) in sorted.iter().enumerate() {
            let top = 20.0 + row as f64 * LEGEND_ROW;
            writeln!(
                svg,
                r#"<rect x="{x:.2}" y="{top:.2}" width="10" height="10" fill="{}"/><text x="{:.2}" y="{:.2}">{}</text>"#,
                palette_color(&sorted, label),
                x + 16.0,
                top + 9.0,
                escape(label)
            )
            .unwrap();
        }
        writeln!(svg, "</g>").unwrap();
    }
    writeln!(svg, "</svg>").unwrap();
    Ok(svg)
}

pub fn write_svg<P, S>(path: &Path, y: &P, labels: &[S], spec: &PlotSpec) -> Result<()>
where
    P: Points + ?Sized,
    S: AsRef<str>,
{
    let svg = render_svg(y, labels, spec)?;
    std::fs::write(path, svg).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::Embedding;

    fn emb(coords: Vec<f64>) -> Embedding {
        Embedding::new("test", 2, coords).unwrap()
    }

    #[test]
    fn counts_circles_and_legend_entries() {
        let y = emb(vec![0.0, 0.0, 1.0, 2.0, -3.0, 1.0]);
        let svg = render_svg(&y, &["b", "a", "b"], &PlotSpec::default()).unwrap();
        assert_eq!(svg.matches("<circle").count(), 3);
        assert_eq!(svg.matches("<text").count(), 2);
        assert!(svg.starts_with("<?xml") && svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn byte_identical_output() {
        let y = emb(vec![0.5, 0.25, 1.0, 2.0, -3.0, 1.0]);
        let spec = PlotSpec { title: Some("a < b & c".into()), ..Default::default() };
        let a = render_svg(&y, &["x", "y", "x"], &spec).unwrap();
        assert_eq!(a, render_svg(&y, &["x", "y", "x"], &spec).unwrap());
        assert!(a.contains("a &lt; b &amp; c"));
    }

    #[test]
    fn degenerate_points_sit_at_center() {
        let y = emb(vec![4.0, 4.0, 4.0, 4.0]);
        let spec = PlotSpec { legend: false, ..Default::default() };
        let svg = render_svg(&y, &["a", "a"], &spec).unwrap();
        assert_eq!(svg.matches(r#"<circle cx="400.00" cy="300.00""#).count(), 2);
    }

    #[test]
    fn extremes_touch_the_margin() {
        let y = emb(vec![0.0, 0.0, 10.0, 0.0, 0.0, 1.0]);
        let spec = PlotSpec { legend: false, ..Default::default() };
        let svg = render_svg(&y, &["a", "a", "a"], &spec).unwrap();
        // Width-limited: x spans 40..760; y is flipped so the larger value is higher up.
        assert!(svg.contains(r#"cx="40.00" cy="336.00""#));
        assert!(svg.contains(r#"cx="760.00" cy="336.00""#));
        assert!(svg.contains(r#"cx="40.00" cy="264.00""#));
    }

    #[test]
    fn palette_follows_sorted_order_and_wraps() {
        let labels: Vec<String> = (0..13).map(|i| format!("l{i:02}")).collect();
        let sorted: BTreeSet<&str> = labels.iter().map(|s| s.as_str()).collect();
        assert_eq!(palette_color(&sorted, "l00"), PALETTE[0]);
        assert_eq!(palette_color(&sorted, "l11"), PALETTE[11]);
        assert_eq!(palette_color(&sorted, "l12"), PALETTE[0]);
    }

    #[test]
    fn label_count_must_match() {
        let y = emb(vec![0.0, 0.0]);
        assert!(render_svg(&y, &["a", "b"], &PlotSpec::default()).is_err());
    }
}
