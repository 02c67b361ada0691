//! CSV and SVG emission.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::HarnessError;

pub const CSV_HEADER: &str = "experiment,variant,gamma_db,delta,K,N,M,trial,mean_S,std_S,runtime_s,extra1,extra2";

/// Trial index carried by aggregate rows.
pub const AGGREGATE: i64 = -1;

/// One CSV line. Per-trial rows store that trial's `|S|` in `mean_S` and
/// zero in `std_S`. The meaning of `extra1`/`extra2` depends on the
/// experiment kind (see the README).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub variant: String,
    pub gamma_db: f64,
    pub delta: f64,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub trial: i64,
    #[serde(rename = "mean_S")]
    pub mean_s: f64,
    #[serde(rename = "std_S")]
    pub std_s: f64,
    pub runtime_s: f64,
    pub extra1: f64,
    pub extra2: f64,
}

impl ResultRow {
    pub fn is_aggregate(&self) -> bool {
        self.trial == AGGREGATE
    }
}

pub fn emit_csv(rows: &[ResultRow], path: &Path) -> Result<(), HarnessError> {
    if rows.is_empty() {
        return Err(HarnessError::Validation(vec!["no result rows to write".into()]));
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::Io(format!("{}: {e}", dir.display())))?;
    }
    let io = |e: csv::Error| HarnessError::Io(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    for row in rows {
        w.serialize(row).map_err(io)?;
    }
    w.flush().map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))
}

pub fn read_csv(path: &Path) -> Result<Vec<ResultRow>, HarnessError> {
    let io = |e: csv::Error| HarnessError::Io(format!("{}: {e}", path.display()));
    let mut r = csv::Reader::from_path(path).map_err(io)?;
    r.deserialize().map(|row| row.map_err(io)).collect()
}

/// Which aggregate column to plot against which grid axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotAxes {
    SizeVsGamma,
    SizeVsDelta,
    RuntimeVsDevices,
    EfficiencyVsGamma,
}

/// Renders aggregate rows as one polyline per series into a static SVG.
///
/// Best effort: callers log the error and carry on.
pub fn emit_plot(rows: &[ResultRow], axes: PlotAxes, path: &Path) -> Result<(), HarnessError> {
    let mut series: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.is_aggregate()) {
        let (label, x, y) = match axes {
            PlotAxes::SizeVsGamma => (format!("{} d={}", r.variant, r.delta), r.gamma_db, r.mean_s),
            PlotAxes::SizeVsDelta => (format!("{} {} dB", r.variant, r.gamma_db), r.delta, r.mean_s),
            PlotAxes::RuntimeVsDevices => (format!("{} N={} {} dB", r.variant, r.n, r.gamma_db), r.k as f64, r.extra1),
            PlotAxes::EfficiencyVsGamma => (r.variant.clone(), r.gamma_db, r.extra2),
        };
        series.entry(label).or_default().push((x, y));
    }
    if series.is_empty() {
        return Err(HarnessError::Validation(vec!["no aggregate rows to plot".into()]));
    }
    let points = series.values().flatten();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in points {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if x1 == x0 {
        x1 = x0 + 1.0;
    }
    if y1 == y0 {
        y1 = y0 + 1.0;
    }
    let (w, h, pad) = (640.0, 420.0, 50.0);
    let sx = |x: f64| pad + (x - x0) / (x1 - x0) * (w - 2.0 * pad);
    let sy = |y: f64| h - pad - (y - y0) / (y1 - y0) * (h - 2.0 * pad);
    const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="11">"#);
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<path d="M{pad} {pad} V{} H{}" stroke="black" fill="none"/>"#,
        h - pad,
        w - pad
    );
    let _ = writeln!(svg, r#"<text x="{pad}" y="{}">{x0:.3}</text>"#, h - pad + 15.0);
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="end">{x1:.3}</text>"#, w - pad, h - pad + 15.0);
    let _ = writeln!(svg, r#"<text x="5" y="{}">{y0:.3}</text>"#, h - pad);
    let _ = writeln!(svg, r#"<text x="5" y="{}">{y1:.3}</text>"#, pad);
    for (i, (label, pts)) in series.iter_mut().enumerate() {
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let color = COLORS[i % COLORS.len()];
        let coords: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" stroke="{color}" fill="none" stroke-width="1.5"/>"#,
            coords.join(" ")
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
            w - pad - 150.0,
            pad + 14.0 * i as f64,
            escape(label)
        );
    }
    svg.push_str("</svg>\n");
    std::fs::write(path, svg).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
