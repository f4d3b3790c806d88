//! CSV input, JSON result records and SVG plots.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::aggregation::AggregationReport;
use crate::error::{Error, Result};
use crate::geometry::{Gauge, Hyperplane, Instance, Point};
use crate::heuristics::Diagnostics;
use crate::solution::{MipResult, MipStatus, Solution};

pub const QUANDT_CSV: &str = include_str!("../data/quandt.csv");
pub const BOSTON_CSV: &str = include_str!("../data/boston.csv");

/// Parses CSV text: optional header (detected by a non-numeric first row),
/// then `d` numeric columns per row. Rows and columns in errors are
/// 1-based.
pub fn parse_csv(text: &str) -> Result<Vec<Point>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut points: Vec<Point> = Vec::new();
    let mut width = None;
    for (r, rec) in rdr.records().enumerate() {
        let row = r + 1;
        let rec = rec.map_err(|e| Error::Parse { row, col: 0, msg: e.to_string() })?;
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        let parsed: Vec<std::result::Result<f64, _>> = rec.iter().map(|f| f.parse::<f64>()).collect();
        if points.is_empty() && width.is_none() && parsed.iter().any(|v| v.is_err()) {
            // Header row.
            width = Some(rec.len());
            continue;
        }
        let mut p = Vec::with_capacity(rec.len());
        for (c, (v, raw)) in parsed.into_iter().zip(rec.iter()).enumerate() {
            match v {
                Ok(x) if x.is_finite() => p.push(x),
                _ => return Err(Error::Parse { row, col: c + 1, msg: format!("'{raw}' is not a finite number") }),
            }
        }
        let expected = *width.get_or_insert(p.len());
        if p.len() != expected {
            return Err(Error::DimensionMismatch { row, expected, got: p.len() });
        }
        points.push(p);
    }
    if points.is_empty() {
        return Err(Error::Parse { row: 0, col: 0, msg: "no data rows".into() });
    }
    Ok(points)
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<Instance> {
    let text = std::fs::read_to_string(path)?;
    Instance::new(parse_csv(&text)?)
}

pub fn quandt() -> Instance {
    Instance::new(parse_csv(QUANDT_CSV).expect("bundled data")).expect("bundled data")
}

pub fn boston() -> Instance {
    Instance::new(parse_csv(BOSTON_CSV).expect("bundled data")).expect("bundled data")
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct HyperplaneRecord {
    pub beta: Vec<f64>,
    pub alpha: f64,
    pub gauge: Gauge,
}

impl From<&Hyperplane> for HyperplaneRecord {
    fn from(h: &Hyperplane) -> Self {
        HyperplaneRecord { beta: h.beta.clone(), alpha: h.alpha, gauge: h.gauge }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Stats {
    pub nodes: usize,
    pub cg_iterations: usize,
    pub columns: usize,
    pub time_secs: f64,
}

/// One solver run as written to JSON.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunRecord {
    pub method: String,
    pub status: MipStatus,
    pub objective: Option<f64>,
    pub lower_bound: f64,
    pub gap: f64,
    pub hyperplanes: Vec<HyperplaneRecord>,
    pub assignment: Vec<usize>,
    pub residuals: Vec<f64>,
    pub stats: Stats,
    pub geometry_checks: Option<Diagnostics>,
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aggregation: Option<AggregationReport>,
}

impl RunRecord {
    pub fn new(method: &str, r: &MipResult, checks: Option<Diagnostics>) -> Self {
        let empty = Solution { hyperplanes: Vec::new(), assignment: Vec::new(), residuals: Vec::new(), objective: f64::NAN };
        let s = r.solution.as_ref().unwrap_or(&empty);
        RunRecord {
            method: method.to_string(),
            status: r.status,
            objective: r.objective(),
            lower_bound: r.lower_bound,
            gap: r.gap,
            hyperplanes: s.hyperplanes.iter().map(HyperplaneRecord::from).collect(),
            assignment: s.assignment.clone(),
            residuals: s.residuals.clone(),
            stats: Stats { nodes: r.nodes, cg_iterations: r.cg_iterations, columns: r.columns, time_secs: r.elapsed_secs },
            geometry_checks: checks,
            warnings: r.warnings.clone(),
            aggregation: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Agreement {
    pub abs_diff: f64,
    pub agree: bool,
}

/// Aggregation outcome plus the status of the aggregated solve.
pub struct AggregationReportOut {
    pub status: MipStatus,
    pub report: AggregationReport,
}

/// Hidden `oracle` subcommand output.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OracleRecord {
    pub objective: f64,
    pub hyperplanes: Vec<HyperplaneRecord>,
    pub clusters: Vec<Vec<usize>>,
}

/// `--method both` output.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BothRecord {
    pub status: MipStatus,
    pub compact: RunRecord,
    pub bp: RunRecord,
    pub agreement: Agreement,
}

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"];

/// Segment of `{x : beta . x + alpha = 0}` inside the box, if any.
fn clip_line(h: &Hyperplane, lo: [f64; 2], hi: [f64; 2]) -> Option<([f64; 2], [f64; 2])> {
    let (a, b, c) = (h.beta[0], h.beta[1], h.alpha);
    let mut pts: Vec<[f64; 2]> = Vec::new();
    let eps = 1e-12 * (1.0 + lo[0].abs() + hi[0].abs() + lo[1].abs() + hi[1].abs());
    if b != 0.0 {
        for x in [lo[0], hi[0]] {
            let y = -(c + a * x) / b;
            if y >= lo[1] - eps && y <= hi[1] + eps {
                pts.push([x, y]);
            }
        }
    }
    if a != 0.0 {
        for y in [lo[1], hi[1]] {
            let x = -(c + b * y) / a;
            if x >= lo[0] - eps && x <= hi[0] + eps {
                pts.push([x, y]);
            }
        }
    }
    let first = *pts.first()?;
    let far = pts.iter().copied().max_by(|p, q| {
        let dp = (p[0] - first[0]).hypot(p[1] - first[1]);
        let dq = (q[0] - first[0]).hypot(q[1] - first[1]);
        dp.total_cmp(&dq)
    })?;
    Some((first, far))
}

/// SVG text for a planar solution.
pub fn render_svg(sol: &Solution, inst: &Instance) -> Result<String> {
    if inst.d() != 2 {
        return Err(Error::DimensionUnsupported(inst.d()));
    }
    let r = inst.ranges();
    let pad = |lo: f64, hi: f64| {
        let w = (hi - lo).max(1e-9);
        (lo - 0.05 * w, hi + 0.05 * w)
    };
    let (x0, x1) = pad(r[0].0, r[0].1);
    let (y0, y1) = pad(r[1].0, r[1].1);
    let (wpx, hpx) = (600.0, 450.0);
    let sx = |x: f64| 20.0 + (x - x0) / (x1 - x0) * (wpx - 40.0);
    let sy = |y: f64| hpx - 20.0 - (y - y0) / (y1 - y0) * (hpx - 40.0);
    let mut s = String::new();
    writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#).unwrap();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{wpx}" height="{hpx}" viewBox="0 0 {wpx} {hpx}">"#).unwrap();
    writeln!(s, "<style>").unwrap();
    for j in 0..sol.hyperplanes.len() {
        let c = PALETTE[j % PALETTE.len()];
        writeln!(s, ".cluster{j} {{ fill: {c}; }} .line{j} {{ stroke: {c}; stroke-width: 2; }}").unwrap();
    }
    writeln!(s, "</style>").unwrap();
    writeln!(s, r#"<rect x="0" y="0" width="{wpx}" height="{hpx}" fill="white"/>"#).unwrap();
    for (j, h) in sol.hyperplanes.iter().enumerate() {
        if let Some((a, b)) = clip_line(h, [r[0].0, r[1].0], [r[0].1, r[1].1]) {
            writeln!(
                s,
                r#"<line class="line{j}" x1="{:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}"/>"#,
                sx(a[0]),
                sy(a[1]),
                sx(b[0]),
                sy(b[1])
            )
            .unwrap();
        }
    }
    for (i, x) in inst.points().iter().enumerate() {
        let j = sol.assignment.get(i).copied().unwrap_or(0);
        writeln!(s, r#"<circle class="cluster{j}" cx="{:.3}" cy="{:.3}" r="4"/>"#, sx(x[0]), sy(x[1])).unwrap();
    }
    writeln!(s, "</svg>").unwrap();
    Ok(s)
}

pub fn emit_svg(sol: &Solution, inst: &Instance, path: impl AsRef<Path>) -> Result<()> {
    let text = render_svg(sol, inst)?;
    std::fs::write(path, text)?;
    Ok(())
}
