//! Condition lines in a two-parameter chart and their pairwise intersections.
//!
//! In the plane every hyperplane of a [`Chart`] is a point
//! `theta = (alpha, slope)`, and each residual is `|w_i . theta - b_i|`.
//! The objectives optimized over a chart are piecewise linear with kinks on
//! a few line families, so their minima sit at intersections of those lines:
//!
//! * incidence: the hyperplane passes through point `i`;
//! * bisector: residuals of `i` and `j` are equal (`sign = +1`) or equal
//!   with opposite signed value (`sign = -1`);
//! * threshold: a weighted residual crosses a fixed level;
//! * anchor: `slope = 0` on the vertical chart (so that every cell has a
//!   vertex even when all points share the first coordinate) and the strip
//!   edges `slope = +-1` on sup-norm charts.

use crate::geometry::{Chart, Point};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Line {
    pub w: [f64; 2],
    pub b: f64,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Families {
    pub incidence: bool,
    pub bisector: bool,
    pub anchor: bool,
}

impl Families {
    pub fn incidence_only() -> Self {
        Families { incidence: true, bisector: false, anchor: true }
    }

    pub fn all() -> Self {
        Families { incidence: true, bisector: true, anchor: true }
    }
}

fn row2(chart: &Chart, x: &[f64]) -> ([f64; 2], f64) {
    let (w, b) = chart.row(x);
    ([w[0], w[1]], b)
}

pub fn incidence_line(chart: &Chart, x: &[f64]) -> Line {
    let (w, b) = row2(chart, x);
    Line { w, b }
}

/// `w . theta - b = +-level`.
pub fn threshold_lines(chart: &Chart, x: &[f64], level: f64) -> [Line; 2] {
    let (w, b) = row2(chart, x);
    [Line { w, b: b + level }, Line { w, b: b - level }]
}

/// `(w_i . theta - b_i) = sign * (w_j . theta - b_j)`.
pub fn bisector_line(chart: &Chart, xi: &[f64], xj: &[f64], sign: f64) -> Option<Line> {
    let (wi, bi) = row2(chart, xi);
    let (wj, bj) = row2(chart, xj);
    let w = [wi[0] - sign * wj[0], wi[1] - sign * wj[1]];
    if w[0] == 0.0 && w[1] == 0.0 {
        return None;
    }
    Some(Line { w, b: bi - sign * bj })
}

pub fn anchor_lines(chart: &Chart) -> Vec<Line> {
    match chart {
        Chart::Vertical => vec![Line { w: [0.0, 1.0], b: 0.0 }],
        Chart::L1 { .. } => vec![Line { w: [0.0, 1.0], b: 1.0 }, Line { w: [0.0, 1.0], b: -1.0 }],
    }
}

/// Lines from the requested families over the listed points.
pub fn condition_lines(chart: &Chart, points: &[Point], idx: &[usize], fam: Families) -> Vec<Line> {
    let mut out = Vec::new();
    if fam.incidence {
        for &i in idx {
            out.push(incidence_line(chart, &points[i]));
        }
    }
    if fam.bisector {
        for (a, &i) in idx.iter().enumerate() {
            for &j in &idx[a + 1..] {
                for s in [1.0, -1.0] {
                    if let Some(l) = bisector_line(chart, &points[i], &points[j], s) {
                        out.push(l);
                    }
                }
            }
        }
    }
    if fam.anchor {
        out.extend(anchor_lines(chart));
    }
    out
}

pub fn intersect(a: &Line, b: &Line) -> Option<[f64; 2]> {
    let det = a.w[0] * b.w[1] - a.w[1] * b.w[0];
    let scale = (a.w[0].abs() + a.w[1].abs()) * (b.w[0].abs() + b.w[1].abs());
    if det.abs() <= 1e-12 * scale {
        return None;
    }
    let t0 = (a.b * b.w[1] - b.b * a.w[1]) / det;
    let t1 = (a.w[0] * b.b - b.w[0] * a.b) / det;
    if t0.is_finite() && t1.is_finite() {
        Some([t0, t1])
    } else {
        None
    }
}

/// All pairwise intersections inside the chart's admissible region, in
/// deterministic (pair-index) order. Exact duplicates are dropped.
pub fn vertices(chart: &Chart, lines: &[Line]) -> Vec<[f64; 2]> {
    let bound = chart.slope_box();
    let mut out = Vec::new();
    for a in 0..lines.len() {
        for b in a + 1..lines.len() {
            if let Some(mut t) = intersect(&lines[a], &lines[b]) {
                if let Some(s) = bound {
                    if t[1].abs() > s + 1e-9 {
                        continue;
                    }
                    t[1] = t[1].clamp(-s, s);
                }
                out.push(t);
            }
        }
    }
    out.sort_by(|x, y| x[0].total_cmp(&y[0]).then(x[1].total_cmp(&y[1])));
    out.dedup();
    out
}

/// Absolute defect of `theta` against a line, for re-substitution checks.
pub fn defect(line: &Line, theta: &[f64; 2]) -> f64 {
    (line.w[0] * theta[0] + line.w[1] * theta[1] - line.b).abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn incidence_pairs_give_lines_through_points() {
        let pts = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![2.0, 0.0]];
        let lines = condition_lines(&Chart::Vertical, &pts, &[0, 1, 2], Families { incidence: true, ..Default::default() });
        let mut v = vertices(&Chart::Vertical, &lines);
        v.sort_by(|a, b| a[1].total_cmp(&b[1]));
        // (intercept, slope) of y = -x + 2, y = 0, y = x.
        let expect = [[2.0, -1.0], [0.0, 0.0], [0.0, 1.0]];
        assert_eq!(v.len(), 3);
        for (a, b) in v.iter().zip(expect) {
            assert!((a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn every_vertex_satisfies_two_conditions() {
        let pts = vec![vec![0.3, 1.0], vec![1.7, -0.4], vec![2.2, 2.5], vec![-1.0, 0.8]];
        let idx = [0, 1, 2, 3];
        for chart in Chart::all(crate::geometry::ResidualKind::L1, 2).unwrap().into_iter().chain([Chart::Vertical]) {
            let lines = condition_lines(&chart, &pts, &idx, Families::all());
            for v in vertices(&chart, &lines) {
                let tight = lines.iter().filter(|l| defect(l, &v) <= 1e-8 * (1.0 + v[0].abs() + v[1].abs())).count();
                assert!(tight >= 2);
            }
        }
    }

    #[test]
    fn counts_stay_within_combinatorial_bound() {
        let pts: Vec<Point> = (0..6).map(|i| vec![i as f64, ((i * 7) % 5) as f64]).collect();
        let idx: Vec<usize> = (0..6).collect();
        let lines = condition_lines(&Chart::Vertical, &pts, &idx, Families::all());
        assert!(lines.len() <= 6 + 2 * 15 + 1);
        let v = vertices(&Chart::Vertical, &lines);
        assert!(v.len() <= lines.len() * (lines.len() - 1) / 2);
    }
}
