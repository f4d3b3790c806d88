//! Exact ordered-median fits of one hyperplane to a point set, and of one
//! hyperplane per cluster to a fixed partition.

use crate::arrangement::{self, Families};
use crate::error::{Error, Result};
use crate::geometry::{Chart, Hyperplane, Point, ResidualKind};
use crate::lp::{LpModel, Sense, VarId};
use crate::objectives::OrderedWeights;

#[derive(Clone, Debug)]
pub struct SingleFit {
    pub hyperplane: Hyperplane,
    pub cost: f64,
}

fn is_constant(w: &OrderedWeights) -> bool {
    let l = w.lambda();
    l.iter().all(|&v| v == l[0])
}

/// OM of the residuals of `points` against chart parameters `theta`.
pub fn chart_cost(chart: &Chart, points: &[Point], theta: &[f64], w: &OrderedWeights, buf: &mut Vec<f64>) -> f64 {
    buf.clear();
    buf.extend(points.iter().map(|x| chart.residual(x, theta)));
    buf.sort_unstable_by(|a, b| b.total_cmp(a));
    buf.iter().zip(w.lambda()).map(|(e, l)| e * l).sum()
}

/// Best single hyperplane for `points` under `w`.
///
/// In the plane this enumerates vertices of the incidence arrangement
/// (constant weights) or of incidence plus bisector lines (general weights).
/// For `d > 2` it solves one linear program per chart instead.
pub fn fit_single_hyperplane(points: &[Point], w: &OrderedWeights, kind: ResidualKind) -> Result<SingleFit> {
    kind.require_solvable()?;
    if points.is_empty() {
        return Err(Error::BadParam("cannot fit a hyperplane to no points".into()));
    }
    let w = w.resized(points.len())?;
    let d = points[0].len();
    if d != 2 {
        let idx: Vec<usize> = (0..points.len()).collect();
        let (hs, cost) = fit_partition(points, &[idx], &w, kind)?;
        return Ok(SingleFit { hyperplane: hs.into_iter().next().unwrap(), cost });
    }
    let fam = if is_constant(&w) { Families::incidence_only() } else { Families::all() };
    let idx: Vec<usize> = (0..points.len()).collect();
    let mut best: Option<(f64, Chart, [f64; 2])> = None;
    let mut buf = Vec::with_capacity(points.len());
    for chart in Chart::all(kind, d)? {
        let lines = arrangement::condition_lines(&chart, points, &idx, fam);
        for v in arrangement::vertices(&chart, &lines) {
            let c = chart_cost(&chart, points, &v, &w, &mut buf);
            if best.as_ref().is_none_or(|b| c < b.0) {
                best = Some((c, chart, v));
            }
        }
    }
    let (cost, chart, theta) = best.ok_or_else(|| Error::DegenerateData("no candidate hyperplane".into()))?;
    Ok(SingleFit { hyperplane: chart.hyperplane(&theta), cost })
}

/// Jointly optimal hyperplanes for a fixed partition: minimizes the OM of
/// the concatenated residuals, each cluster measured against its own
/// hyperplane. `clusters` index into `points`; every point must appear in
/// exactly one cluster and clusters must be nonempty.
pub fn fit_partition(
    points: &[Point],
    clusters: &[Vec<usize>],
    w: &OrderedWeights,
    kind: ResidualKind,
) -> Result<(Vec<Hyperplane>, f64)> {
    kind.require_solvable()?;
    let n: usize = clusters.iter().map(|c| c.len()).sum();
    if n != points.len() || clusters.iter().any(|c| c.is_empty()) {
        return Err(Error::BadParam("clusters must be nonempty and cover every point once".into()));
    }
    let w = w.resized(n)?;
    let d = points[0].len();
    let charts = Chart::all(kind, d)?;
    let p = clusters.len();
    let combos = charts.len().pow(p as u32);
    let mut best: Option<(f64, Vec<Hyperplane>)> = None;
    for code in 0..combos {
        let mut c = code;
        let pick: Vec<Chart> = (0..p)
            .map(|_| {
                let ch = charts[c % charts.len()];
                c /= charts.len();
                ch
            })
            .collect();
        let (hs, cost) = solve_partition_lp(points, clusters, &pick, &w)?;
        if best.as_ref().is_none_or(|b| cost < b.0 - 1e-12) {
            best = Some((cost, hs));
        }
    }
    let (cost, hs) = best.unwrap();
    Ok((hs, cost))
}

fn solve_partition_lp(
    points: &[Point],
    clusters: &[Vec<usize>],
    charts: &[Chart],
    w: &OrderedWeights,
) -> Result<(Vec<Hyperplane>, f64)> {
    let n = points.len();
    let d = points[0].len();
    let mut m = LpModel::new();
    let bps = w.breakpoints();
    let direct: f64 = bps.iter().filter(|b| b.0 == n).map(|b| b.1).sum();
    let mut thetas: Vec<Vec<VarId>> = Vec::new();
    for (j, chart) in charts.iter().enumerate() {
        let sb = chart.slope_box().unwrap_or(f64::INFINITY);
        let mut t = vec![m.add_var(format!("alpha{j}"), 0.0, f64::NEG_INFINITY, f64::INFINITY)];
        for l in 1..d {
            t.push(m.add_var(format!("beta{j}_{l}"), 0.0, -sb, sb));
        }
        thetas.push(t);
    }
    let e: Vec<VarId> = (0..n).map(|i| m.add_var(format!("e{i}"), direct, 0.0, f64::INFINITY)).collect();
    for (j, cl) in clusters.iter().enumerate() {
        for &i in cl {
            let (wv, b) = charts[j].row(&points[i]);
            let mut pos = vec![(e[i], 1.0)];
            let mut neg = vec![(e[i], 1.0)];
            for (l, &a) in wv.iter().enumerate() {
                pos.push((thetas[j][l], -a));
                neg.push((thetas[j][l], a));
            }
            m.add_row(format!("abs+{i}"), &pos, Sense::Ge, -b)?;
            m.add_row(format!("abs-{i}"), &neg, Sense::Ge, b)?;
        }
    }
    for &(k, wk) in bps.iter().filter(|b| b.0 < n) {
        let t = m.add_var(format!("t{k}"), wk * k as f64, f64::NEG_INFINITY, f64::INFINITY);
        for i in 0..n {
            let s = m.add_var(format!("s{k}_{i}"), wk, 0.0, f64::INFINITY);
            m.add_row(format!("kc{k}_{i}"), &[(s, 1.0), (e[i], -1.0), (t, 1.0)], Sense::Ge, 0.0)?;
        }
    }
    let sol = m.solve()?;
    if !sol.is_optimal() {
        return Err(crate::lp::LpError::NumericalFailure(format!("partition fit ended {:?}", sol.status)).into());
    }
    let hs: Vec<Hyperplane> = charts
        .iter()
        .zip(&thetas)
        .map(|(c, t)| {
            let theta: Vec<f64> = t.iter().map(|&v| sol.value(v)).collect();
            c.hyperplane(&theta)
        })
        .collect();
    Ok((hs, sol.objective))
}
