//! Pricing: find a column `(S, h)` of minimum reduced cost
//! `gamma + sum_{i in S} (cstar_i e_i(h) - phi_i)`, see [`reduced_cost`].
//!
//! For a fixed point set `S` the sum over `S` is convex and piecewise linear
//! in the chart parameters, with kinks only on the incidence lines of `S`.
//! Its minimum therefore sits at a vertex of the incidence arrangement of
//! `S` (strip edges and the zero-slope anchor included), and every such
//! vertex is also a vertex of the arrangement over all points. Enumerating
//! those vertices and choosing the best `S` at each one is thus exact, with
//! or without branching restrictions (they only limit which `S` may be
//! chosen). Threshold lines where `cstar_i e_i = phi_i` are added on top.
//!
//! Peak duals add `(sum_{i in S} peak_i) max_{i in S} e_i`, which kinks
//! where two residuals are equal; the equal-residual lines of every pair are
//! then enumerated as well.

use std::collections::HashSet;

use log::{debug, warn};
use rayon::prelude::*;

use crate::arrangement::{self, Line};
use crate::error::{Error, Result};
use crate::geometry::{Chart, Hyperplane, Instance, ResidualKind};
use crate::master::{reduced_cost, Column, DualPrices, PricingCertificate, PricingRound};

/// Branching restrictions as seen by the pricer.
#[derive(Clone, Debug)]
pub struct Restriction {
    /// Points already covered by a fixed column.
    pub excluded: Vec<bool>,
    /// Component id per point; points sharing an id enter together.
    pub comp: Vec<usize>,
    /// Pairs of points that may not share a column.
    pub apart: Vec<(usize, usize)>,
    /// Exact `(members, hyperplane)` pairs that may not be proposed.
    pub forbidden: Vec<(Vec<usize>, Hyperplane)>,
}

impl Restriction {
    pub fn none(n: usize) -> Self {
        Restriction { excluded: vec![false; n], comp: (0..n).collect(), apart: Vec::new(), forbidden: Vec::new() }
    }

    pub fn n(&self) -> usize {
        self.comp.len()
    }

    /// Builds from raw pair lists. Together pairs are merged by union-find.
    pub fn from_pairs(
        n: usize,
        excluded: Vec<bool>,
        together: &[(usize, usize)],
        apart: &[(usize, usize)],
        forbidden: Vec<(Vec<usize>, Hyperplane)>,
    ) -> Result<Self> {
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while p[r] != r {
                r = p[r];
            }
            let mut y = x;
            while p[y] != r {
                let nx = p[y];
                p[y] = r;
                y = nx;
            }
            r
        }
        for &(a, b) in together {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
        let comp: Vec<usize> = (0..n).map(|i| find(&mut parent, i)).collect();
        for &(a, b) in apart {
            if comp[a] == comp[b] {
                return Err(Error::InfeasibleConstraints(format!("points {a} and {b} are both together and apart")));
            }
        }
        let mut excluded = excluded;
        // A component is unusable as soon as one member is covered.
        let blocked: HashSet<usize> = (0..n).filter(|&i| excluded[i]).map(|i| comp[i]).collect();
        for i in 0..n {
            if blocked.contains(&comp[i]) {
                excluded[i] = true;
            }
        }
        Ok(Restriction { excluded, comp, apart: apart.to_vec(), forbidden })
    }

    pub fn admits_members(&self, members: &[usize]) -> bool {
        if members.iter().any(|&i| self.excluded[i]) {
            return false;
        }
        let set: HashSet<usize> = members.iter().copied().collect();
        for &i in members {
            for (j, &c) in self.comp.iter().enumerate() {
                if c == self.comp[i] && !set.contains(&j) {
                    return false;
                }
            }
        }
        !self.apart.iter().any(|&(a, b)| set.contains(&a) && set.contains(&b))
    }

    pub fn is_forbidden(&self, members: &[usize], h: &Hyperplane) -> bool {
        self.forbidden.iter().any(|(m, f)| m.as_slice() == members && f.approx_eq(h, 1e-8))
    }

    pub fn admits(&self, col: &Column) -> bool {
        self.admits_members(&col.members) && !self.is_forbidden(&col.members, &col.hyperplane)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Certificate {
    ExactMinimum,
    HeuristicOnly,
}

#[derive(Clone, Debug)]
pub struct PricedColumn {
    pub column: Column,
    pub reduced_cost: f64,
}

#[derive(Clone, Debug)]
pub struct PricingOutcome {
    /// Best nonempty columns, sorted by reduced cost.
    pub columns: Vec<PricedColumn>,
    /// Reduced cost of the best nonempty column (`+inf` if none admissible).
    pub best: f64,
    /// Value of the empty selection.
    pub empty_value: f64,
    pub certificate: Certificate,
    pub candidates: usize,
}

impl PricingOutcome {
    pub fn best_column(&self) -> Option<&PricedColumn> {
        self.columns.first()
    }

    pub fn into_round(self) -> PricingRound {
        PricingRound {
            best: self.best,
            certificate: match self.certificate {
                Certificate::ExactMinimum => PricingCertificate::ExactMinimum,
                Certificate::HeuristicOnly => PricingCertificate::HeuristicOnly,
            },
            columns: self.columns.into_iter().map(|c| c.column).collect(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct PricingOptions {
    /// Columns returned per call.
    pub max_columns: usize,
    /// Add pairwise-equidistance lines to the exact enumeration.
    pub bisectors: bool,
    /// Slope half-width of the heuristic grid on the vertical chart.
    pub slope_bound: f64,
    pub grid: usize,
    /// Check a small neighbourhood of the exact winner.
    pub safeguard: bool,
}

impl Default for PricingOptions {
    fn default() -> Self {
        PricingOptions { max_columns: 10, bisectors: false, slope_bound: 10.0, grid: 21, safeguard: true }
    }
}

/// Component structure reused across candidates.
struct Selector {
    /// Admissible components as member lists.
    comps: Vec<Vec<usize>>,
    /// Apart edges between component indices.
    edges: Vec<(usize, usize)>,
}

impl Selector {
    fn new(restr: &Restriction) -> Self {
        let n = restr.n();
        let mut index = vec![usize::MAX; n];
        let mut comps: Vec<Vec<usize>> = Vec::new();
        for i in 0..n {
            if restr.excluded[i] {
                continue;
            }
            let root = restr.comp[i];
            if index[root] == usize::MAX {
                index[root] = comps.len();
                comps.push(Vec::new());
            }
            comps[index[root]].push(i);
        }
        let mut edges: Vec<(usize, usize)> = restr
            .apart
            .iter()
            .filter(|&&(a, b)| !restr.excluded[a] && !restr.excluded[b])
            .map(|&(a, b)| {
                let (x, y) = (index[restr.comp[a]], index[restr.comp[b]]);
                (x.min(y), x.max(y))
            })
            .collect();
        edges.sort_unstable();
        edges.dedup();
        Selector { comps, edges }
    }

    /// Best nonempty admissible selection given per-point contributions
    /// `g`, plus `max_{i in S} e_i` times `sum_{i in S} pi_i` when `pi` is
    /// nonempty. Returns `(value, chosen component indices)`.
    fn select(&self, g: &[f64], e: &[f64], pi: &[f64]) -> Option<(f64, Vec<usize>)> {
        if self.comps.is_empty() {
            return None;
        }
        let base: Vec<f64> = self.comps.iter().map(|c| c.iter().map(|&i| g[i]).sum()).collect();
        if pi.iter().all(|&x| x <= 0.0) {
            return self.select_weights(&base);
        }
        // Scan thresholds m over component peaks: components peaking above
        // m are left out, the rest pay pi * m. The threshold equal to the
        // true peak of the optimal selection prices it exactly, the others
        // only overestimate.
        let mass: Vec<f64> = self.comps.iter().map(|c| c.iter().map(|&i| pi[i]).sum()).collect();
        let top: Vec<f64> = self.comps.iter().map(|c| c.iter().map(|&i| e[i]).fold(0.0, f64::max)).collect();
        let mut order: Vec<usize> = (0..self.comps.len()).collect();
        order.sort_by(|&a, &b| top[a].total_cmp(&top[b]).then(a.cmp(&b)));
        let mut weights = vec![f64::INFINITY; self.comps.len()];
        let mut best: Option<(f64, Vec<usize>)> = None;
        let mut k = 0;
        while k < order.len() {
            let m = top[order[k]];
            while k < order.len() && top[order[k]] <= m {
                k += 1;
            }
            for &c in &order[..k] {
                weights[c] = base[c] + mass[c] * m;
            }
            if let Some(cand) = self.select_weights(&weights) {
                if best.as_ref().is_none_or(|b| cand.0 < b.0) {
                    best = Some(cand);
                }
            }
        }
        best
    }

    /// Best nonempty admissible selection for per-component weights;
    /// infinite weights mark unavailable components.
    fn select_weights(&self, weights: &[f64]) -> Option<(f64, Vec<usize>)> {
        let neg: Vec<usize> = (0..weights.len()).filter(|&c| weights[c] < 0.0).collect();
        if neg.is_empty() {
            let mut best = 0;
            for c in 1..weights.len() {
                if weights[c] < weights[best] {
                    best = c;
                }
            }
            return weights[best].is_finite().then(|| (weights[best], vec![best]));
        }
        let conflicts: Vec<(usize, usize)> = self
            .edges
            .iter()
            .copied()
            .filter(|&(a, b)| weights[a] < 0.0 && weights[b] < 0.0)
            .collect();
        if conflicts.is_empty() {
            let s = neg.iter().map(|&c| weights[c]).sum();
            return Some((s, neg));
        }
        // Exact maximum-weight independent set over the negative components.
        let mut order = neg.clone();
        order.sort_by(|&a, &b| weights[a].total_cmp(&weights[b]).then(a.cmp(&b)));
        let mut best = (0.0, Vec::new());
        let mut cur = Vec::new();
        mwis(&order, 0, weights, &conflicts, &mut cur, 0.0, &mut best);
        best.1.sort_unstable();
        Some(best)
    }

    fn members(&self, chosen: &[usize]) -> Vec<usize> {
        let mut m: Vec<usize> = chosen.iter().flat_map(|&c| self.comps[c].iter().copied()).collect();
        m.sort_unstable();
        m
    }
}

fn mwis(
    order: &[usize],
    at: usize,
    w: &[f64],
    conflicts: &[(usize, usize)],
    cur: &mut Vec<usize>,
    val: f64,
    best: &mut (f64, Vec<usize>),
) {
    let rest: f64 = order[at..].iter().map(|&c| w[c]).sum();
    if val + rest >= best.0 {
        return;
    }
    if at == order.len() {
        *best = (val, cur.clone());
        return;
    }
    let c = order[at];
    let clash = cur.iter().any(|&o| conflicts.contains(&(c.min(o), c.max(o))));
    if !clash {
        cur.push(c);
        mwis(order, at + 1, w, conflicts, cur, val + w[c], best);
        cur.pop();
    }
    mwis(order, at + 1, w, conflicts, cur, val, best);
}

/// A candidate evaluation: value, candidate index, chart, parameters,
/// chosen components.
type Scored = (f64, usize, Chart, Vec<f64>, Vec<usize>);

fn evaluate(
    inst: &Instance,
    duals: &DualPrices,
    sel: &Selector,
    chart: &Chart,
    theta: &[f64],
    buf: &mut (Vec<f64>, Vec<f64>),
) -> Option<(f64, Vec<usize>)> {
    let (g, e) = buf;
    g.clear();
    e.clear();
    for (i, x) in inst.points().iter().enumerate() {
        let r = chart.residual(x, theta);
        e.push(r);
        g.push(duals.cstar[i] * r - duals.phi[i]);
    }
    sel.select(g, e, &duals.peak).map(|(s, c)| (duals.gamma + s, c))
}

/// Keeps the best `k` scored candidates with distinct member sets.
fn top_distinct(mut all: Vec<Scored>, sel: &Selector, restr: &Restriction, k: usize) -> Vec<(f64, Chart, Vec<f64>, Vec<usize>)> {
    all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    let mut out = Vec::new();
    for (v, _, chart, theta, chosen) in all {
        let members = sel.members(&chosen);
        if !restr.forbidden.is_empty() && restr.is_forbidden(&members, &chart.hyperplane(&theta)) {
            continue;
        }
        if seen.insert(members.clone()) {
            out.push((v, chart, theta, members));
            if out.len() >= k {
                break;
            }
        }
    }
    out
}

fn build_outcome(
    inst: &Instance,
    duals: &DualPrices,
    kind: ResidualKind,
    picked: Vec<(f64, Chart, Vec<f64>, Vec<usize>)>,
    certificate: Certificate,
    candidates: usize,
) -> PricingOutcome {
    let mut columns: Vec<PricedColumn> = picked
        .into_iter()
        .map(|(_, chart, theta, members)| {
            let column = Column::new(inst, members, chart.hyperplane(&theta), kind);
            let rc = reduced_cost(&column, duals);
            PricedColumn { column, reduced_cost: rc }
        })
        .collect();
    columns.sort_by(|a, b| a.reduced_cost.total_cmp(&b.reduced_cost));
    let best = columns.first().map(|c| c.reduced_cost).unwrap_or(f64::INFINITY);
    PricingOutcome { columns, best, empty_value: duals.gamma, certificate, candidates }
}

/// Candidate hyperplanes for exact pricing, as chart vertices.
pub fn enumerate_candidates(
    inst: &Instance,
    duals: &DualPrices,
    kind: ResidualKind,
    restr: &Restriction,
    bisectors: bool,
) -> Result<Vec<(Chart, [f64; 2])>> {
    kind.require_solvable()?;
    if inst.d() != 2 {
        return Err(Error::DimensionUnsupported(inst.d()));
    }
    let idx: Vec<usize> = (0..inst.n()).filter(|&i| !restr.excluded[i]).collect();
    let mut out = Vec::new();
    for chart in Chart::all(kind, 2)? {
        let mut lines: Vec<Line> = Vec::new();
        let pts = inst.points();
        for &i in &idx {
            lines.push(arrangement::incidence_line(&chart, &pts[i]));
            if duals.cstar[i] > 1e-12 && duals.phi[i] > 0.0 {
                lines.extend(arrangement::threshold_lines(&chart, &pts[i], duals.phi[i] / duals.cstar[i]));
            }
        }
        if bisectors || duals.peak.iter().any(|&x| x > 0.0) {
            for (a, &i) in idx.iter().enumerate() {
                for &j in &idx[a + 1..] {
                    for s in [1.0, -1.0] {
                        lines.extend(arrangement::bisector_line(&chart, &pts[i], &pts[j], s));
                    }
                }
            }
        }
        lines.extend(arrangement::anchor_lines(&chart));
        for v in arrangement::vertices(&chart, &lines) {
            out.push((chart, v));
        }
    }
    Ok(out)
}

/// Exact pricing in the plane by vertex enumeration.
pub fn price_exact(
    inst: &Instance,
    duals: &DualPrices,
    kind: ResidualKind,
    restr: &Restriction,
    opts: &PricingOptions,
) -> Result<PricingOutcome> {
    let cands = enumerate_candidates(inst, duals, kind, restr, opts.bisectors)?;
    let sel = Selector::new(restr);
    let n = inst.n();
    let scored: Vec<Scored> = cands
        .par_chunks(512)
        .enumerate()
        .map(|(ci, chunk)| {
            let mut g = (Vec::with_capacity(n), Vec::with_capacity(n));
            let mut local: Vec<Scored> = Vec::new();
            for (k, (chart, v)) in chunk.iter().enumerate() {
                if let Some((val, chosen)) = evaluate(inst, duals, &sel, chart, v, &mut g) {
                    local.push((val, ci * 512 + k, *chart, v.to_vec(), chosen));
                }
            }
            local.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            local.truncate(opts.max_columns * 8 + 8);
            local
        })
        .flatten()
        .collect();
    let picked = top_distinct(scored, &sel, restr, opts.max_columns);
    if opts.safeguard {
        if let Some((v, chart, theta, _)) = picked.first() {
            let mut g = (Vec::with_capacity(n), Vec::with_capacity(n));
            let h = 1e-4 * (1.0 + theta[0].abs() + theta[1].abs());
            for a in -2i32..=2 {
                for b in -2i32..=2 {
                    let mut t = [theta[0] + a as f64 * h, theta[1] + b as f64 * h];
                    if let Some(s) = chart.slope_box() {
                        t[1] = t[1].clamp(-s, s);
                    }
                    if let Some((w, _)) = evaluate(inst, duals, &sel, chart, &t, &mut g) {
                        if w < v - 1e-9 * (1.0 + v.abs()) {
                            warn!("pricing safeguard: neighbour value {w} below enumerated minimum {v}");
                        }
                    }
                }
            }
        }
    }
    let out = build_outcome(inst, duals, kind, picked, Certificate::ExactMinimum, cands.len());
    debug!("price_exact candidates={} best={:.3e}", out.candidates, out.best);
    Ok(out)
}

/// Parameter grid over a chart: `g` values per slope coordinate inside
/// `[-bound, bound]`, and for each slope vector `g` intercepts spanning the
/// values that put some admissible point on the hyperplane.
pub fn chart_grid(inst: &Instance, chart: &Chart, idx: &[usize], g: usize, slope_bound: f64) -> Vec<Vec<f64>> {
    let d = inst.d();
    let bound = chart.slope_box().unwrap_or(slope_bound);
    let steps: Vec<f64> = (0..g).map(|a| -bound + 2.0 * bound * a as f64 / (g - 1) as f64).collect();
    let mut out = Vec::new();
    let total = g.pow((d - 1) as u32);
    for code in 0..total {
        let mut c = code;
        let slopes: Vec<f64> = (0..d - 1)
            .map(|_| {
                let s = steps[c % g];
                c /= g;
                s
            })
            .collect();
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &i in idx {
            let (w, b) = chart.row(inst.point(i));
            let a0 = b - w[1..].iter().zip(&slopes).map(|(x, s)| x * s).sum::<f64>();
            lo = lo.min(a0);
            hi = hi.max(a0);
        }
        if !lo.is_finite() {
            continue;
        }
        for a in 0..g {
            let alpha = if g == 1 { lo } else { lo + (hi - lo) * a as f64 / (g - 1) as f64 };
            let mut theta = vec![alpha];
            theta.extend_from_slice(&slopes);
            out.push(theta);
        }
    }
    out
}

/// Grid heuristic; any dimension.
pub fn price_heuristic(
    inst: &Instance,
    duals: &DualPrices,
    kind: ResidualKind,
    restr: &Restriction,
    opts: &PricingOptions,
) -> Result<PricingOutcome> {
    kind.require_solvable()?;
    if opts.grid < 3 {
        return Err(Error::BadParam("grid resolution must be at least 3".into()));
    }
    let sel = Selector::new(restr);
    let idx: Vec<usize> = (0..inst.n()).filter(|&i| !restr.excluded[i]).collect();
    let mut scored: Vec<Scored> = Vec::new();
    let mut g = (Vec::with_capacity(inst.n()), Vec::with_capacity(inst.n()));
    let mut count = 0;
    for chart in Chart::all(kind, inst.d())? {
        for theta in chart_grid(inst, &chart, &idx, opts.grid, opts.slope_bound) {
            if let Some((v, chosen)) = evaluate(inst, duals, &sel, &chart, &theta, &mut g) {
                scored.push((v, count, chart, theta, chosen));
            }
            count += 1;
        }
    }
    let picked = top_distinct(scored, &sel, restr, opts.max_columns);
    Ok(build_outcome(inst, duals, kind, picked, Certificate::HeuristicOnly, count))
}

/// Heuristic first; exact enumeration when the grid finds nothing below
/// `-tol` and the dimension allows it.
pub fn price(
    inst: &Instance,
    duals: &DualPrices,
    kind: ResidualKind,
    restr: &Restriction,
    opts: &PricingOptions,
    tol: f64,
) -> Result<PricingOutcome> {
    let h = price_heuristic(inst, duals, kind, restr, opts)?;
    if h.best < -tol {
        return Ok(h);
    }
    if inst.d() != 2 {
        return Ok(h);
    }
    price_exact(inst, duals, kind, restr, opts)
}
