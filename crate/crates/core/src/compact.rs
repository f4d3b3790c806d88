//! Compact big-M formulation and a best-bound branch-and-bound over its
//! binaries.
//!
//! Continuous variables are the hyperplane coefficients per slot, one
//! residual `e_i` per point and whatever the ordered-median block needs;
//! `z[i][j]` assigns point `i` to slot `j`. Residuals are linked by two
//! big-M rows per `(i, j)`:
//!
//! * vertical: `e_i >= +-(x_id - alpha_j - sum_l beta_jl x_il) - M_ij (1 - z_ij)`;
//! * l1: `e_i >= +-(alpha_j + beta_j . x_i) - M_ij (1 - z_ij)` with
//!   `max_l |beta_jl| = 1` encoded through `beta = eta+ - eta-`,
//!   `eta+ <= xi`, `eta- <= 1 - xi`, `eta+ + eta- <= 1`,
//!   `eta+ + eta- >= mu`, `sum_l mu_jl = 1` and `eta+ >= mu` (the selected
//!   coordinate is `+1`, which removes the sign symmetry).
//!
//! Slots are ordered by intercept.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use log::{debug, info, warn};

use crate::error::{Error, Result};
use crate::fit::fit_single_hyperplane;
use crate::geometry::{Hyperplane, Instance, ResidualKind};
use crate::heuristics::{interchange_heuristic, polish};
use crate::lp::{Basis, LpModel, LpStatus, Sense, VarId};
use crate::objectives::{add_uv_block, OrderedWeights, Preset};
use crate::solution::{relative_gap, MipResult, MipStatus, Solution};

/// Binaries allowed in one model.
pub const MAX_BINARIES: usize = 20_000;

/// How the ordered median of the residuals enters the model.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CompactEncoding {
    /// `min sum u + sum v` with `u_k + v_i >= lambda_k e_i`.
    Uv,
    /// `min lambda_1 sum e_i`; constant weights only.
    Sum,
    /// `min t` with `t >= e_i`.
    Center,
    /// `min k t + sum r_i` with `r_i >= e_i - t`.
    KCentrum(usize),
    /// Sum of k-centrum blocks, one per breakpoint of the weights.
    Breakpoint,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RowCounts {
    pub objective: usize,
    pub linking: usize,
    pub assignment: usize,
    pub gauge: usize,
    pub symmetry: usize,
}

#[derive(Clone, Debug)]
pub struct CompactModel {
    pub inst: Instance,
    pub weights: OrderedWeights,
    pub kind: ResidualKind,
    pub p: usize,
    pub encoding: CompactEncoding,
    pub lp: LpModel,
    pub alpha: Vec<VarId>,
    /// Vertical: slopes per slot (`d - 1`); l1: `beta` per slot (`d`).
    pub beta: Vec<Vec<VarId>>,
    pub e: Vec<VarId>,
    /// `z[i][j]`.
    pub z: Vec<Vec<VarId>>,
    /// l1 only, `[j][l]`.
    pub mu: Vec<Vec<VarId>>,
    pub xi: Vec<Vec<VarId>>,
    /// Coefficient box `|beta| <= coef_bound` (vertical) and intercept box.
    pub coef_bound: f64,
    pub alpha_bound: f64,
    pub big_m: Vec<Vec<f64>>,
    pub rows: RowCounts,
}

impl CompactModel {
    pub fn binaries(&self) -> Vec<VarId> {
        let mut out: Vec<VarId> = self.mu.iter().flatten().copied().collect();
        out.extend(self.z.iter().flatten().copied());
        out.extend(self.xi.iter().flatten().copied());
        out
    }

    /// Hyperplanes read off an LP point. `None` for an l1 slot whose
    /// coefficient vector vanished in the relaxation.
    fn hyperplanes(&self, x: &[f64]) -> Vec<Option<Hyperplane>> {
        (0..self.p)
            .map(|j| {
                let a = x[self.alpha[j].0];
                let b: Vec<f64> = self.beta[j].iter().map(|v| x[v.0]).collect();
                match self.kind {
                    ResidualKind::Vertical => Some(Hyperplane::vertical(&b, a)),
                    _ => Hyperplane::new(b, a).ok().map(|h| h.to_linf()),
                }
            })
            .collect()
    }
}

/// Coefficient box for the vertical encoding. In the plane every optimal
/// slope is the slope between two "generalized points" (data points and
/// pairwise midpoints), so twice the largest such slope is safe.
pub fn default_coef_bound(inst: &Instance) -> f64 {
    let ranges = inst.ranges();
    let widths: Vec<f64> = ranges.iter().map(|(lo, hi)| hi - lo).collect();
    let min_w = widths.iter().copied().filter(|&w| w > 1e-12).fold(f64::INFINITY, f64::min);
    let max_w = widths.iter().copied().fold(0.0, f64::max);
    let ratio = if min_w.is_finite() { max_w / min_w } else { 1.0 };
    let mut b = (10.0 * ratio).max(1.0);
    if inst.d() == 2 {
        let mut g: Vec<[f64; 2]> = inst.points().iter().map(|x| [x[0], x[1]]).collect();
        let n = inst.n();
        for a in 0..n {
            for c in a + 1..n {
                let (x, y) = (inst.point(a), inst.point(c));
                g.push([(x[0] + y[0]) / 2.0, (x[1] + y[1]) / 2.0]);
            }
        }
        let mut s: f64 = 0.0;
        for a in 0..g.len() {
            for c in a + 1..g.len() {
                let dx = (g[a][0] - g[c][0]).abs();
                if dx > 1e-9 {
                    s = s.max((g[a][1] - g[c][1]).abs() / dx);
                }
            }
        }
        b = b.max(2.0 * s);
    }
    b
}

fn check_size(inst: &Instance, p: usize, kind: ResidualKind) -> Result<()> {
    kind.require_solvable()?;
    if p == 0 {
        return Err(Error::BadParam("p must be positive".into()));
    }
    let mut bins = inst.n() * p;
    if kind == ResidualKind::L1 {
        bins += 2 * p * inst.d();
    }
    if bins > MAX_BINARIES {
        return Err(Error::SizeLimit(format!("{bins} binaries exceed the limit of {MAX_BINARIES}")));
    }
    Ok(())
}

/// Model with the u/v block, or the plain sum for Weber weights.
pub fn build_compact(inst: &Instance, p: usize, w: &OrderedWeights, kind: ResidualKind) -> Result<CompactModel> {
    let w = w.resized(inst.n())?;
    let enc = if matches!(w.kind(), Preset::Weber) { CompactEncoding::Sum } else { CompactEncoding::Uv };
    build_compact_with(inst, p, &w, kind, enc, None)
}

pub fn build_center_variant(inst: &Instance, p: usize, w: &OrderedWeights, kind: ResidualKind) -> Result<CompactModel> {
    if !matches!(w.kind(), Preset::Center) {
        return Err(Error::WrongPreset(format!("center variant needs Center weights, got {:?}", w.kind())));
    }
    build_compact_with(inst, p, w, kind, CompactEncoding::Center, None)
}

pub fn build_kcentrum_variant(inst: &Instance, p: usize, w: &OrderedWeights, kind: ResidualKind) -> Result<CompactModel> {
    match *w.kind() {
        Preset::KCentrum(k) => build_compact_with(inst, p, w, kind, CompactEncoding::KCentrum(k), None),
        ref other => Err(Error::WrongPreset(format!("k-centrum variant needs KCentrum weights, got {other:?}"))),
    }
}

/// Builder with an explicit encoding and optional coefficient box.
pub fn build_compact_with(
    inst: &Instance,
    p: usize,
    w: &OrderedWeights,
    kind: ResidualKind,
    encoding: CompactEncoding,
    coef_bound: Option<f64>,
) -> Result<CompactModel> {
    check_size(inst, p, kind)?;
    let n = inst.n();
    let d = inst.d();
    let w = w.resized(n)?;
    let lambda = w.lambda().to_vec();
    match encoding {
        CompactEncoding::Sum if lambda.iter().any(|&l| (l - lambda[0]).abs() > 0.0) => {
            return Err(Error::WrongPreset("sum encoding needs constant weights".into()));
        }
        CompactEncoding::Center if lambda[1..].iter().any(|&l| l != 0.0) => {
            return Err(Error::WrongPreset("center encoding needs weights (c, 0, ..., 0)".into()));
        }
        CompactEncoding::KCentrum(k) if k == 0 || k > n || lambda.iter().enumerate().any(|(i, &l)| l != if i < k { lambda[0] } else { 0.0 }) => {
            return Err(Error::WrongPreset(format!("{k}-centrum encoding needs weights (c^k, 0, ...)")));
        }
        _ => {}
    }
    let mut lp = LpModel::new();
    let mut rows = RowCounts::default();
    let e: Vec<VarId> = (0..n).map(|i| lp.add_var(format!("e{i}"), 0.0, 0.0, f64::INFINITY)).collect();

    // Ordered-median block.
    let kc_block = |lp: &mut LpModel, k: usize, wk: f64, rows: &mut RowCounts| -> Result<()> {
        if k == 1 {
            let t = lp.add_var("t1", wk, 0.0, f64::INFINITY);
            for i in 0..n {
                lp.add_row(format!("peak{i}"), &[(t, 1.0), (e[i], -1.0)], Sense::Ge, 0.0)?;
            }
        } else {
            let t = lp.add_var(format!("t{k}"), wk * k as f64, 0.0, f64::INFINITY);
            for i in 0..n {
                let r = lp.add_var(format!("r{k}_{i}"), wk, 0.0, f64::INFINITY);
                lp.add_row(format!("kc{k}_{i}"), &[(t, 1.0), (r, 1.0), (e[i], -1.0)], Sense::Ge, 0.0)?;
            }
        }
        rows.objective += n;
        Ok(())
    };
    match encoding {
        CompactEncoding::Uv => {
            add_uv_block(&mut lp, &w, Some(&e))?;
            rows.objective = n * n;
        }
        CompactEncoding::Sum => {
            for &v in &e {
                lp.set_objective(v, lambda[0]);
            }
        }
        CompactEncoding::Center => kc_block(&mut lp, 1, lambda[0], &mut rows)?,
        CompactEncoding::KCentrum(k) if k == n => {
            for &v in &e {
                lp.set_objective(v, lambda[0]);
            }
        }
        CompactEncoding::KCentrum(k) => kc_block(&mut lp, k, lambda[0], &mut rows)?,
        CompactEncoding::Breakpoint => {
            for (k, wk) in w.breakpoints() {
                if k == n {
                    for &v in &e {
                        lp.set_objective(v, lp.objective_coef(v) + wk);
                    }
                } else {
                    kc_block(&mut lp, k, wk, &mut rows)?;
                }
            }
        }
    }

    // Hyperplane variables and boxes.
    let max_l1 = inst.max_l1();
    let (coef_bound, alpha_bound) = match kind {
        ResidualKind::Vertical => {
            let b = coef_bound.unwrap_or_else(|| default_coef_bound(inst));
            let max_y = inst.points().iter().map(|x| x[d - 1].abs()).fold(0.0, f64::max);
            let max_rest =
                inst.points().iter().map(|x| x[..d - 1].iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
            (b, (b * (1.0 + max_l1)).max(max_y + b * max_rest))
        }
        _ => (1.0, max_l1),
    };
    let alpha: Vec<VarId> =
        (0..p).map(|j| lp.add_var(format!("alpha{j}"), 0.0, -alpha_bound, alpha_bound)).collect();
    let mut beta = Vec::with_capacity(p);
    let mut mu = Vec::new();
    let mut xi = Vec::new();
    match kind {
        ResidualKind::Vertical => {
            for j in 0..p {
                beta.push(
                    (0..d - 1).map(|l| lp.add_var(format!("beta{j}_{l}"), 0.0, -coef_bound, coef_bound)).collect(),
                );
            }
        }
        _ => {
            for j in 0..p {
                let mut bj = Vec::with_capacity(d);
                let mut muj = Vec::with_capacity(d);
                let mut xij = Vec::with_capacity(d);
                for l in 0..d {
                    let b = lp.add_var(format!("beta{j}_{l}"), 0.0, -1.0, 1.0);
                    let ep = lp.add_var(format!("etap{j}_{l}"), 0.0, 0.0, 1.0);
                    let em = lp.add_var(format!("etam{j}_{l}"), 0.0, 0.0, 1.0);
                    let th = lp.add_var(format!("theta{j}_{l}"), 0.0, 0.0, 1.0);
                    let m = lp.add_var(format!("mu{j}_{l}"), 0.0, 0.0, 1.0);
                    let x = lp.add_var(format!("xi{j}_{l}"), 0.0, 0.0, 1.0);
                    lp.add_row(format!("split{j}_{l}"), &[(b, 1.0), (ep, -1.0), (em, 1.0)], Sense::Eq, 0.0)?;
                    lp.add_row(format!("pos{j}_{l}"), &[(ep, 1.0), (x, -1.0)], Sense::Le, 0.0)?;
                    lp.add_row(format!("neg{j}_{l}"), &[(em, 1.0), (x, 1.0)], Sense::Le, 1.0)?;
                    lp.add_row(format!("abs{j}_{l}"), &[(th, 1.0), (ep, -1.0), (em, -1.0)], Sense::Eq, 0.0)?;
                    lp.add_row(format!("norm{j}_{l}"), &[(th, 1.0), (m, -1.0)], Sense::Ge, 0.0)?;
                    lp.add_row(format!("sign{j}_{l}"), &[(ep, 1.0), (m, -1.0)], Sense::Ge, 0.0)?;
                    rows.gauge += 6;
                    bj.push(b);
                    muj.push(m);
                    xij.push(x);
                }
                let entries: Vec<(VarId, f64)> = muj.iter().map(|&m| (m, 1.0)).collect();
                lp.add_row(format!("pick{j}"), &entries, Sense::Eq, 1.0)?;
                rows.gauge += 1;
                beta.push(bj);
                mu.push(muj);
                xi.push(xij);
            }
        }
    }

    // Assignment and linking rows.
    let mut z = Vec::with_capacity(n);
    let mut big_m = Vec::with_capacity(n);
    for i in 0..n {
        let x = inst.point(i);
        let zi: Vec<VarId> = (0..p).map(|j| lp.add_var(format!("z{i}_{j}"), 0.0, 0.0, 1.0)).collect();
        let entries: Vec<(VarId, f64)> = zi.iter().map(|&v| (v, 1.0)).collect();
        lp.add_row(format!("assign{i}"), &entries, Sense::Eq, 1.0)?;
        rows.assignment += 1;
        let mut mi = Vec::with_capacity(p);
        for j in 0..p {
            // Residual expression r = c0 + a . coefficients.
            let (m, expr, c0): (f64, Vec<(VarId, f64)>, f64) = match kind {
                ResidualKind::Vertical => {
                    let rest: f64 = x[..d - 1].iter().map(|v| v.abs()).sum();
                    let m = x[d - 1].abs() + alpha_bound + coef_bound * rest;
                    let mut ex = vec![(alpha[j], -1.0)];
                    ex.extend(beta[j].iter().zip(x).map(|(&b, &v)| (b, -v)));
                    (m, ex, x[d - 1])
                }
                _ => {
                    let l1: f64 = x.iter().map(|v| v.abs()).sum();
                    let mut ex = vec![(alpha[j], 1.0)];
                    ex.extend(beta[j].iter().zip(x).map(|(&b, &v)| (b, v)));
                    (alpha_bound + l1, ex, 0.0)
                }
            };
            // e - r - M z >= c0 - M  and  e + r - M z >= -c0 - M.
            for s in [1.0, -1.0] {
                let mut row = vec![(e[i], 1.0), (zi[j], -m)];
                row.extend(expr.iter().map(|&(v, a)| (v, -s * a)));
                lp.add_row(format!("link{i}_{j}_{}", if s > 0.0 { "p" } else { "m" }), &row, Sense::Ge, s * c0 - m)?;
                rows.linking += 1;
            }
            mi.push(m);
        }
        z.push(zi);
        big_m.push(mi);
    }
    for j in 1..p {
        lp.add_row(format!("order{j}"), &[(alpha[j], 1.0), (alpha[j - 1], -1.0)], Sense::Ge, 0.0)?;
        rows.symmetry += 1;
    }
    Ok(CompactModel {
        inst: inst.clone(),
        weights: w,
        kind,
        p,
        encoding,
        lp,
        alpha,
        beta,
        e,
        z,
        mu,
        xi,
        coef_bound,
        alpha_bound,
        big_m,
        rows,
    })
}

/// Picks the leanest exact encoding for the weights.
pub fn auto_encoding(w: &OrderedWeights) -> CompactEncoding {
    match *w.kind() {
        Preset::Weber => CompactEncoding::Sum,
        Preset::Center => CompactEncoding::Center,
        Preset::KCentrum(k) => CompactEncoding::KCentrum(k),
        _ => CompactEncoding::Breakpoint,
    }
}

#[derive(Clone, Debug)]
pub struct CompactConfig {
    pub time_limit: Option<Duration>,
    pub node_limit: usize,
    pub seed: u64,
    /// Nodes between rounding attempts.
    pub round_every: usize,
}

impl Default for CompactConfig {
    fn default() -> Self {
        CompactConfig { time_limit: None, node_limit: 1_000_000, seed: 0, round_every: 20 }
    }
}

struct Node {
    bound: f64,
    depth: usize,
    id: usize,
    fixes: Vec<(VarId, f64)>,
    basis: Option<Basis>,
}

impl PartialEq for Node {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Node {
    /// Max-heap order: lowest bound first, then deeper, then older.
    fn cmp(&self, o: &Self) -> Ordering {
        o.bound.total_cmp(&self.bound).then(self.depth.cmp(&o.depth)).then(o.id.cmp(&self.id))
    }
}

fn frac(v: f64) -> f64 {
    (v - v.round()).abs()
}

/// Most fractional variable among `vars`, ties to the smallest index.
fn most_fractional(vars: &[VarId], x: &[f64], tol: f64) -> Option<VarId> {
    let mut best: Option<(VarId, f64)> = None;
    for &v in vars {
        let f = frac(x[v.0]);
        if f > tol && best.is_none_or(|(_, b)| f > b + 1e-12) {
            best = Some((v, f));
        }
    }
    best.map(|b| b.0)
}

/// Best-bound branch-and-bound. Branches on the l1 gauge selectors first,
/// then on assignments; the sign selectors `xi` are never branched because
/// with integral `mu` every `beta` in the box is reachable by some `xi`.
pub fn solve_compact(model: &CompactModel, cfg: &CompactConfig) -> Result<MipResult> {
    let start = Instant::now();
    let deadline = cfg.time_limit.map(|t| start + t);
    let inst = &model.inst;
    let (w, kind, p) = (&model.weights, model.kind, model.p);
    let mut lp = model.lp.clone();
    let mu_vars: Vec<VarId> = model.mu.iter().flatten().copied().collect();
    let z_vars: Vec<VarId> = model.z.iter().flatten().copied().collect();
    let mut warnings = Vec::new();

    let mut incumbent: Option<Solution> = None;
    let offer = |inc: &mut Option<Solution>, s: Solution| {
        if inc.as_ref().is_none_or(|b| s.objective < b.objective - 1e-12) {
            debug!("compact incumbent {:.9}", s.objective);
            *inc = Some(s);
        }
    };
    let single = fit_single_hyperplane(inst.points(), w, kind)?;
    offer(&mut incumbent, Solution::evaluate(inst, vec![single.hyperplane; p], w, kind)?);
    if inst.n() >= p * inst.d() {
        offer(&mut incumbent, interchange_heuristic(inst, p, w, kind, cfg.seed)?);
    }
    let ub = |inc: &Option<Solution>| inc.as_ref().map_or(f64::INFINITY, |s| s.objective);

    let mut heap = BinaryHeap::new();
    heap.push(Node { bound: f64::NEG_INFINITY, depth: 0, id: 0, fixes: Vec::new(), basis: None });
    let mut next_id = 1;
    let mut processed = 0;
    let mut stop = None;
    let mut touched_box = false;
    while let Some(node) = heap.pop() {
        if node.bound >= ub(&incumbent) - 1e-7 {
            continue;
        }
        if deadline.is_some_and(|t| Instant::now() >= t) {
            stop = Some(MipStatus::TimeLimit);
            heap.push(node);
            break;
        }
        if processed >= cfg.node_limit {
            stop = Some(MipStatus::NodeLimit);
            heap.push(node);
            break;
        }
        processed += 1;
        for &v in mu_vars.iter().chain(&z_vars) {
            lp.set_bounds(v, 0.0, 1.0);
        }
        for &(v, val) in &node.fixes {
            lp.set_bounds(v, val, val);
        }
        let sol = lp.solve_warm(node.basis.as_ref())?;
        match sol.status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => continue,
            other => {
                warnings.push(format!("node {} LP ended {other:?}; pruned", node.id));
                continue;
            }
        }
        let bound = sol.objective.max(node.bound);
        let x = &sol.x;
        if processed == 1 || processed % cfg.round_every == 0 {
            let hs: Vec<Hyperplane> = model.hyperplanes(x).into_iter().flatten().collect();
            if !hs.is_empty() {
                offer(&mut incumbent, polish(inst, hs, w, kind, 3)?);
            }
        }
        let branch = most_fractional(&mu_vars, x, 1e-6).or_else(|| most_fractional(&z_vars, x, 1e-6));
        let Some(v) = branch else {
            // Integral: the LP hyperplanes are feasible for the assignment.
            let hs: Vec<Hyperplane> = model.hyperplanes(x).into_iter().map(|h| h.expect("integral gauge")).collect();
            if kind == ResidualKind::Vertical {
                touched_box |= hs.iter().any(|h| h.beta[..h.dim() - 1].iter().any(|b| b.abs() >= model.coef_bound - 1e-7));
            }
            let s = Solution::evaluate(inst, hs, w, kind)?;
            if s.objective > sol.objective + 1e-6 * (1.0 + sol.objective.abs()) {
                warn!("integral node {} re-evaluates to {} above its LP value {}", node.id, s.objective, sol.objective);
            }
            offer(&mut incumbent, s);
            continue;
        };
        if bound >= ub(&incumbent) - 1e-7 {
            continue;
        }
        if processed % 1000 == 0 {
            info!("compact nodes={processed} open={} bound={bound:.9} incumbent={:.9}", heap.len(), ub(&incumbent));
        }
        for val in [1.0, 0.0] {
            let mut fixes = node.fixes.clone();
            fixes.push((v, val));
            heap.push(Node { bound, depth: node.depth + 1, id: next_id, fixes, basis: sol.basis.clone() });
            next_id += 1;
        }
    }
    if touched_box {
        warnings.push(format!("an integral solution touched the coefficient box |beta| <= {}", model.coef_bound));
    }
    let best = ub(&incumbent);
    let lower_bound = match stop {
        None => best,
        Some(_) => heap.iter().map(|n| n.bound).fold(best, f64::min),
    };
    let status = stop.unwrap_or(if incumbent.is_some() { MipStatus::Optimal } else { MipStatus::Infeasible });
    let gap = if status == MipStatus::Optimal { 0.0 } else { relative_gap(best, lower_bound) };
    info!("compact done status={status:?} obj={best:.9} lb={lower_bound:.9} nodes={processed}");
    for w in &warnings {
        warn!("{w}");
    }
    Ok(MipResult {
        status,
        solution: incumbent,
        lower_bound,
        gap,
        nodes: processed,
        cg_iterations: 0,
        columns: 0,
        elapsed_secs: start.elapsed().as_secs_f64(),
        warnings,
    })
}

/// Builds with [`auto_encoding`] and solves.
pub fn solve_compact_auto(
    inst: &Instance,
    p: usize,
    w: &OrderedWeights,
    kind: ResidualKind,
    coef_bound: Option<f64>,
    cfg: &CompactConfig,
) -> Result<MipResult> {
    let w = w.resized(inst.n())?;
    let model = build_compact_with(inst, p, &w, kind, auto_encoding(&w), coef_bound)?;
    solve_compact(&model, cfg)
}
