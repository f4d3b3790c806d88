//! Branch-and-price over the set-partitioning master.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};
use std::time::{Duration, Instant};

use log::{info, warn};

use crate::error::{Error, Result};
use crate::geometry::{residual, Hyperplane, Instance, ResidualKind};
use crate::heuristics::{initial_pool, interchange_heuristic, polish};
use crate::master::{cg_loop, CgStatus, Column, Master};
use crate::objectives::OrderedWeights;
use crate::pricing::{price, PricingOptions, Restriction};
use crate::solution::{relative_gap, MipResult, MipStatus, Solution};

#[derive(Clone, Debug, PartialEq)]
pub enum BranchConstraint {
    Together(usize, usize),
    Apart(usize, usize),
    /// Pool id of a column forced to one.
    FixColumn(usize),
    ForbidColumn(Vec<usize>, Hyperplane),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeStatus {
    Open,
    Fathomed,
    Branched,
    Integral,
}

#[derive(Clone, Debug)]
pub struct BnpNode {
    pub id: usize,
    pub parent: Option<usize>,
    pub depth: usize,
    pub constraints: Vec<BranchConstraint>,
    pub bound: f64,
    pub status: NodeStatus,
}

#[derive(Clone, Debug)]
pub struct MergeCertificate {
    pub sources: Vec<usize>,
    pub sigma: Vec<f64>,
    pub hyperplane: Hyperplane,
}

/// Sup-norm pivots shared by two sup-normalized hyperplanes.
pub fn shared_pivots(a: &Hyperplane, b: &Hyperplane) -> Vec<usize> {
    (0..a.dim()).filter(|&l| (a.beta[l].abs() - 1.0).abs() <= 1e-12 && (b.beta[l].abs() - 1.0).abs() <= 1e-12).collect()
}

/// Convex combination `sigma a + (1 - sigma) b` in the gauge of `kind`, if
/// one exists that keeps the residual convex along the segment.
pub fn merge_pair(a: &Hyperplane, b: &Hyperplane, sigma: f64, kind: ResidualKind) -> Result<Option<Hyperplane>> {
    let (a, mut b) = match kind {
        ResidualKind::Vertical => (a.to_vertical()?, b.to_vertical()?),
        ResidualKind::L1 => (a.to_linf(), b.to_linf()),
        other => return Err(Error::UnsupportedResidual(other)),
    };
    if kind == ResidualKind::L1 {
        let sp = shared_pivots(&a, &b);
        let Some(&l) = sp.first() else { return Ok(None) };
        if a.beta[l].signum() != b.beta[l].signum() {
            b.beta.iter_mut().for_each(|v| *v = -*v);
            b.alpha = -b.alpha;
        }
    }
    let beta: Vec<f64> = a.beta.iter().zip(&b.beta).map(|(x, y)| sigma * x + (1.0 - sigma) * y).collect();
    let alpha = sigma * a.alpha + (1.0 - sigma) * b.alpha;
    Ok(Some(Hyperplane { beta, alpha, gauge: a.gauge }))
}

/// Merges columns sharing one member set into a single hyperplane whose
/// residuals are dominated by the `y`-weighted average. Pairs are reduced
/// left to right.
pub fn try_merge(cols: &[(usize, &Column)], y: &[f64], kind: ResidualKind) -> Result<Option<MergeCertificate>> {
    if cols.is_empty() || cols.len() != y.len() {
        return Err(Error::BadParam("merge needs one weight per column".into()));
    }
    let total: f64 = y.iter().sum();
    let mut h = cols[0].1.hyperplane.clone();
    let mut acc = y[0];
    for (k, (_, c)) in cols.iter().enumerate().skip(1) {
        let sigma = acc / (acc + y[k]);
        match merge_pair(&h, &c.hyperplane, sigma, kind)? {
            Some(m) => h = m,
            None => return Ok(None),
        }
        acc += y[k];
    }
    if cols.len() == 1 {
        h = match kind {
            ResidualKind::Vertical => h.to_vertical()?,
            _ => h.to_linf(),
        };
    }
    Ok(Some(MergeCertificate {
        sources: cols.iter().map(|c| c.0).collect(),
        sigma: y.iter().map(|v| v / total).collect(),
        hyperplane: h,
    }))
}

/// Largest excess of a merged residual over the convex combination.
pub fn merge_violation(inst: &Instance, cols: &[&Column], cert: &MergeCertificate, kind: ResidualKind) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    for (k, &i) in cols[0].members.iter().enumerate() {
        let avg: f64 = cols.iter().zip(&cert.sigma).map(|(c, s)| s * c.residuals[k]).sum();
        worst = worst.max(residual(inst.point(i), &cert.hyperplane, kind) - avg);
    }
    worst
}

#[derive(Clone, Debug, PartialEq)]
pub enum BranchDecision {
    RyanFoster(usize, usize),
    /// Pool ids of two same-set columns that could not be merged.
    ThreeWay(usize, usize),
}

/// Pair co-occurrence `sum_{S containing i and j} y_S` over the support.
pub fn co_occurrence(support: &[(usize, f64)], pool: &[Column], n: usize) -> Vec<Vec<f64>> {
    let mut f = vec![vec![0.0; n]; n];
    for &(id, y) in support {
        let m = &pool[id].members;
        for (a, &i) in m.iter().enumerate() {
            for &j in &m[a + 1..] {
                f[i][j] += y;
            }
        }
    }
    f
}

/// Ryan-Foster pair nearest one half; otherwise a three-way split on the
/// first same-set family in `unmerged`.
pub fn select_branch(
    support: &[(usize, f64)],
    pool: &[Column],
    n: usize,
    unmerged: Option<(usize, usize)>,
    eps: f64,
) -> Result<BranchDecision> {
    let f = co_occurrence(support, pool, n);
    let mut best: Option<(f64, usize, usize)> = None;
    for i in 0..n {
        for j in i + 1..n {
            let v = f[i][j];
            if v > eps && v < 1.0 - eps {
                let score = (v - 0.5).abs();
                if best.is_none_or(|b| score < b.0) {
                    best = Some((score, i, j));
                }
            }
        }
    }
    if let Some((_, i, j)) = best {
        return Ok(BranchDecision::RyanFoster(i, j));
    }
    match unmerged {
        Some((a, b)) => Ok(BranchDecision::ThreeWay(a, b)),
        None => Err(Error::NoFractionality),
    }
}

/// Pricer restriction and column filter data for a constraint list.
pub fn build_restriction(n: usize, constraints: &[BranchConstraint], pool: &[Column], p: usize) -> Result<(Restriction, Vec<usize>)> {
    let mut together = Vec::new();
    let mut apart = Vec::new();
    let mut fixed: Vec<usize> = Vec::new();
    let mut forbidden = Vec::new();
    for c in constraints {
        match c {
            BranchConstraint::Together(i, j) => together.push((*i, *j)),
            BranchConstraint::Apart(i, j) => apart.push((*i, *j)),
            BranchConstraint::FixColumn(id) => fixed.push(*id),
            BranchConstraint::ForbidColumn(m, h) => forbidden.push((m.clone(), h.clone())),
        }
    }
    if fixed.len() > p {
        return Err(Error::InfeasibleConstraints("more fixed columns than hyperplanes".into()));
    }
    let mut excluded = vec![false; n];
    for &id in &fixed {
        for &i in &pool[id].members {
            if excluded[i] {
                return Err(Error::InfeasibleConstraints(format!("fixed columns overlap at point {i}")));
            }
            excluded[i] = true;
        }
    }
    let free = Restriction::from_pairs(n, vec![false; n], &together, &apart, Vec::new())?;
    for &id in &fixed {
        let col = &pool[id];
        let mut check = free.clone();
        check.excluded = vec![false; n];
        if !check.admits_members(&col.members) {
            return Err(Error::InfeasibleConstraints(format!("fixed column {id} violates a pair constraint")));
        }
        if forbidden.iter().any(|(m, h): &(Vec<usize>, Hyperplane)| *m == col.members && h.approx_eq(&col.hyperplane, 1e-8)) {
            return Err(Error::InfeasibleConstraints(format!("fixed column {id} is forbidden")));
        }
    }
    let restr = Restriction::from_pairs(n, excluded, &together, &apart, forbidden)?;
    Ok((restr, fixed))
}

#[derive(Clone, Debug)]
pub struct BnpConfig {
    pub time_limit: Option<Duration>,
    pub node_limit: usize,
    pub cg_iter_limit: usize,
    pub pricing: PricingOptions,
    /// Columns enter when their reduced cost is below `-rc_tol`.
    pub rc_tol: f64,
    pub seed: u64,
}

impl Default for BnpConfig {
    fn default() -> Self {
        BnpConfig {
            time_limit: None,
            node_limit: 100_000,
            cg_iter_limit: 10_000,
            pricing: PricingOptions::default(),
            rc_tol: 1e-9,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy)]
struct Queued {
    bound: f64,
    id: usize,
}

impl PartialEq for Queued {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Queued {}
impl PartialOrd for Queued {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Queued {
    // Max-heap: smaller bound first, then smaller id.
    fn cmp(&self, o: &Self) -> Ordering {
        o.bound.total_cmp(&self.bound).then(o.id.cmp(&self.id))
    }
}

struct Incumbent {
    best: Option<Solution>,
}

impl Incumbent {
    fn value(&self) -> f64 {
        self.best.as_ref().map_or(f64::INFINITY, |s| s.objective)
    }

    /// Re-evaluates `hs` from geometry and keeps it if better.
    fn offer(&mut self, inst: &Instance, hs: Vec<Hyperplane>, w: &OrderedWeights, kind: ResidualKind) -> Result<bool> {
        let s = Solution::evaluate(inst, hs, w, kind)?;
        if s.objective < self.value() - 1e-12 {
            self.best = Some(s);
            return Ok(true);
        }
        Ok(false)
    }
}

/// Exact branch-and-price for `p` hyperplanes.
pub fn solve_bnp(inst: &Instance, p: usize, w: &OrderedWeights, kind: ResidualKind, cfg: &BnpConfig) -> Result<MipResult> {
    kind.require_solvable()?;
    if p == 0 {
        return Err(Error::BadParam("p must be positive".into()));
    }
    let start = Instant::now();
    let deadline = cfg.time_limit.map(|t| start + t);
    let n = inst.n();
    let w = w.resized(n)?;
    let p = p.min(n);
    let mut pool = initial_pool(inst, &w, kind)?;
    let mut inc = Incumbent { best: None };
    inc.offer(inst, vec![pool.last().unwrap().hyperplane.clone()], &w, kind)?;
    if n >= p * inst.d() {
        let h = interchange_heuristic(inst, p, &w, kind, cfg.seed)?;
        for (j, c) in h.clusters().into_iter().enumerate() {
            if !c.is_empty() {
                pool.push(Column::new(inst, c, h.hyperplanes[j].clone(), kind));
            }
        }
        inc.offer(inst, h.hyperplanes, &w, kind)?;
    }
    let big = 1e4 * (1.0 + inc.value());
    let mut master = Master::build(inst, pool, p, &w, kind, big)?;
    let exact_pricing = inst.d() == 2;
    let mut warnings = Vec::new();
    if !exact_pricing {
        warnings.push(format!("pricing is heuristic for d = {}; bounds are not certified", inst.d()));
    }

    let mut nodes: Vec<BnpNode> = vec![BnpNode {
        id: 0,
        parent: None,
        depth: 0,
        constraints: Vec::new(),
        bound: f64::NEG_INFINITY,
        status: NodeStatus::Open,
    }];
    let mut queue = BinaryHeap::new();
    queue.push(Queued { bound: f64::NEG_INFINITY, id: 0 });
    let mut cg_iters = 0;
    let mut processed = 0;
    let mut leaf_min = f64::INFINITY;
    let mut uncertified = false;
    let mut stop: Option<MipStatus> = None;

    while let Some(Queued { id, .. }) = queue.pop() {
        if deadline.is_some_and(|d| Instant::now() >= d) {
            stop = Some(MipStatus::TimeLimit);
            queue.push(Queued { bound: nodes[id].bound, id });
            break;
        }
        if processed >= cfg.node_limit {
            stop = Some(MipStatus::NodeLimit);
            queue.push(Queued { bound: nodes[id].bound, id });
            break;
        }
        if nodes[id].bound >= inc.value() - 1e-7 {
            nodes[id].status = NodeStatus::Fathomed;
            leaf_min = leaf_min.min(nodes[id].bound);
            continue;
        }
        processed += 1;
        let constraints = nodes[id].constraints.clone();
        let (restr, fixed) = match build_restriction(n, &constraints, master.pool(), p) {
            Ok(r) => r,
            Err(Error::InfeasibleConstraints(msg)) => {
                info!("node id={id} infeasible: {msg}");
                nodes[id].status = NodeStatus::Fathomed;
                continue;
            }
            Err(e) => return Err(e),
        };
        master.apply_filter(|_, c| restr.admits(c), &fixed);
        let opts = cfg.pricing.clone();
        let tol = cfg.rc_tol;
        let mut pricer = |_: &Master, duals: &crate::master::DualPrices| {
            price(inst, duals, kind, &restr, &opts, tol).map(|o| o.into_round())
        };
        let cg = cg_loop(&mut master, &mut pricer, tol, cfg.cg_iter_limit, deadline)?;
        cg_iters += cg.iterations;
        match cg.status {
            CgStatus::Infeasible => {
                nodes[id].status = NodeStatus::Fathomed;
                continue;
            }
            CgStatus::TimeLimit => {
                stop = Some(MipStatus::TimeLimit);
                queue.push(Queued { bound: nodes[id].bound, id });
                break;
            }
            CgStatus::IterLimit | CgStatus::Unproven => uncertified = true,
            CgStatus::Converged => {}
        }
        let parent_bound = nodes[id].bound;
        let mut bound = cg.lp_value;
        if bound < parent_bound - 1e-7 && cg.status == CgStatus::Converged {
            warn!("node id={id} bound {bound} below parent bound {parent_bound}");
        }
        if cg.status != CgStatus::Converged {
            bound = parent_bound;
        }
        bound = bound.max(parent_bound);
        nodes[id].bound = bound;
        if master.artificial_mass() > 1e-6 {
            info!("node id={id} infeasible (artificial mass {:.3e})", master.artificial_mass());
            nodes[id].status = NodeStatus::Fathomed;
            continue;
        }

        let support = master.support(1e-9);
        // Rounding: the p heaviest columns.
        let mut heavy = support.clone();
        heavy.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let hs: Vec<Hyperplane> = heavy.iter().take(p).map(|&(c, _)| master.column(c).hyperplane.clone()).collect();
        if !hs.is_empty() {
            let s = polish(inst, hs, &w, kind, 3)?;
            inc.offer(inst, s.hyperplanes, &w, kind)?;
        }

        // Same-set families and merges.
        let mut families: BTreeMap<Vec<usize>, Vec<(usize, f64)>> = BTreeMap::new();
        for &(c, y) in &support {
            families.entry(master.column(c).members.clone()).or_default().push((c, y));
        }
        let f = co_occurrence(&support, master.pool(), n);
        let pair_fractional =
            (0..n).any(|i| (i + 1..n).any(|j| f[i][j] > 1e-6 && f[i][j] < 1.0 - 1e-6));
        let mut unmerged = None;
        let mut merged_hs = Vec::new();
        if !pair_fractional {
            for fam in families.values() {
                let cols: Vec<(usize, &Column)> = fam.iter().map(|&(c, _)| (c, master.column(c))).collect();
                let ys: Vec<f64> = fam.iter().map(|&(_, y)| y).collect();
                match try_merge(&cols, &ys, kind)? {
                    Some(cert) => merged_hs.push(cert.hyperplane),
                    None => {
                        unmerged = Some((fam[0].0, fam[1].0));
                        break;
                    }
                }
            }
        }
        if !pair_fractional && unmerged.is_none() {
            inc.offer(inst, merged_hs, &w, kind)?;
            nodes[id].status = NodeStatus::Integral;
            leaf_min = leaf_min.min(bound.min(inc.value()));
            info!(
                "node id={id} depth={} bound={bound:.9} incumbent={:.9} branch=integral",
                nodes[id].depth,
                inc.value()
            );
            continue;
        }
        if bound >= inc.value() - 1e-7 {
            nodes[id].status = NodeStatus::Fathomed;
            leaf_min = leaf_min.min(bound);
            continue;
        }
        let decision = select_branch(&support, master.pool(), n, unmerged, 1e-6)?;
        let children: Vec<Vec<BranchConstraint>> = match &decision {
            BranchDecision::RyanFoster(i, j) => {
                vec![vec![BranchConstraint::Together(*i, *j)], vec![BranchConstraint::Apart(*i, *j)]]
            }
            BranchDecision::ThreeWay(a, b) => {
                let (ca, cb) = (master.column(*a), master.column(*b));
                vec![
                    vec![BranchConstraint::FixColumn(*a)],
                    vec![BranchConstraint::FixColumn(*b)],
                    vec![
                        BranchConstraint::ForbidColumn(ca.members.clone(), ca.hyperplane.clone()),
                        BranchConstraint::ForbidColumn(cb.members.clone(), cb.hyperplane.clone()),
                    ],
                ]
            }
        };
        info!(
            "node id={id} depth={} bound={bound:.9} incumbent={:.9} branch={decision:?}",
            nodes[id].depth,
            inc.value()
        );
        nodes[id].status = NodeStatus::Branched;
        for extra in children {
            let mut cons = constraints.clone();
            cons.extend(extra);
            let child = BnpNode {
                id: nodes.len(),
                parent: Some(id),
                depth: nodes[id].depth + 1,
                constraints: cons,
                bound,
                status: NodeStatus::Open,
            };
            queue.push(Queued { bound, id: child.id });
            nodes.push(child);
        }
    }

    let ub = inc.value();
    let open_min = queue.iter().map(|q| nodes[q.id].bound).fold(f64::INFINITY, f64::min);
    let lb = open_min.min(leaf_min).min(ub);
    let status = match stop {
        Some(s) => s,
        None if uncertified => MipStatus::NotProven,
        None => MipStatus::Optimal,
    };
    let lb = if exact_pricing { lb } else { 0.0 };
    let elapsed = start.elapsed().as_secs_f64();
    info!("bnp done status={status:?} obj={ub:.9} lb={lb:.9} nodes={processed} cols={}", master.pool().len());
    Ok(MipResult {
        status,
        gap: relative_gap(ub, lb),
        lower_bound: lb,
        solution: inc.best,
        nodes: processed,
        cg_iterations: cg_iters,
        columns: master.pool().len(),
        elapsed_secs: elapsed,
        warnings,
    })
}
