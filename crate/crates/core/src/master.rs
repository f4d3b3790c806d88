//! Restricted master problem of the set-partitioning formulation.
//!
//! Variables: one `y_S` per pooled column plus the free ordered-median
//! variables `u_k`, `v_i`. Rows:
//!
//! * `u_k + v_i - lambda_k sum_{S containing i} e^i_S y_S >= 0` for all `i, k`;
//! * `sum_S y_S = p`;
//! * `sum_{S containing i} y_S = 1` for every point.
//!
//! With [`OmEncoding::Breakpoint`] the first block is replaced by one
//! k-centrum block `t_k + r_ki - sum e^i_S y_S >= 0` per breakpoint of the
//! weights, the all-points breakpoint going straight into column costs.
//! The largest-residual block (`k = 1`) uses the column's peak residual
//! `max_{j in S} e^j_S` in place of `e^i_S`. Integral solutions are priced
//! the same either way, but the relaxation is much tighter.
//!
//! Feasibility at every node is kept by high-cost artificials: one slack on
//! each partition row and a `+-` pair on the cardinality row.

use std::collections::HashMap;
use std::time::Instant;

use log::info;

use crate::error::{Error, Result};
use crate::geometry::{residual, Hyperplane, Instance, ResidualKind};
use crate::lp::{Basis, LpModel, LpSolution, LpStatus, RowId, Sense, VarId};
use crate::objectives::{add_uv_block, OrderedWeights, UvBlock};

#[derive(Clone, Debug, PartialEq)]
pub struct Column {
    /// Sorted point indices.
    pub members: Vec<usize>,
    pub hyperplane: Hyperplane,
    /// Residuals aligned with `members`.
    pub residuals: Vec<f64>,
}

impl Column {
    pub fn new(inst: &Instance, mut members: Vec<usize>, hyperplane: Hyperplane, kind: ResidualKind) -> Self {
        members.sort_unstable();
        members.dedup();
        let residuals = members.iter().map(|&i| residual(inst.point(i), &hyperplane, kind)).collect();
        Column { members, hyperplane, residuals }
    }

    pub fn contains(&self, i: usize) -> bool {
        self.members.binary_search(&i).is_ok()
    }

    pub fn residual_of(&self, i: usize) -> Option<f64> {
        self.members.binary_search(&i).ok().map(|k| self.residuals[k])
    }

    /// Largest member residual.
    pub fn peak(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }

    pub fn intersects(&self, other: &[usize]) -> bool {
        other.iter().any(|&i| self.contains(i))
    }

    /// Largest gap between stored and recomputed residuals.
    pub fn integrity_error(&self, inst: &Instance, kind: ResidualKind) -> f64 {
        self.members
            .iter()
            .zip(&self.residuals)
            .map(|(&i, &e)| (residual(inst.point(i), &self.hyperplane, kind) - e).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug)]
pub struct DualPrices {
    /// Dual of the cardinality row, sign flipped: reduced costs read
    /// `gamma - sum phi_i + sum cstar_i e_i + (sum peak_i) max e_i`.
    pub gamma: f64,
    pub phi: Vec<f64>,
    /// `delta[i][k]`, duals of the u/v rows; empty under the breakpoint
    /// encoding.
    pub delta: Vec<Vec<f64>>,
    pub cstar: Vec<f64>,
    /// Duals of the peak rows; empty when there are none.
    pub peak: Vec<f64>,
}

impl DualPrices {
    /// Largest deviation of row and column sums of `delta` from one.
    pub fn stochastic_defect(&self) -> f64 {
        let n = self.delta.len();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            worst = worst.max((self.delta[i].iter().sum::<f64>() - 1.0).abs());
        }
        for k in 0..n {
            worst = worst.max(((0..n).map(|i| self.delta[i][k]).sum::<f64>() - 1.0).abs());
        }
        worst
    }
}

/// `gamma + sum_{i in S} (cstar_i e^i_S - phi_i) + (sum_{i in S} peak_i) max_S e`.
pub fn reduced_cost(col: &Column, duals: &DualPrices) -> f64 {
    let mut rc = duals.gamma;
    let mut pi = 0.0;
    for (&i, &e) in col.members.iter().zip(&col.residuals) {
        rc += duals.cstar[i] * e - duals.phi[i];
        if !duals.peak.is_empty() {
            pi += duals.peak[i];
        }
    }
    rc + pi * col.peak()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum OmEncoding {
    Uv,
    #[default]
    Breakpoint,
}

enum OmRows {
    Uv(UvBlock),
    /// `(w_k, rows over points)` per breakpoint `1 < k < n`; `direct` is
    /// the weight of the all-points breakpoint, `peak` the `k = 1` block.
    Breakpoint { blocks: Vec<(f64, Vec<RowId>)>, peak: Option<(f64, Vec<RowId>)>, direct: f64 },
}

pub struct Master {
    pub kind: ResidualKind,
    pub weights: OrderedWeights,
    pub p: usize,
    n: usize,
    model: LpModel,
    om: OmRows,
    p_row: RowId,
    part_rows: Vec<RowId>,
    artificials: Vec<VarId>,
    pool: Vec<Column>,
    col_vars: Vec<VarId>,
    by_members: HashMap<Vec<usize>, Vec<usize>>,
    basis: Option<Basis>,
    last: Option<LpSolution>,
    pub big: f64,
}

impl Master {
    /// Builds the master over `pool` with the default encoding. `big` is
    /// the artificial cost.
    pub fn build(
        inst: &Instance,
        pool: Vec<Column>,
        p: usize,
        weights: &OrderedWeights,
        kind: ResidualKind,
        big: f64,
    ) -> Result<Self> {
        Self::build_with(inst, pool, p, weights, kind, big, OmEncoding::default())
    }

    pub fn build_with(
        inst: &Instance,
        pool: Vec<Column>,
        p: usize,
        weights: &OrderedWeights,
        kind: ResidualKind,
        big: f64,
        encoding: OmEncoding,
    ) -> Result<Self> {
        let n = inst.n();
        let weights = weights.resized(n)?;
        for i in 0..n {
            if !pool.iter().any(|c| c.contains(i)) {
                return Err(Error::UncoveredPoint(i));
            }
        }
        let p = p.min(n);
        let mut model = LpModel::new();
        let om = match encoding {
            OmEncoding::Uv => OmRows::Uv(add_uv_block(&mut model, &weights, None)?),
            OmEncoding::Breakpoint => {
                let mut blocks = Vec::new();
                let mut peak = None;
                let mut direct = 0.0;
                for (k, wk) in weights.breakpoints() {
                    if k == n {
                        direct += wk;
                        continue;
                    }
                    let t = model.add_var(format!("t{k}"), wk * k as f64, f64::NEG_INFINITY, f64::INFINITY);
                    let mut rows = Vec::with_capacity(n);
                    for i in 0..n {
                        let r = model.add_var(format!("r{k}_{i}"), wk, 0.0, f64::INFINITY);
                        rows.push(model.add_row(format!("kc{k}_{i}"), &[(t, 1.0), (r, 1.0)], Sense::Ge, 0.0)?);
                    }
                    if k == 1 {
                        peak = Some((wk, rows));
                    } else {
                        blocks.push((wk, rows));
                    }
                }
                OmRows::Breakpoint { blocks, peak, direct }
            }
        };
        let p_row = model.add_row("card", &[], Sense::Eq, p as f64)?;
        let part_rows: Vec<RowId> =
            (0..n).map(|i| model.add_row(format!("part{i}"), &[], Sense::Eq, 1.0)).collect::<std::result::Result<_, _>>()?;
        let mut artificials = Vec::with_capacity(n + 2);
        for (i, &r) in part_rows.iter().enumerate() {
            artificials.push(model.add_column(format!("art{i}"), big, 0.0, f64::INFINITY, &[(r, 1.0)])?);
        }
        artificials.push(model.add_column("art_card+", big, 0.0, f64::INFINITY, &[(p_row, 1.0)])?);
        artificials.push(model.add_column("art_card-", big, 0.0, f64::INFINITY, &[(p_row, -1.0)])?);
        let mut m = Master {
            kind,
            weights,
            p,
            n,
            model,
            om,
            p_row,
            part_rows,
            artificials,
            pool: Vec::new(),
            col_vars: Vec::new(),
            by_members: HashMap::new(),
            basis: None,
            last: None,
            big,
        };
        for c in pool {
            m.add_column(c)?;
        }
        Ok(m)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn pool(&self) -> &[Column] {
        &self.pool
    }

    pub fn column(&self, id: usize) -> &Column {
        &self.pool[id]
    }

    pub fn model(&self) -> &LpModel {
        &self.model
    }

    /// Adds a column unless an identical one (same members, residuals within
    /// 1e-8) is pooled. Returns the id of the new or existing column and
    /// whether it was new.
    pub fn add_column(&mut self, col: Column) -> Result<(usize, bool)> {
        if let Some(ids) = self.by_members.get(&col.members) {
            for &id in ids {
                let old = &self.pool[id];
                if old.residuals.iter().zip(&col.residuals).all(|(a, b)| (a - b).abs() <= 1e-8) {
                    return Ok((id, false));
                }
            }
        }
        let (cost, entries) = self.column_entries(&col);
        let id = self.pool.len();
        let var = self.model.add_column(format!("y{id}"), cost, 0.0, f64::INFINITY, &entries)?;
        self.col_vars.push(var);
        self.by_members.entry(col.members.clone()).or_default().push(id);
        self.pool.push(col);
        Ok((id, true))
    }

    /// Objective coefficient and row entries of a column.
    pub fn column_entries(&self, col: &Column) -> (f64, Vec<(RowId, f64)>) {
        let mut entries = Vec::with_capacity(col.members.len() * (self.n + 1) + 1);
        let mut cost = 0.0;
        entries.push((self.p_row, 1.0));
        let top = col.peak();
        for (&i, &e) in col.members.iter().zip(&col.residuals) {
            if let OmRows::Breakpoint { peak: Some((_, rows)), .. } = &self.om {
                if top > 0.0 {
                    entries.push((rows[i], -top));
                }
            }
            entries.push((self.part_rows[i], 1.0));
            if e == 0.0 {
                continue;
            }
            match &self.om {
                OmRows::Uv(uv) => {
                    for (k, &l) in self.weights.lambda().iter().enumerate() {
                        if l != 0.0 {
                            entries.push((uv.rows[i][k], -l * e));
                        }
                    }
                }
                OmRows::Breakpoint { blocks, direct, .. } => {
                    cost += direct * e;
                    for (_, rows) in blocks {
                        entries.push((rows[i], -e));
                    }
                }
            }
        }
        (cost, entries)
    }

    /// Reduced cost of `col` priced directly against the LP row duals.
    pub fn lp_reduced_cost(&self, col: &Column) -> Result<f64> {
        let s = self.last.as_ref().ok_or(Error::NotSolved)?;
        let (cost, entries) = self.column_entries(col);
        Ok(cost - entries.iter().map(|&(r, a)| s.dual(r) * a).sum::<f64>())
    }

    /// Activates the columns accepted by `active`, deactivating the rest
    /// (upper bound 0). Columns in `fixed` get lower bound 1.
    pub fn apply_filter(&mut self, active: impl Fn(usize, &Column) -> bool, fixed: &[usize]) {
        for (id, col) in self.pool.iter().enumerate() {
            let v = self.col_vars[id];
            if fixed.contains(&id) {
                self.model.set_bounds(v, 1.0, f64::INFINITY);
            } else if active(id, col) {
                self.model.set_bounds(v, 0.0, f64::INFINITY);
            } else {
                self.model.set_bounds(v, 0.0, 0.0);
            }
        }
    }

    pub fn is_active(&self, id: usize) -> bool {
        self.model.bounds(self.col_vars[id]).1 > 0.0
    }

    pub fn set_basis(&mut self, b: Option<Basis>) {
        self.basis = b;
    }

    pub fn basis(&self) -> Option<&Basis> {
        self.basis.as_ref()
    }

    pub fn solve(&mut self) -> Result<LpStatus> {
        let sol = self.model.solve_warm(self.basis.as_ref())?;
        let st = sol.status;
        if sol.is_optimal() {
            self.basis = sol.basis.clone();
            self.last = Some(sol);
        } else {
            self.last = None;
        }
        Ok(st)
    }

    pub fn solution(&self) -> Option<&LpSolution> {
        self.last.as_ref()
    }

    pub fn objective(&self) -> Result<f64> {
        self.last.as_ref().map(|s| s.objective).ok_or(Error::NotSolved)
    }

    /// `(column id, y)` for columns with `y > tol`.
    pub fn support(&self, tol: f64) -> Vec<(usize, f64)> {
        let Some(s) = &self.last else { return Vec::new() };
        self.col_vars.iter().enumerate().map(|(id, v)| (id, s.value(*v))).filter(|&(_, y)| y > tol).collect()
    }

    /// Total artificial activity in the last solution.
    pub fn artificial_mass(&self) -> f64 {
        let Some(s) = &self.last else { return f64::INFINITY };
        self.artificials.iter().map(|&v| s.value(v)).sum()
    }

    pub fn extract_duals(&self) -> Result<DualPrices> {
        let s = self.last.as_ref().ok_or(Error::NotSolved)?;
        let n = self.n;
        let lambda = self.weights.lambda();
        let mut peak_duals = Vec::new();
        let (delta, cstar) = match &self.om {
            OmRows::Uv(uv) => {
                let delta: Vec<Vec<f64>> =
                    (0..n).map(|i| (0..n).map(|k| s.dual(uv.rows[i][k]).max(0.0)).collect()).collect();
                let cstar = delta.iter().map(|row| row.iter().zip(lambda).map(|(d, l)| d * l).sum()).collect();
                (delta, cstar)
            }
            OmRows::Breakpoint { blocks, peak, direct } => {
                if let Some((wk, rows)) = peak {
                    peak_duals = rows.iter().map(|&r| s.dual(r).clamp(0.0, *wk)).collect();
                }
                let cstar = (0..n)
                    .map(|i| direct + blocks.iter().map(|(wk, rows)| s.dual(rows[i]).clamp(0.0, *wk)).sum::<f64>())
                    .collect();
                (Vec::new(), cstar)
            }
        };
        let phi = self.part_rows.iter().map(|&r| s.dual(r)).collect();
        Ok(DualPrices { gamma: -s.dual(self.p_row), phi, delta, cstar, peak: peak_duals })
    }

    pub fn reduced_cost_of(&self, id: usize, duals: &DualPrices) -> f64 {
        reduced_cost(&self.pool[id], duals)
    }
}

#[derive(Clone, Debug)]
pub enum PricingCertificate {
    ExactMinimum,
    HeuristicOnly,
}

/// What a pricer hands back to the loop.
#[derive(Clone, Debug)]
pub struct PricingRound {
    pub columns: Vec<Column>,
    /// Smallest reduced cost found over nonempty columns.
    pub best: f64,
    pub certificate: PricingCertificate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CgStatus {
    /// Pricer certified no column prices out.
    Converged,
    /// Pricer found nothing but could not certify it.
    Unproven,
    IterLimit,
    TimeLimit,
    Infeasible,
}

#[derive(Clone, Debug)]
pub struct CgResult {
    pub status: CgStatus,
    pub lp_value: f64,
    pub iterations: usize,
    pub columns_added: usize,
}

/// Column generation: solve, price, add, repeat.
pub fn cg_loop(
    master: &mut Master,
    pricer: &mut dyn FnMut(&Master, &DualPrices) -> Result<PricingRound>,
    tol: f64,
    iter_limit: usize,
    deadline: Option<Instant>,
) -> Result<CgResult> {
    let mut iterations = 0;
    let mut added = 0;
    let mut last_value = f64::INFINITY;
    loop {
        match master.solve()? {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => {
                return Ok(CgResult { status: CgStatus::Infeasible, lp_value: f64::INFINITY, iterations, columns_added: added })
            }
            other => {
                return Err(crate::lp::LpError::NumericalFailure(format!("master LP ended {other:?}")).into());
            }
        }
        let value = master.objective()?;
        debug_assert!(value <= last_value + 1e-6 * (1.0 + value.abs()));
        last_value = value;
        if iterations >= iter_limit {
            return Ok(CgResult { status: CgStatus::IterLimit, lp_value: value, iterations, columns_added: added });
        }
        if deadline.is_some_and(|d| Instant::now() >= d) {
            return Ok(CgResult { status: CgStatus::TimeLimit, lp_value: value, iterations, columns_added: added });
        }
        let duals = master.extract_duals()?;
        let round = pricer(master, &duals)?;
        iterations += 1;
        let mut new = 0;
        for c in round.columns {
            if reduced_cost(&c, &duals) < -tol && master.add_column(c)?.1 {
                new += 1;
            }
        }
        added += new;
        info!("cg iter={iterations} rmp={value:.9} added={new} min_rc={:.3e}", round.best);
        if new == 0 {
            let status = match round.certificate {
                PricingCertificate::ExactMinimum => CgStatus::Converged,
                PricingCertificate::HeuristicOnly => CgStatus::Unproven,
            };
            return Ok(CgResult { status, lp_value: value, iterations, columns_added: added });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::{om_eval, Preset};

    fn inst() -> Instance {
        Instance::new(vec![vec![0.0, 0.0], vec![1.0, 1.2], vec![2.0, 1.9], vec![3.0, 3.3]]).unwrap()
    }

    #[test]
    fn single_column_master_equals_om_of_its_residuals() {
        let inst = inst();
        let h = Hyperplane::vertical(&[1.0], 0.0);
        let col = Column::new(&inst, vec![0, 1, 2, 3], h, ResidualKind::Vertical);
        for enc in [OmEncoding::Uv, OmEncoding::Breakpoint] {
            for preset in [Preset::Weber, Preset::Center, Preset::KCentrum(2), Preset::Centdian(0.5)] {
                let w = OrderedWeights::preset(preset, 4).unwrap();
                let mut m = Master::build_with(&inst, vec![col.clone()], 1, &w, ResidualKind::Vertical, 1e4, enc).unwrap();
                assert_eq!(m.solve().unwrap(), LpStatus::Optimal);
                let expect = om_eval(&w, &col.residuals).unwrap();
                assert!((m.objective().unwrap() - expect).abs() < 1e-7);
                let d = m.extract_duals().unwrap();
                if enc == OmEncoding::Uv {
                    assert!(d.stochastic_defect() < 1e-6);
                }
                assert!(reduced_cost(&col, &d).abs() < 1e-6);
                assert!(m.lp_reduced_cost(&col).unwrap().abs() < 1e-6);
            }
        }
    }

    #[test]
    fn two_disjoint_columns() {
        let inst = inst();
        let a = Column::new(&inst, vec![0, 1], Hyperplane::vertical(&[1.2], 0.0), ResidualKind::Vertical);
        let b = Column::new(&inst, vec![2, 3], Hyperplane::vertical(&[1.4], -0.9), ResidualKind::Vertical);
        let w = OrderedWeights::preset(Preset::Centdian(0.5), 4).unwrap();
        let mut m = Master::build(&inst, vec![a.clone(), b.clone()], 2, &w, ResidualKind::Vertical, 1e4).unwrap();
        m.solve().unwrap();
        let sup = m.support(1e-9);
        assert_eq!(sup.len(), 2);
        assert!(sup.iter().all(|&(_, y)| (y - 1.0).abs() < 1e-9));
        let mut e = a.residuals.clone();
        e.extend(&b.residuals);
        assert!((m.objective().unwrap() - w.eval(&e)).abs() < 1e-7);
    }

    #[test]
    fn weber_and_center_dual_identities() {
        let inst = inst();
        let cols = vec![
            Column::new(&inst, vec![0, 1, 2, 3], Hyperplane::vertical(&[1.0], 0.1), ResidualKind::Vertical),
            Column::new(&inst, vec![0, 1], Hyperplane::vertical(&[1.2], 0.0), ResidualKind::Vertical),
            Column::new(&inst, vec![2, 3], Hyperplane::vertical(&[1.4], -0.9), ResidualKind::Vertical),
        ];
        for enc in [OmEncoding::Uv, OmEncoding::Breakpoint] {
            let w = OrderedWeights::preset(Preset::Weber, 4).unwrap();
            let mut m = Master::build_with(&inst, cols.clone(), 2, &w, ResidualKind::Vertical, 1e4, enc).unwrap();
            m.solve().unwrap();
            let d = m.extract_duals().unwrap();
            assert!(d.cstar.iter().all(|c| (c - 1.0).abs() < 1e-7));
            let w = OrderedWeights::preset(Preset::Center, 4).unwrap();
            let mut m = Master::build_with(&inst, cols.clone(), 2, &w, ResidualKind::Vertical, 1e4, enc).unwrap();
            m.solve().unwrap();
            let d = m.extract_duals().unwrap();
            let mass = d.cstar.iter().chain(&d.peak).sum::<f64>();
            assert!((mass - 1.0).abs() < 1e-7);
            assert_eq!(d.peak.is_empty(), enc == OmEncoding::Uv);
            for c in &cols {
                assert!((m.lp_reduced_cost(c).unwrap() - reduced_cost(c, &d)).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn reduced_cost_formula() {
        let inst = Instance::new(vec![vec![0.0, 0.2], vec![5.0, 5.0]]).unwrap();
        let col = Column::new(&inst, vec![0], Hyperplane::vertical(&[0.0], 0.0), ResidualKind::Vertical);
        let d = DualPrices { gamma: 1.0, phi: vec![0.5, 0.5], delta: vec![vec![0.0; 2]; 2], cstar: vec![1.0, 1.0], peak: Vec::new() };
        assert!((reduced_cost(&col, &d) - 0.7).abs() < 1e-12);
    }

    #[test]
    fn uncovered_point_is_named() {
        let inst = inst();
        let col = Column::new(&inst, vec![0, 1, 3], Hyperplane::vertical(&[1.0], 0.0), ResidualKind::Vertical);
        let w = OrderedWeights::preset(Preset::Weber, 4).unwrap();
        assert!(matches!(
            Master::build(&inst, vec![col], 1, &w, ResidualKind::Vertical, 1e4),
            Err(Error::UncoveredPoint(2))
        ));
    }

    #[test]
    fn duplicate_columns_are_dropped() {
        let inst = inst();
        let col = Column::new(&inst, vec![0, 1, 2, 3], Hyperplane::vertical(&[1.0], 0.0), ResidualKind::Vertical);
        let w = OrderedWeights::preset(Preset::Weber, 4).unwrap();
        let mut m = Master::build(&inst, vec![col.clone()], 1, &w, ResidualKind::Vertical, 1e4).unwrap();
        assert_eq!(m.add_column(col).unwrap(), (0, false));
        assert_eq!(m.pool().len(), 1);
    }
}
