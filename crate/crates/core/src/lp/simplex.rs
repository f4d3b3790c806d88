//! Bounded-variable revised simplex with an explicit dense basis inverse.
//!
//! Every row `a_r x {<=,=,>=} b_r` is turned into `a_r x + s_r = b_r` with a
//! logical `s_r` whose bounds encode the sense (`<=`: `s >= 0`, `>=`:
//! `s <= 0`, `=`: `s = 0`). Cold starts put structurals at a bound, logicals
//! in the basis, and patch rows that cannot be satisfied that way with
//! artificial columns; phase one drives the artificials to zero. Warm starts
//! reload a previous basis and continue with primal simplex when it is still
//! primal feasible, otherwise with dual simplex when it is dual feasible.
//!
//! Pricing is Dantzig's rule with a Harris two-pass ratio test; after
//! `10 m + 50` consecutive pivots without objective progress the primal
//! widens the bounds of the basic variables slightly, and falls back to
//! Bland's rule if it stalls again. Perturbed bounds are removed before
//! returning, with a dual/primal cleanup pass.

use super::{Basis, LpError, LpModel, LpSolution, LpStatus, Sense, VarStatus};
use crate::linalg;

#[derive(Clone, Debug)]
pub struct SolveOptions {
    pub max_iter: Option<usize>,
    pub primal_tol: f64,
    pub dual_tol: f64,
    pub refactor_every: usize,
    /// Use Bland's rule from the first pivot.
    pub bland: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { max_iter: None, primal_tol: 1e-9, dual_tol: 1e-9, refactor_every: 64, bland: false }
    }
}

const PIVOT_TOL: f64 = 1e-9;

struct Work<'a> {
    model: &'a LpModel,
    n: usize,
    m: usize,
    lo: Vec<f64>,
    hi: Vec<f64>,
    cost: Vec<f64>,
    /// Artificial columns `sign * e_row`, indexed from `n + m`.
    art: Vec<(usize, f64)>,
    status: Vec<VarStatus>,
    x: Vec<f64>,
    head: Vec<usize>,
    binv: Vec<f64>,
    since_refactor: usize,
    iters: usize,
    max_iter: usize,
    opts: SolveOptions,
    /// Original bounds while a perturbation is active.
    saved: Option<(Vec<f64>, Vec<f64>)>,
    may_perturb: bool,
}

enum Phase {
    Done(LpStatus),
}

impl<'a> Work<'a> {
    fn new(model: &'a LpModel, opts: &SolveOptions) -> Self {
        let n = model.num_vars();
        let m = model.num_rows();
        let mut lo = model.lower.clone();
        let mut hi = model.upper.clone();
        for r in 0..m {
            let (l, h) = match model.sense[r] {
                Sense::Le => (0.0, f64::INFINITY),
                Sense::Ge => (f64::NEG_INFINITY, 0.0),
                Sense::Eq => (0.0, 0.0),
            };
            lo.push(l);
            hi.push(h);
        }
        let max_iter = opts.max_iter.unwrap_or_else(|| (50 * (m + n)).max(20_000));
        Work {
            model,
            n,
            m,
            lo,
            hi,
            cost: vec![0.0; n + m],
            art: Vec::new(),
            status: vec![VarStatus::AtLower; n + m],
            x: vec![0.0; n + m],
            head: Vec::new(),
            binv: Vec::new(),
            since_refactor: 0,
            iters: 0,
            max_iter,
            opts: opts.clone(),
            saved: None,
            may_perturb: true,
        }
    }

    fn total(&self) -> usize {
        self.n + self.m + self.art.len()
    }

    #[inline]
    fn for_col(&self, j: usize, mut f: impl FnMut(usize, f64)) {
        if j < self.n {
            for &(r, v) in &self.model.cols[j] {
                f(r, v);
            }
        } else if j < self.n + self.m {
            f(j - self.n, 1.0);
        } else {
            let (r, s) = self.art[j - self.n - self.m];
            f(r, s);
        }
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.status[j] {
            VarStatus::AtLower => self.lo[j],
            VarStatus::AtUpper => self.hi[j],
            VarStatus::Zero => 0.0,
            VarStatus::Basic => self.x[j],
        }
    }

    fn default_status(lo: f64, hi: f64) -> VarStatus {
        if lo.is_finite() {
            VarStatus::AtLower
        } else if hi.is_finite() {
            VarStatus::AtUpper
        } else {
            VarStatus::Zero
        }
    }

    fn refactor(&mut self) -> bool {
        let m = self.m;
        let mut b = vec![0.0; m * m];
        for (i, &j) in self.head.iter().enumerate() {
            self.for_col(j, |r, v| b[r * m + i] = v);
        }
        match linalg::invert(&b, m, 1e-11) {
            Some(inv) => {
                self.binv = inv;
                self.since_refactor = 0;
                self.compute_xb();
                true
            }
            None => false,
        }
    }

    fn compute_xb(&mut self) {
        let m = self.m;
        let mut rhs = self.model.rhs.clone();
        for j in 0..self.total() {
            if self.status[j] == VarStatus::Basic {
                continue;
            }
            let v = self.nonbasic_value(j);
            self.x[j] = v;
            if v != 0.0 {
                self.for_col(j, |r, a| rhs[r] -= a * v);
            }
        }
        for i in 0..m {
            let row = &self.binv[i * m..(i + 1) * m];
            let v: f64 = row.iter().zip(&rhs).map(|(a, b)| a * b).sum();
            let j = self.head[i];
            self.x[j] = v;
        }
    }

    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        let mut out = vec![0.0; m];
        self.for_col(j, |r, v| {
            for (i, o) in out.iter_mut().enumerate() {
                *o += self.binv[i * m + r] * v;
            }
        });
        out
    }

    fn duals(&self) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for (i, &j) in self.head.iter().enumerate() {
            let c = self.cost[j];
            if c == 0.0 {
                continue;
            }
            let row = &self.binv[i * m..(i + 1) * m];
            for (yr, b) in y.iter_mut().zip(row) {
                *yr += c * b;
            }
        }
        y
    }

    #[inline]
    fn reduced_cost(&self, y: &[f64], j: usize) -> f64 {
        let mut d = self.cost[j];
        self.for_col(j, |r, v| d -= y[r] * v);
        d
    }

    #[inline]
    fn row_dot(&self, rho: &[f64], j: usize) -> f64 {
        let mut s = 0.0;
        self.for_col(j, |r, v| s += rho[r] * v);
        s
    }

    fn pivot(&mut self, r: usize, q: usize, alpha: &[f64]) -> Result<(), LpError> {
        let m = self.m;
        let piv = alpha[r];
        {
            let row = &mut self.binv[r * m..(r + 1) * m];
            for v in row.iter_mut() {
                *v /= piv;
            }
        }
        let pivot_row: Vec<f64> = self.binv[r * m..(r + 1) * m].to_vec();
        for (i, &a) in alpha.iter().enumerate() {
            if i == r || a == 0.0 {
                continue;
            }
            let row = &mut self.binv[i * m..(i + 1) * m];
            for (v, p) in row.iter_mut().zip(&pivot_row) {
                *v -= a * p;
            }
        }
        self.head[r] = q;
        self.since_refactor += 1;
        if self.since_refactor >= self.opts.refactor_every && !self.refactor() {
            return Err(LpError::NumericalFailure("singular basis after update".into()));
        }
        Ok(())
    }

    fn primal_infeasibility(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for &j in &self.head {
            worst = worst.max(self.lo[j] - self.x[j]).max(self.x[j] - self.hi[j]);
        }
        worst
    }

    /// Widens the bounds of basic variables by small distinct amounts so
    /// that degenerate ratio tests turn into short proper steps.
    fn perturb(&mut self) {
        self.saved = Some((self.lo.clone(), self.hi.clone()));
        for &j in &self.head {
            if j >= self.n + self.m || self.lo[j] == self.hi[j] {
                continue;
            }
            let f = 1e-7 * (1.0 + (j as f64 * 0.618_033_988_7).fract());
            if self.lo[j].is_finite() {
                self.lo[j] -= f * (1.0 + self.lo[j].abs());
            }
            if self.hi[j].is_finite() {
                self.hi[j] += f * (1.0 + self.hi[j].abs());
            }
        }
    }

    /// Primal simplex; if a perturbation was needed, the true bounds are
    /// restored afterwards and the basis is cleaned up.
    fn primal(&mut self) -> Result<Phase, LpError> {
        let first = self.primal_inner()?;
        let Some((lo, hi)) = self.saved.take() else { return Ok(first) };
        self.lo = lo;
        self.hi = hi;
        for j in 0..self.total() {
            if self.status[j] != VarStatus::Basic {
                self.x[j] = self.nonbasic_value(j);
            }
        }
        if !self.refactor() {
            return Err(LpError::NumericalFailure("singular basis after perturbation".into()));
        }
        if !matches!(first, Phase::Done(LpStatus::Optimal)) {
            return Ok(first);
        }
        if self.primal_infeasibility() > self.opts.primal_tol {
            match self.dual()? {
                Phase::Done(LpStatus::Optimal) => {}
                other => return Ok(other),
            }
        }
        self.may_perturb = false;
        let out = self.primal_inner();
        self.may_perturb = true;
        out
    }

    fn primal_inner(&mut self) -> Result<Phase, LpError> {
        let tol = self.opts.dual_tol;
        let ptol = self.opts.primal_tol;
        let mut degenerate = 0usize;
        let mut bland = self.opts.bland;
        let stall_limit = 10 * self.m + 50;
        loop {
            if self.iters >= self.max_iter {
                return Ok(Phase::Done(LpStatus::IterLimit));
            }
            let y = self.duals();
            let mut enter: Option<(usize, f64)> = None;
            let mut best = 0.0;
            for j in 0..self.total() {
                let st = self.status[j];
                if st == VarStatus::Basic || self.lo[j] == self.hi[j] {
                    continue;
                }
                let d = self.reduced_cost(&y, j);
                let score = match st {
                    VarStatus::AtLower if d < -tol => -d,
                    VarStatus::AtUpper if d > tol => d,
                    VarStatus::Zero if d.abs() > tol => d.abs(),
                    _ => continue,
                };
                if bland {
                    enter = Some((j, d));
                    break;
                }
                if score > best {
                    best = score;
                    enter = Some((j, d));
                }
            }
            let Some((q, dq)) = enter else {
                return Ok(Phase::Done(LpStatus::Optimal));
            };
            let alpha = self.ftran(q);
            let s = if dq < 0.0 { 1.0 } else { -1.0 };

            // Harris pass one: largest step that keeps every basic within
            // its bounds relaxed by the feasibility tolerance.
            let mut theta_max = f64::INFINITY;
            for (i, &a) in alpha.iter().enumerate() {
                if a.abs() <= PIVOT_TOL {
                    continue;
                }
                let b = self.head[i];
                let delta = -s * a;
                let lim = if delta < 0.0 {
                    if self.lo[b].is_finite() {
                        (self.x[b] - self.lo[b] + ptol) / -delta
                    } else {
                        continue;
                    }
                } else if self.hi[b].is_finite() {
                    (self.hi[b] - self.x[b] + ptol) / delta
                } else {
                    continue;
                };
                if bland {
                    let exact = lim - ptol / delta.abs();
                    theta_max = theta_max.min(exact.max(0.0));
                } else {
                    theta_max = theta_max.min(lim);
                }
            }
            let flip = self.hi[q] - self.lo[q];
            let mut leave: Option<(usize, f64)> = None;
            if theta_max.is_finite() {
                let mut best_piv = 0.0;
                let mut best_var = usize::MAX;
                for (i, &a) in alpha.iter().enumerate() {
                    if a.abs() <= PIVOT_TOL {
                        continue;
                    }
                    let b = self.head[i];
                    let delta = -s * a;
                    let ratio = if delta < 0.0 {
                        if !self.lo[b].is_finite() {
                            continue;
                        }
                        (self.x[b] - self.lo[b]) / -delta
                    } else {
                        if !self.hi[b].is_finite() {
                            continue;
                        }
                        (self.hi[b] - self.x[b]) / delta
                    };
                    if bland {
                        if ratio <= theta_max + 1e-12 && b < best_var {
                            best_var = b;
                            leave = Some((i, ratio.max(0.0)));
                        }
                    } else if ratio <= theta_max && a.abs() > best_piv {
                        best_piv = a.abs();
                        leave = Some((i, ratio.max(0.0)));
                    }
                }
            }
            self.iters += 1;
            match leave {
                Some((_, theta)) if theta < flip => {
                    let (r, theta) = leave.unwrap();
                    self.step(q, s, theta, &alpha);
                    let p = self.head[r];
                    let delta = -s * alpha[r];
                    if delta < 0.0 {
                        self.x[p] = self.lo[p];
                        self.status[p] = VarStatus::AtLower;
                    } else {
                        self.x[p] = self.hi[p];
                        self.status[p] = if self.lo[p] == self.hi[p] { VarStatus::AtLower } else { VarStatus::AtUpper };
                    }
                    self.status[q] = VarStatus::Basic;
                    self.pivot(r, q, &alpha)?;
                    // Harris steps can be tiny but positive; judge progress
                    // by the objective change.
                    if theta * dq.abs() <= 1e-11 {
                        degenerate += 1;
                        if degenerate > stall_limit {
                            if self.may_perturb && self.saved.is_none() {
                                self.perturb();
                                degenerate = 0;
                            } else {
                                bland = true;
                            }
                        }
                    } else {
                        degenerate = 0;
                    }
                }
                _ if flip.is_finite() => {
                    self.step(q, s, flip, &alpha);
                    self.status[q] = if s > 0.0 { VarStatus::AtUpper } else { VarStatus::AtLower };
                    self.x[q] = if s > 0.0 { self.hi[q] } else { self.lo[q] };
                    degenerate = 0;
                }
                _ => return Ok(Phase::Done(LpStatus::Unbounded)),
            }
        }
    }

    fn step(&mut self, q: usize, s: f64, theta: f64, alpha: &[f64]) {
        if theta == 0.0 {
            return;
        }
        self.x[q] += s * theta;
        for (i, &a) in alpha.iter().enumerate() {
            if a != 0.0 {
                let b = self.head[i];
                self.x[b] -= s * a * theta;
            }
        }
    }

    fn dual(&mut self) -> Result<Phase, LpError> {
        let ptol = self.opts.primal_tol;
        let dtol = self.opts.dual_tol;
        let m = self.m;
        loop {
            if self.iters >= self.max_iter {
                return Ok(Phase::Done(LpStatus::IterLimit));
            }
            let mut leave: Option<(usize, f64)> = None;
            let mut worst = ptol;
            for (i, &b) in self.head.iter().enumerate() {
                let below = self.lo[b] - self.x[b];
                let above = self.x[b] - self.hi[b];
                if below > worst {
                    worst = below;
                    leave = Some((i, self.x[b] - self.lo[b]));
                }
                if above > worst {
                    worst = above;
                    leave = Some((i, self.x[b] - self.hi[b]));
                }
            }
            let Some((r, delta)) = leave else {
                return Ok(Phase::Done(LpStatus::Optimal));
            };
            let y = self.duals();
            let rho: Vec<f64> = self.binv[r * m..(r + 1) * m].to_vec();
            let mut cands: Vec<(usize, f64, f64)> = Vec::new();
            let mut bound = f64::INFINITY;
            for j in 0..self.total() {
                let st = self.status[j];
                if st == VarStatus::Basic || self.lo[j] == self.hi[j] {
                    continue;
                }
                let a = self.row_dot(&rho, j);
                if a.abs() <= PIVOT_TOL {
                    continue;
                }
                let ok = match st {
                    VarStatus::AtLower => (delta < 0.0 && a < 0.0) || (delta > 0.0 && a > 0.0),
                    VarStatus::AtUpper => (delta < 0.0 && a > 0.0) || (delta > 0.0 && a < 0.0),
                    VarStatus::Zero => true,
                    VarStatus::Basic => false,
                };
                if !ok {
                    continue;
                }
                let d = self.reduced_cost(&y, j);
                let dd = match st {
                    VarStatus::AtLower => d.max(0.0),
                    VarStatus::AtUpper => (-d).max(0.0),
                    _ => d.abs(),
                };
                bound = bound.min((dd + dtol) / a.abs());
                cands.push((j, a, dd / a.abs()));
            }
            if cands.is_empty() {
                return Ok(Phase::Done(LpStatus::Infeasible));
            }
            let mut q = usize::MAX;
            let mut best_piv = 0.0;
            for &(j, a, ratio) in &cands {
                if ratio <= bound && a.abs() > best_piv {
                    best_piv = a.abs();
                    q = j;
                }
            }
            let alpha = self.ftran(q);
            let arq = alpha[r];
            if arq.abs() <= PIVOT_TOL {
                if !self.refactor() {
                    return Err(LpError::NumericalFailure("singular basis in dual simplex".into()));
                }
                self.iters += 1;
                continue;
            }
            self.iters += 1;
            let theta = delta / arq;
            self.x[q] += theta;
            for (i, &a) in alpha.iter().enumerate() {
                if a != 0.0 {
                    let b = self.head[i];
                    self.x[b] -= theta * a;
                }
            }
            let p = self.head[r];
            if delta < 0.0 {
                self.x[p] = self.lo[p];
                self.status[p] = VarStatus::AtLower;
            } else {
                self.x[p] = self.hi[p];
                self.status[p] = if self.lo[p] == self.hi[p] { VarStatus::AtLower } else { VarStatus::AtUpper };
            }
            self.status[q] = VarStatus::Basic;
            self.pivot(r, q, &alpha)?;
        }
    }

    fn load_basis(&mut self, b: &Basis) -> bool {
        if b.num_rows() != self.m || b.num_vars > self.n {
            return false;
        }
        let mut head = Vec::with_capacity(self.m);
        for j in 0..self.n + self.m {
            let st = if j < self.n {
                if j < b.num_vars {
                    b.status[j]
                } else {
                    Self::default_status(self.lo[j], self.hi[j])
                }
            } else {
                b.status[b.num_vars + (j - self.n)]
            };
            let st = match st {
                VarStatus::Basic => {
                    head.push(j);
                    VarStatus::Basic
                }
                VarStatus::AtLower if self.lo[j].is_finite() => VarStatus::AtLower,
                VarStatus::AtUpper if self.hi[j].is_finite() => VarStatus::AtUpper,
                VarStatus::Zero if !self.lo[j].is_finite() && !self.hi[j].is_finite() => VarStatus::Zero,
                _ => Self::default_status(self.lo[j], self.hi[j]),
            };
            self.status[j] = st;
        }
        if head.len() != self.m {
            return false;
        }
        self.head = head;
        self.refactor()
    }

    /// Flips boxed nonbasics onto the bound their reduced cost prefers.
    /// Returns false if an unboxed nonbasic is dual infeasible.
    fn make_dual_feasible(&mut self) -> bool {
        let y = self.duals();
        let tol = self.opts.dual_tol;
        let mut ok = true;
        for j in 0..self.total() {
            let st = self.status[j];
            if st == VarStatus::Basic || self.lo[j] == self.hi[j] {
                continue;
            }
            let d = self.reduced_cost(&y, j);
            let boxed = self.lo[j].is_finite() && self.hi[j].is_finite();
            match st {
                VarStatus::AtLower if d < -tol => {
                    if boxed {
                        self.status[j] = VarStatus::AtUpper;
                    } else {
                        ok = false;
                    }
                }
                VarStatus::AtUpper if d > tol => {
                    if boxed {
                        self.status[j] = VarStatus::AtLower;
                    } else {
                        ok = false;
                    }
                }
                VarStatus::Zero if d.abs() > tol => ok = false,
                _ => {}
            }
        }
        self.compute_xb();
        ok
    }

    fn warm_run(&mut self) -> Result<Option<LpStatus>, LpError> {
        self.cost[..self.n].copy_from_slice(&self.model.obj);
        if self.primal_infeasibility() > self.opts.primal_tol {
            if !self.make_dual_feasible() {
                return Ok(None);
            }
            match self.dual()? {
                Phase::Done(LpStatus::Optimal) => {}
                Phase::Done(LpStatus::Infeasible) => return Ok(Some(LpStatus::Infeasible)),
                Phase::Done(_) => return Ok(None),
            }
        }
        match self.primal()? {
            Phase::Done(LpStatus::IterLimit) => Ok(None),
            Phase::Done(st) => Ok(Some(st)),
        }
    }

    fn cold_run(&mut self) -> Result<LpStatus, LpError> {
        let n = self.n;
        let m = self.m;
        for j in 0..n {
            self.status[j] = Self::default_status(self.lo[j], self.hi[j]);
            self.x[j] = self.nonbasic_value(j);
        }
        let mut res = self.model.rhs.clone();
        for j in 0..n {
            let v = self.x[j];
            if v != 0.0 {
                for &(r, a) in &self.model.cols[j] {
                    res[r] -= a * v;
                }
            }
        }
        self.head = vec![0; m];
        let mut diag = vec![1.0; m];
        for r in 0..m {
            let s = n + r;
            let (l, h) = (self.lo[s], self.hi[s]);
            if res[r] >= l && res[r] <= h {
                self.status[s] = VarStatus::Basic;
                self.x[s] = res[r];
                self.head[r] = s;
            } else {
                let clip = res[r].clamp(l, h);
                self.status[s] = if clip == l { VarStatus::AtLower } else { VarStatus::AtUpper };
                self.x[s] = clip;
                let sign = if res[r] > clip { 1.0 } else { -1.0 };
                let a = n + m + self.art.len();
                self.art.push((r, sign));
                self.lo.push(0.0);
                self.hi.push(f64::INFINITY);
                self.cost.push(1.0);
                self.status.push(VarStatus::Basic);
                self.x.push((res[r] - clip).abs());
                self.head[r] = a;
                diag[r] = sign;
            }
        }
        self.binv = vec![0.0; m * m];
        for r in 0..m {
            self.binv[r * m + r] = diag[r];
        }
        if !self.art.is_empty() {
            let scale = 1.0 + self.model.rhs.iter().fold(0.0f64, |a, b| a.max(b.abs()));
            match self.primal()? {
                Phase::Done(LpStatus::IterLimit) => return Ok(LpStatus::IterLimit),
                Phase::Done(_) => {}
            }
            let infeas: f64 = (n + m..self.total())
                .map(|j| if self.status[j] == VarStatus::Basic { self.x[j].max(0.0) } else { 0.0 })
                .sum();
            if infeas > 1e-8 * scale {
                return Ok(LpStatus::Infeasible);
            }
            self.drive_out_artificials();
            for k in 0..self.art.len() {
                let j = n + m + k;
                self.hi[j] = 0.0;
                self.cost[j] = 0.0;
                if self.status[j] != VarStatus::Basic {
                    self.status[j] = VarStatus::AtLower;
                    self.x[j] = 0.0;
                }
            }
            if !self.refactor() {
                return Err(LpError::NumericalFailure("singular basis after phase one".into()));
            }
        }
        for j in 0..n {
            self.cost[j] = self.model.obj[j];
        }
        match self.primal()? {
            Phase::Done(st) => Ok(st),
        }
    }

    fn drive_out_artificials(&mut self) {
        let m = self.m;
        let first_art = self.n + self.m;
        for r in 0..m {
            if self.head[r] < first_art {
                continue;
            }
            let rho: Vec<f64> = self.binv[r * m..(r + 1) * m].to_vec();
            let mut best = 1e-7;
            let mut q = None;
            for j in 0..first_art {
                if self.status[j] == VarStatus::Basic {
                    continue;
                }
                let a = self.row_dot(&rho, j).abs();
                if a > best {
                    best = a;
                    q = Some(j);
                }
            }
            if let Some(q) = q {
                let alpha = self.ftran(q);
                let p = self.head[r];
                self.status[p] = VarStatus::AtLower;
                self.x[p] = 0.0;
                self.status[q] = VarStatus::Basic;
                // Degenerate pivot: entering keeps its current value.
                if self.pivot(r, q, &alpha).is_err() {
                    return;
                }
            }
        }
    }

    fn finish(&mut self, status: LpStatus) -> LpSolution {
        let n = self.n;
        let m = self.m;
        let y = self.duals();
        let rc: Vec<f64> = (0..n).map(|j| self.reduced_cost(&y, j)).collect();
        let x: Vec<f64> = self.x[..n].to_vec();
        let objective = x.iter().zip(&self.model.obj).map(|(a, b)| a * b).sum();
        let mut st: Vec<VarStatus> = self.status[..n + m].to_vec();
        for (r, &j) in self.head.iter().enumerate() {
            if j >= n + m {
                let (row, _) = self.art[j - n - m];
                let _ = r;
                st[n + row] = VarStatus::Basic;
            }
        }
        let basis = Some(Basis { status: st, num_vars: n });
        LpSolution { status, objective, x, duals: y, reduced_costs: rc, basis, iterations: self.iters }
    }
}

fn failed(model: &LpModel, status: LpStatus, iters: usize) -> LpSolution {
    LpSolution {
        status,
        objective: f64::NAN,
        x: vec![0.0; model.num_vars()],
        duals: vec![0.0; model.num_rows()],
        reduced_costs: vec![0.0; model.num_vars()],
        basis: None,
        iterations: iters,
    }
}

pub(crate) fn solve(model: &LpModel, warm: Option<&Basis>, opts: &SolveOptions) -> Result<LpSolution, LpError> {
    if let Some(b) = warm {
        let mut w = Work::new(model, opts);
        if w.load_basis(b) {
            if let Ok(Some(st)) = w.warm_run() {
                match st {
                    LpStatus::Optimal => {
                        if w.refactor() && w.primal_infeasibility() <= 1e-7 {
                            return Ok(w.finish(st));
                        }
                    }
                    LpStatus::Infeasible | LpStatus::Unbounded => return Ok(failed(model, st, w.iters)),
                    LpStatus::IterLimit => {}
                }
            }
        }
    }
    let mut w = Work::new(model, opts);
    let st = match w.cold_run() {
        Ok(st) => st,
        Err(_) => {
            let strict = SolveOptions { bland: true, refactor_every: 16, ..opts.clone() };
            w = Work::new(model, &strict);
            w.cold_run()?
        }
    };
    match st {
        LpStatus::Optimal => {
            if !w.refactor() {
                return Err(LpError::NumericalFailure("singular final basis".into()));
            }
            Ok(w.finish(st))
        }
        other => Ok(failed(model, other, w.iters)),
    }
}
