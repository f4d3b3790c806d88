//! Dense two-phase tableau simplex with Bland's rule.
//!
//! Slow and simple on purpose: it shares no code with [`crate::lp`] and is
//! used to cross-check it, and to solve the small joint-fit LPs inside the
//! brute-force optimum.

use crate::lp::Sense;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RefStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug)]
pub struct RefRow {
    pub coefs: Vec<f64>,
    pub sense: Sense,
    pub rhs: f64,
}

#[derive(Clone, Debug, Default)]
pub struct RefLp {
    pub cost: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub rows: Vec<RefRow>,
}

#[derive(Clone, Debug)]
pub struct RefSolution {
    pub status: RefStatus,
    pub objective: f64,
    pub x: Vec<f64>,
}

const EPS: f64 = 1e-10;

impl RefLp {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, cost: f64, lower: f64, upper: f64) -> usize {
        self.cost.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        for r in &mut self.rows {
            r.coefs.push(0.0);
        }
        self.cost.len() - 1
    }

    pub fn add_row(&mut self, entries: &[(usize, f64)], sense: Sense, rhs: f64) {
        let mut coefs = vec![0.0; self.cost.len()];
        for &(j, v) in entries {
            coefs[j] += v;
        }
        self.rows.push(RefRow { coefs, sense, rhs });
    }

    pub fn solve(&self) -> RefSolution {
        solve(self)
    }
}

/// How an original variable maps onto nonnegative tableau columns.
enum Map {
    Shift { col: usize, lo: f64 },
    Mirror { col: usize, hi: f64 },
    Split { pos: usize, neg: usize },
}

fn solve(lp: &RefLp) -> RefSolution {
    let n = lp.cost.len();
    let mut maps = Vec::with_capacity(n);
    let mut ncols = 0;
    for j in 0..n {
        let (l, u) = (lp.lower[j], lp.upper[j]);
        if l.is_finite() {
            maps.push(Map::Shift { col: ncols, lo: l });
            ncols += 1;
        } else if u.is_finite() {
            maps.push(Map::Mirror { col: ncols, hi: u });
            ncols += 1;
        } else {
            maps.push(Map::Split { pos: ncols, neg: ncols + 1 });
            ncols += 2;
        }
    }
    // Rows over the transformed columns: (coefs, sense, rhs).
    let mut rows: Vec<(Vec<f64>, Sense, f64)> = Vec::new();
    let mut cost = vec![0.0; ncols];
    let mut offset = 0.0;
    for j in 0..n {
        match maps[j] {
            Map::Shift { col, lo } => {
                cost[col] += lp.cost[j];
                offset += lp.cost[j] * lo;
            }
            Map::Mirror { col, hi } => {
                cost[col] -= lp.cost[j];
                offset += lp.cost[j] * hi;
            }
            Map::Split { pos, neg } => {
                cost[pos] += lp.cost[j];
                cost[neg] -= lp.cost[j];
            }
        }
    }
    for r in &lp.rows {
        let mut a = vec![0.0; ncols];
        let mut b = r.rhs;
        for j in 0..n {
            let v = r.coefs[j];
            if v == 0.0 {
                continue;
            }
            match maps[j] {
                Map::Shift { col, lo } => {
                    a[col] += v;
                    b -= v * lo;
                }
                Map::Mirror { col, hi } => {
                    a[col] -= v;
                    b -= v * hi;
                }
                Map::Split { pos, neg } => {
                    a[pos] += v;
                    a[neg] -= v;
                }
            }
        }
        rows.push((a, r.sense, b));
    }
    for j in 0..n {
        if let Map::Shift { col, lo } = maps[j] {
            if lp.upper[j].is_finite() {
                let mut a = vec![0.0; ncols];
                a[col] = 1.0;
                rows.push((a, Sense::Le, lp.upper[j] - lo));
            }
        }
    }
    if rows.iter().any(|(_, _, b)| !b.is_finite()) {
        return RefSolution { status: RefStatus::Infeasible, objective: f64::NAN, x: vec![0.0; n] };
    }
    // Normalize to b >= 0.
    for (a, s, b) in rows.iter_mut() {
        if *b < 0.0 {
            for v in a.iter_mut() {
                *v = -*v;
            }
            *b = -*b;
            *s = match *s {
                Sense::Le => Sense::Ge,
                Sense::Ge => Sense::Le,
                Sense::Eq => Sense::Eq,
            };
        }
    }
    let m = rows.len();
    let nslack = rows.iter().filter(|r| r.1 != Sense::Eq).count();
    let nart = rows.iter().filter(|r| r.1 != Sense::Le).count();
    let width = ncols + nslack + nart;
    // Tableau rows: m constraint rows then the objective; last column = rhs.
    let mut t = vec![vec![0.0; width + 1]; m];
    let mut basis = vec![0usize; m];
    let mut sk = ncols;
    let mut ak = ncols + nslack;
    for (i, (a, s, b)) in rows.iter().enumerate() {
        t[i][..ncols].copy_from_slice(a);
        t[i][width] = *b;
        match s {
            Sense::Le => {
                t[i][sk] = 1.0;
                basis[i] = sk;
                sk += 1;
            }
            Sense::Ge => {
                t[i][sk] = -1.0;
                sk += 1;
                t[i][ak] = 1.0;
                basis[i] = ak;
                ak += 1;
            }
            Sense::Eq => {
                t[i][ak] = 1.0;
                basis[i] = ak;
                ak += 1;
            }
        }
    }
    let art_start = ncols + nslack;
    if nart > 0 {
        let mut c1 = vec![0.0; width];
        for c in c1.iter_mut().skip(art_start) {
            *c = 1.0;
        }
        if run(&mut t, &mut basis, &c1, width, width) == RefStatus::Unbounded {
            unreachable!("phase one is bounded below");
        }
        let infeas: f64 = (0..m).filter(|&i| basis[i] >= art_start).map(|i| t[i][width]).sum();
        let scale = 1.0 + rows.iter().fold(0.0f64, |acc, r| acc.max(r.2));
        if infeas > 1e-9 * scale {
            return RefSolution { status: RefStatus::Infeasible, objective: f64::NAN, x: vec![0.0; n] };
        }
        // Pivot remaining artificials out where possible.
        for i in 0..m {
            if basis[i] < art_start {
                continue;
            }
            if let Some(q) = (0..art_start).find(|&j| t[i][j].abs() > 1e-9) {
                pivot(&mut t, &mut basis, i, q, width);
            }
        }
    }
    let mut c2 = vec![0.0; width];
    c2[..ncols].copy_from_slice(&cost);
    // Artificials may not re-enter.
    let status = run(&mut t, &mut basis, &c2, width, art_start);
    if status == RefStatus::Unbounded {
        return RefSolution { status, objective: f64::NEG_INFINITY, x: vec![0.0; n] };
    }
    let mut z = vec![0.0; width];
    for i in 0..m {
        z[basis[i]] = t[i][width];
    }
    let x: Vec<f64> = maps
        .iter()
        .map(|mp| match *mp {
            Map::Shift { col, lo } => lo + z[col],
            Map::Mirror { col, hi } => hi - z[col],
            Map::Split { pos, neg } => z[pos] - z[neg],
        })
        .collect();
    let objective = offset + cost.iter().zip(&z).map(|(c, v)| c * v).sum::<f64>();
    RefSolution { status: RefStatus::Optimal, objective, x }
}

fn pivot(t: &mut [Vec<f64>], basis: &mut [usize], r: usize, q: usize, width: usize) {
    let p = t[r][q];
    for v in t[r].iter_mut() {
        *v /= p;
    }
    let prow = t[r].clone();
    for (i, row) in t.iter_mut().enumerate() {
        if i == r {
            continue;
        }
        let f = row[q];
        if f != 0.0 {
            for c in 0..=width {
                row[c] -= f * prow[c];
            }
        }
    }
    basis[r] = q;
}

/// Bland's rule on columns `0..allowed`.
fn run(t: &mut [Vec<f64>], basis: &mut [usize], c: &[f64], width: usize, allowed: usize) -> RefStatus {
    let m = t.len();
    loop {
        // Reduced costs d_j = c_j - c_B^T column_j.
        let mut enter = None;
        for j in 0..allowed {
            if basis.contains(&j) {
                continue;
            }
            let mut d = c[j];
            for i in 0..m {
                d -= c[basis[i]] * t[i][j];
            }
            if d < -EPS {
                enter = Some(j);
                break;
            }
        }
        let Some(q) = enter else {
            return RefStatus::Optimal;
        };
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..m {
            let a = t[i][q];
            if a > EPS {
                let ratio = t[i][width] / a;
                match leave {
                    None => leave = Some((i, ratio)),
                    Some((li, lr)) => {
                        if ratio < lr - 1e-12 || (ratio <= lr + 1e-12 && basis[i] < basis[li]) {
                            leave = Some((i, ratio));
                        }
                    }
                }
            }
        }
        let Some((r, _)) = leave else {
            return RefStatus::Unbounded;
        };
        pivot(t, basis, r, q, width);
    }
}
