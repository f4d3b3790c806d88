//! Linear programming substrate used by both solvers.
//!
//! Models are always minimizations. Constraints are stored column-major so
//! that the restricted master can grow by whole columns without touching
//! existing data. Solving is done by a bounded revised simplex with an
//! explicit dense basis inverse (see [`simplex`]); a previous [`Basis`] may be
//! passed back in to warm start after columns are added or bounds change.

mod format;
mod simplex;

use thiserror::Error;

pub use simplex::SolveOptions;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("index {index} out of range (have {len})")]
    BadIndex { index: usize, len: usize },
    #[error("non-finite coefficient in {what}")]
    NonFinite { what: String },
    #[error("numerical failure in simplex: {0}")]
    NumericalFailure(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RowId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterLimit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarStatus {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic free variable sitting at zero.
    Zero,
}

/// Simplex basis over structural variables followed by one logical per row.
#[derive(Clone, Debug, PartialEq)]
pub struct Basis {
    pub(crate) status: Vec<VarStatus>,
    pub(crate) num_vars: usize,
}

impl Basis {
    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn num_rows(&self) -> usize {
        self.status.len() - self.num_vars
    }

    pub fn var_status(&self, v: VarId) -> VarStatus {
        self.status[v.0]
    }
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub status: LpStatus,
    pub objective: f64,
    pub x: Vec<f64>,
    /// One dual per row; `>=` rows carry nonnegative duals, `<=` rows
    /// nonpositive ones, equality rows are sign-free.
    pub duals: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    pub basis: Option<Basis>,
    pub iterations: usize,
}

impl LpSolution {
    pub fn value(&self, v: VarId) -> f64 {
        self.x[v.0]
    }

    pub fn dual(&self, r: RowId) -> f64 {
        self.duals[r.0]
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

#[derive(Clone, Debug, Default)]
pub struct LpModel {
    pub(crate) obj: Vec<f64>,
    pub(crate) lower: Vec<f64>,
    pub(crate) upper: Vec<f64>,
    pub(crate) cols: Vec<Vec<(usize, f64)>>,
    pub(crate) col_names: Vec<String>,
    pub(crate) sense: Vec<Sense>,
    pub(crate) rhs: Vec<f64>,
    pub(crate) row_names: Vec<String>,
}

fn check_finite(v: f64, what: &str) -> Result<(), LpError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(LpError::NonFinite { what: what.to_string() })
    }
}

impl LpModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_vars(&self) -> usize {
        self.obj.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rhs.len()
    }

    /// Adds a variable with no constraint entries. Bounds may be infinite.
    pub fn add_var(&mut self, name: impl Into<String>, obj: f64, lower: f64, upper: f64) -> VarId {
        self.add_column(name, obj, lower, upper, &[])
            .expect("empty column cannot reference missing rows")
    }

    /// Adds a column touching existing rows.
    pub fn add_column(
        &mut self,
        name: impl Into<String>,
        obj: f64,
        lower: f64,
        upper: f64,
        entries: &[(RowId, f64)],
    ) -> Result<VarId, LpError> {
        check_finite(obj, "objective")?;
        if lower.is_nan() || upper.is_nan() {
            return Err(LpError::NonFinite { what: "bound".into() });
        }
        let mut col = Vec::with_capacity(entries.len());
        for &(r, v) in entries {
            if r.0 >= self.num_rows() {
                return Err(LpError::BadIndex { index: r.0, len: self.num_rows() });
            }
            check_finite(v, "column entry")?;
            if v != 0.0 {
                col.push((r.0, v));
            }
        }
        col.sort_by_key(|e| e.0);
        self.obj.push(obj);
        self.lower.push(lower);
        self.upper.push(upper);
        self.cols.push(col);
        self.col_names.push(name.into());
        Ok(VarId(self.obj.len() - 1))
    }

    pub fn add_row(
        &mut self,
        name: impl Into<String>,
        entries: &[(VarId, f64)],
        sense: Sense,
        rhs: f64,
    ) -> Result<RowId, LpError> {
        check_finite(rhs, "rhs")?;
        for &(v, c) in entries {
            if v.0 >= self.num_vars() {
                return Err(LpError::BadIndex { index: v.0, len: self.num_vars() });
            }
            check_finite(c, "row entry")?;
        }
        let r = self.rhs.len();
        self.rhs.push(rhs);
        self.sense.push(sense);
        self.row_names.push(name.into());
        for &(v, c) in entries {
            if c == 0.0 {
                continue;
            }
            let col = &mut self.cols[v.0];
            match col.last_mut() {
                Some(last) if last.0 == r => last.1 += c,
                _ => col.push((r, c)),
            }
        }
        Ok(RowId(r))
    }

    pub fn set_bounds(&mut self, v: VarId, lower: f64, upper: f64) {
        self.lower[v.0] = lower;
        self.upper[v.0] = upper;
    }

    pub fn bounds(&self, v: VarId) -> (f64, f64) {
        (self.lower[v.0], self.upper[v.0])
    }

    pub fn set_objective(&mut self, v: VarId, c: f64) {
        self.obj[v.0] = c;
    }

    pub fn objective_coef(&self, v: VarId) -> f64 {
        self.obj[v.0]
    }

    pub fn column(&self, v: VarId) -> &[(usize, f64)] {
        &self.cols[v.0]
    }

    pub fn var_name(&self, v: VarId) -> &str {
        &self.col_names[v.0]
    }

    pub fn row_sense(&self, r: RowId) -> Sense {
        self.sense[r.0]
    }

    pub fn rhs(&self, r: RowId) -> f64 {
        self.rhs[r.0]
    }

    /// Row activity `a_r^T x`.
    pub fn row_activity(&self, x: &[f64]) -> Vec<f64> {
        let mut act = vec![0.0; self.num_rows()];
        for (j, col) in self.cols.iter().enumerate() {
            for &(r, v) in col {
                act[r] += v * x[j];
            }
        }
        act
    }

    /// Largest bound or row violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for j in 0..self.num_vars() {
            worst = worst.max(self.lower[j] - x[j]).max(x[j] - self.upper[j]);
        }
        for (r, a) in self.row_activity(x).into_iter().enumerate() {
            let b = self.rhs[r];
            let v = match self.sense[r] {
                Sense::Le => a - b,
                Sense::Ge => b - a,
                Sense::Eq => (a - b).abs(),
            };
            worst = worst.max(v);
        }
        worst
    }

    /// Cold solve.
    pub fn solve(&self) -> Result<LpSolution, LpError> {
        simplex::solve(self, None, &SolveOptions::default())
    }

    /// Solve starting from a previous basis when possible. Columns added
    /// since `warm` was produced enter as nonbasic.
    pub fn solve_warm(&self, warm: Option<&Basis>) -> Result<LpSolution, LpError> {
        simplex::solve(self, warm, &SolveOptions::default())
    }

    pub fn solve_with(&self, warm: Option<&Basis>, opts: &SolveOptions) -> Result<LpSolution, LpError> {
        simplex::solve(self, warm, opts)
    }

    /// CPLEX-LP style text dump for external cross-checking.
    pub fn to_lp_string(&self) -> String {
        format::write_lp(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn min_x_subject_to_lower_row() {
        let mut m = LpModel::new();
        let x = m.add_var("x", 1.0, f64::NEG_INFINITY, f64::INFINITY);
        let r = m.add_row("c", &[(x, 1.0)], Sense::Ge, 3.0).unwrap();
        let s = m.solve().unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.value(x) - 3.0).abs() < 1e-9);
        assert!((s.dual(r) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn contradictory_rows_are_infeasible() {
        let mut m = LpModel::new();
        let x = m.add_var("x", -1.0, f64::NEG_INFINITY, f64::INFINITY);
        m.add_row("a", &[(x, 1.0)], Sense::Le, 0.0).unwrap();
        m.add_row("b", &[(x, 1.0)], Sense::Ge, 1.0).unwrap();
        assert_eq!(m.solve().unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded_direction_detected() {
        let mut m = LpModel::new();
        let x = m.add_var("x", -1.0, 0.0, f64::INFINITY);
        let y = m.add_var("y", 0.0, 0.0, f64::INFINITY);
        m.add_row("a", &[(x, 1.0), (y, -1.0)], Sense::Le, 1.0).unwrap();
        assert_eq!(m.solve().unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn bad_row_index_in_column() {
        let mut m = LpModel::new();
        let e = m.add_column("y", 0.0, 0.0, 1.0, &[(RowId(3), 1.0)]);
        assert_eq!(e, Err(LpError::BadIndex { index: 3, len: 0 }));
    }

    #[test]
    fn nan_coefficient_rejected() {
        let mut m = LpModel::new();
        let x = m.add_var("x", 0.0, 0.0, 1.0);
        assert!(m.add_row("r", &[(x, f64::NAN)], Sense::Le, 1.0).is_err());
    }

    #[test]
    fn equality_and_bounds() {
        // min x + 2y  s.t. x + y = 4, x <= 3, y >= 0
        let mut m = LpModel::new();
        let x = m.add_var("x", 1.0, 0.0, 3.0);
        let y = m.add_var("y", 2.0, 0.0, f64::INFINITY);
        let r = m.add_row("sum", &[(x, 1.0), (y, 1.0)], Sense::Eq, 4.0).unwrap();
        let s = m.solve().unwrap();
        assert!(s.is_optimal());
        assert!((s.objective - 5.0).abs() < 1e-9);
        assert!((s.value(x) - 3.0).abs() < 1e-9);
        assert!((s.dual(r) - 2.0).abs() < 1e-9);
    }
}
