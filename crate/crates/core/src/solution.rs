//! Solutions and solver results shared by both exact methods.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{residual, Hyperplane, Instance, ResidualKind};
use crate::objectives::{om_eval, OrderedWeights};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Solution {
    pub hyperplanes: Vec<Hyperplane>,
    /// Index into `hyperplanes` per point.
    pub assignment: Vec<usize>,
    pub residuals: Vec<f64>,
    pub objective: f64,
}

impl Solution {
    /// Assigns every point to its closest hyperplane (ties to the lowest
    /// index) and evaluates the ordered median of the residuals.
    pub fn evaluate(inst: &Instance, hyperplanes: Vec<Hyperplane>, w: &OrderedWeights, kind: ResidualKind) -> Result<Self> {
        if hyperplanes.is_empty() {
            return Err(Error::BadParam("solution needs at least one hyperplane".into()));
        }
        let mut assignment = Vec::with_capacity(inst.n());
        let mut residuals = Vec::with_capacity(inst.n());
        for x in inst.points() {
            let (mut best, mut arg) = (f64::INFINITY, 0);
            for (j, h) in hyperplanes.iter().enumerate() {
                let r = residual(x, h, kind);
                if r < best {
                    best = r;
                    arg = j;
                }
            }
            assignment.push(arg);
            residuals.push(best);
        }
        let objective = om_eval(&w.resized(inst.n())?, &residuals)?;
        Ok(Solution { hyperplanes, assignment, residuals, objective })
    }

    /// Point indices per hyperplane.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.hyperplanes.len()];
        for (i, &j) in self.assignment.iter().enumerate() {
            out[j].push(i);
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MipStatus {
    Optimal,
    TimeLimit,
    NodeLimit,
    /// Search finished but some bound came from heuristic pricing.
    NotProven,
    Infeasible,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MipResult {
    pub status: MipStatus,
    pub solution: Option<Solution>,
    pub lower_bound: f64,
    pub gap: f64,
    pub nodes: usize,
    pub cg_iterations: usize,
    pub columns: usize,
    pub elapsed_secs: f64,
    pub warnings: Vec<String>,
}

impl MipResult {
    pub fn objective(&self) -> Option<f64> {
        self.solution.as_ref().map(|s| s.objective)
    }
}

pub fn relative_gap(ub: f64, lb: f64) -> f64 {
    if !ub.is_finite() {
        return f64::INFINITY;
    }
    ((ub - lb) / ub.abs().max(1e-9)).max(0.0)
}
