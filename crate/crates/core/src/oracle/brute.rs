//! Exhaustive optimum over all partitions into at most `p` clusters.
//!
//! Each partition is fitted jointly with one reference LP per choice of
//! normalization per cluster (vertical: one; sup-norm: a pivot coordinate
//! with coefficient one and the others in `[-1, 1]`), with the ordered median
//! written in its u/v form.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fit::fit_single_hyperplane;
use crate::geometry::{Hyperplane, Instance, ResidualKind};
use crate::lp::Sense;
use crate::objectives::OrderedWeights;
use crate::oracle::reference_lp::{RefLp, RefStatus};
use crate::arrangement::{self, Families};
use crate::geometry::{residual, Chart};

pub const MAX_N: usize = 10;

#[derive(Clone, Debug)]
pub struct BruteForce {
    pub objective: f64,
    pub hyperplanes: Vec<Hyperplane>,
    pub clusters: Vec<Vec<usize>>,
}

/// Restricted-growth strings of length `n` with at most `p` blocks.
pub fn partitions(n: usize, p: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut a = vec![0usize; n];
    fn rec(a: &mut Vec<usize>, i: usize, max: usize, p: usize, out: &mut Vec<Vec<usize>>) {
        if i == a.len() {
            out.push(a.clone());
            return;
        }
        for b in 0..=(max + 1).min(p - 1) {
            a[i] = b;
            rec(a, i + 1, max.max(b), p, out);
        }
    }
    if n == 0 || p == 0 {
        return out;
    }
    a[0] = 0;
    rec(&mut a, 1, 0, p, &mut out);
    out
}

fn blocks(rgs: &[usize]) -> Vec<Vec<usize>> {
    let k = rgs.iter().max().map_or(0, |m| m + 1);
    let mut out = vec![Vec::new(); k];
    for (i, &b) in rgs.iter().enumerate() {
        out[b].push(i);
    }
    out
}

/// Joint fit of one hyperplane per cluster; `pivots[j]` is `None` for the
/// vertical normalization.
fn joint_fit(inst: &Instance, clusters: &[Vec<usize>], pivots: &[Option<usize>], w: &OrderedWeights) -> Option<(f64, Vec<Hyperplane>)> {
    let n = inst.n();
    let d = inst.d();
    let mut lp = RefLp::new();
    let mut params: Vec<Vec<usize>> = Vec::new();
    for piv in pivots {
        let alpha = lp.add_var(0.0, f64::NEG_INFINITY, f64::INFINITY);
        let mut v = vec![alpha];
        for l in 0..d {
            match piv {
                None if l + 1 < d => v.push(lp.add_var(0.0, f64::NEG_INFINITY, f64::INFINITY)),
                Some(q) if l != *q => v.push(lp.add_var(0.0, -1.0, 1.0)),
                _ => {}
            }
        }
        params.push(v);
    }
    let e: Vec<usize> = (0..n).map(|_| lp.add_var(0.0, 0.0, f64::INFINITY)).collect();
    for (j, cl) in clusters.iter().enumerate() {
        for &i in cl {
            let x = inst.point(i);
            // signed residual = coefs . params + constant
            let mut coefs = vec![(params[j][0], 1.0)];
            let constant = match pivots[j] {
                None => {
                    for l in 0..d - 1 {
                        coefs.push((params[j][l + 1], x[l]));
                    }
                    -x[d - 1]
                }
                Some(q) => {
                    let mut k = 1;
                    for (l, &xl) in x.iter().enumerate() {
                        if l != q {
                            coefs.push((params[j][k], xl));
                            k += 1;
                        }
                    }
                    x[q]
                }
            };
            let mut up = vec![(e[i], 1.0)];
            up.extend(coefs.iter().map(|&(v, c)| (v, -c)));
            lp.add_row(&up, Sense::Ge, constant);
            let mut dn = vec![(e[i], 1.0)];
            dn.extend(coefs.iter().copied());
            lp.add_row(&dn, Sense::Ge, -constant);
        }
    }
    let lambda = w.lambda();
    let u: Vec<usize> = (0..n).map(|_| lp.add_var(1.0, f64::NEG_INFINITY, f64::INFINITY)).collect();
    let v: Vec<usize> = (0..n).map(|_| lp.add_var(1.0, f64::NEG_INFINITY, f64::INFINITY)).collect();
    for i in 0..n {
        for k in 0..n {
            lp.add_row(&[(u[k], 1.0), (v[i], 1.0), (e[i], -lambda[k])], Sense::Ge, 0.0);
        }
    }
    let sol = lp.solve();
    if sol.status != RefStatus::Optimal {
        return None;
    }
    let hs = pivots
        .iter()
        .zip(&params)
        .map(|(piv, ids)| {
            let theta: Vec<f64> = ids.iter().map(|&k| sol.x[k]).collect();
            match piv {
                None => Hyperplane::vertical(&theta[1..], theta[0]),
                Some(q) => Chart::L1 { pivot: *q }.hyperplane(&theta),
            }
        })
        .collect();
    Some((sol.objective, hs))
}

fn pivot_choices(kind: ResidualKind, d: usize, p: usize) -> Result<Vec<Vec<Option<usize>>>> {
    let per: Vec<Option<usize>> = match kind {
        ResidualKind::Vertical => vec![None],
        ResidualKind::L1 => (0..d).map(Some).collect(),
        other => return Err(Error::UnsupportedResidual(other)),
    };
    let mut out = vec![Vec::new()];
    for _ in 0..p {
        let mut next = Vec::new();
        for pre in &out {
            for &c in &per {
                let mut v: Vec<Option<usize>> = pre.clone();
                v.push(c);
                next.push(v);
            }
        }
        out = next;
    }
    Ok(out)
}

fn check_size(inst: &Instance, p: usize) -> Result<()> {
    if inst.n() > MAX_N {
        return Err(Error::SizeLimit(format!("n = {} exceeds {MAX_N}", inst.n())));
    }
    if p == 0 {
        return Err(Error::BadParam("p must be positive".into()));
    }
    Ok(())
}

/// Exact optimum by partition enumeration and joint LP fits.
pub fn brute_force_optimum(inst: &Instance, p: usize, w: &OrderedWeights, kind: ResidualKind) -> Result<BruteForce> {
    check_size(inst, p)?;
    kind.require_solvable()?;
    let n = inst.n();
    let w = w.resized(n)?;
    let parts = partitions(n, p.min(n));
    let best = parts
        .par_iter()
        .enumerate()
        .filter_map(|(idx, rgs)| {
            let cl = blocks(rgs);
            let choices = pivot_choices(kind, inst.d(), cl.len()).ok()?;
            let mut best: Option<(f64, Vec<Hyperplane>)> = None;
            for piv in choices {
                if let Some((v, hs)) = joint_fit(inst, &cl, &piv, &w) {
                    if best.as_ref().is_none_or(|b| v < b.0) {
                        best = Some((v, hs));
                    }
                }
            }
            best.map(|(v, hs)| (v, idx, hs, cl))
        })
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .ok_or_else(|| Error::DegenerateData("no partition could be fitted".into()))?;
    Ok(BruteForce { objective: best.0, hyperplanes: best.2, clusters: best.3 })
}

/// Sum-separable variant for the Weber objective: clusters are fitted
/// independently and their costs added.
pub fn brute_force_decomposed(inst: &Instance, p: usize, kind: ResidualKind) -> Result<f64> {
    check_size(inst, p)?;
    let n = inst.n();
    let parts = partitions(n, p.min(n));
    let mut best = f64::INFINITY;
    for rgs in parts {
        let mut total = 0.0;
        for cl in blocks(&rgs) {
            let w = OrderedWeights::preset(crate::objectives::Preset::Weber, cl.len())?;
            let mut b = f64::INFINITY;
            for piv in pivot_choices(kind, inst.d(), 1)? {
                let sub = Instance::new(inst.subset(&cl))?;
                let all: Vec<usize> = (0..cl.len()).collect();
                if let Some((v, _)) = joint_fit(&sub, &[all], &piv, &w) {
                    b = b.min(v);
                }
            }
            total += b;
        }
        best = best.min(total);
    }
    Ok(best)
}

/// Vertex-product variant: per cluster candidate hyperplanes from the
/// vertices of its own condition-line arrangement, global objective
/// evaluated on every combination. Exact for sum- or max-separable
/// objectives only.
pub fn brute_force_vertex_product(inst: &Instance, p: usize, w: &OrderedWeights, kind: ResidualKind) -> Result<f64> {
    check_size(inst, p)?;
    if inst.d() != 2 {
        return Err(Error::DimensionUnsupported(inst.d()));
    }
    let n = inst.n();
    let w = w.resized(n)?;
    let charts = Chart::all(kind, 2)?;
    let mut best = f64::INFINITY;
    for rgs in partitions(n, p.min(n)) {
        let cl = blocks(&rgs);
        let cands: Vec<Vec<Hyperplane>> = cl
            .iter()
            .map(|c| {
                let mut hs = Vec::new();
                for chart in &charts {
                    let lines = arrangement::condition_lines(chart, inst.points(), c, Families::all());
                    hs.extend(arrangement::vertices(chart, &lines).iter().map(|v| chart.hyperplane(v)));
                }
                hs
            })
            .collect();
        let mut pick = vec![0usize; cl.len()];
        let mut e = vec![0.0; n];
        'outer: loop {
            for (j, c) in cl.iter().enumerate() {
                for &i in c {
                    e[i] = residual(inst.point(i), &cands[j][pick[j]], kind);
                }
            }
            best = best.min(w.eval(&e));
            for j in 0..cl.len() {
                pick[j] += 1;
                if pick[j] < cands[j].len() {
                    continue 'outer;
                }
                pick[j] = 0;
            }
            break;
        }
    }
    Ok(best)
}

/// Best single hyperplane value by the exact fitter, for sanity checks.
pub fn single_fit_value(inst: &Instance, w: &OrderedWeights, kind: ResidualKind) -> Result<f64> {
    Ok(fit_single_hyperplane(inst.points(), w, kind)?.cost)
}
