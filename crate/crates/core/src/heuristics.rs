//! Initial column pool, the 1-interchange heuristic and geometric
//! diagnostics of single-hyperplane optima.

use log::debug;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{fit_partition, fit_single_hyperplane};
use crate::geometry::{residual, Chart, Hyperplane, Instance, ResidualKind};
use crate::linalg;
use crate::master::Column;
use crate::objectives::{OrderedWeights, Preset};
use crate::solution::Solution;

/// A hyperplane of the requested kind through `d` points, if one exists in
/// that kind's charts.
pub fn hyperplane_through(points: &[&[f64]], kind: ResidualKind) -> Option<Hyperplane> {
    let d = points.first()?.len();
    if points.len() != d {
        return None;
    }
    for chart in Chart::all(kind, d).ok()? {
        let mut a = Vec::with_capacity(d * d);
        let mut b = Vec::with_capacity(d);
        for x in points {
            let (w, rhs) = chart.row(x);
            a.extend(w);
            b.push(rhs);
        }
        if let Some(theta) = linalg::solve(&a, &b, d) {
            let ok = theta.iter().all(|t| t.is_finite())
                && chart.slope_box().is_none_or(|s| theta[1..].iter().all(|t| t.abs() <= s + 1e-9));
            if ok {
                return Some(chart.hyperplane(&theta));
            }
        }
    }
    None
}

/// Hyperplane through `pair` completed with the lowest-index other points;
/// completion points that make the system singular are skipped.
fn pair_hyperplane(inst: &Instance, i: usize, j: usize, kind: ResidualKind) -> Option<Hyperplane> {
    let d = inst.d();
    let mut chosen = vec![i, j];
    let mut extra = (0..inst.n()).filter(|&k| k != i && k != j);
    while chosen.len() < d {
        let k = extra.next()?;
        chosen.push(k);
        let pts: Vec<&[f64]> = chosen.iter().map(|&c| inst.point(c)).collect();
        if chosen.len() == d && hyperplane_through(&pts, kind).is_none() {
            chosen.pop();
        }
    }
    let pts: Vec<&[f64]> = chosen.iter().map(|&c| inst.point(c)).collect();
    hyperplane_through(&pts, kind)
}

/// Root pool: one full-set column per point pair, plus the best single
/// hyperplane over all points.
pub fn initial_pool(inst: &Instance, w: &OrderedWeights, kind: ResidualKind) -> Result<Vec<Column>> {
    kind.require_solvable()?;
    let n = inst.n();
    let all: Vec<usize> = (0..n).collect();
    let mut pool = Vec::with_capacity(n * (n - 1) / 2 + 1);
    let mut skipped = 0;
    for i in 0..n {
        for j in i + 1..n {
            match pair_hyperplane(inst, i, j, kind) {
                Some(h) => pool.push(Column::new(inst, all.clone(), h, kind)),
                None => skipped += 1,
            }
        }
    }
    if skipped > 0 {
        debug!("initial_pool skipped {skipped} degenerate pairs");
    }
    let best = fit_single_hyperplane(inst.points(), w, kind)?;
    pool.push(Column::new(inst, all, best.hyperplane, kind));
    Ok(pool)
}

fn evaluate(inst: &Instance, hs: &[Hyperplane], w: &OrderedWeights, kind: ResidualKind) -> Result<Solution> {
    Solution::evaluate(inst, hs.to_vec(), w, kind)
}

/// Local search over hyperplanes defined by `d`-subsets of points.
pub fn interchange_heuristic(
    inst: &Instance,
    p: usize,
    w: &OrderedWeights,
    kind: ResidualKind,
    seed: u64,
) -> Result<Solution> {
    kind.require_solvable()?;
    let (n, d) = (inst.n(), inst.d());
    if p == 0 || n < p * d {
        return Err(Error::BadParam(format!("interchange needs n >= p*d ({n} < {p}*{d})")));
    }
    let w = w.resized(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut hs: Vec<Hyperplane> = Vec::with_capacity(p);
    for _attempt in 0..50 {
        order.shuffle(&mut rng);
        hs.clear();
        for chunk in order.chunks(d).take(p) {
            let pts: Vec<&[f64]> = chunk.iter().map(|&i| inst.point(i)).collect();
            match hyperplane_through(&pts, kind) {
                Some(h) => hs.push(h),
                None => break,
            }
        }
        if hs.len() == p {
            break;
        }
    }
    if hs.len() < p {
        // Fall back to copies of the best single hyperplane.
        let h = fit_single_hyperplane(inst.points(), &w, kind)?.hyperplane;
        hs = vec![h; p];
    }
    let mut cur = evaluate(inst, &hs, &w, kind)?;
    let idx: Vec<usize> = (0..n).collect();
    loop {
        let mut improved = false;
        let mut tried = 0;
        let clusters = cur.clusters();
        'slots: for j in 0..p {
            let mut subsets: Vec<Vec<usize>> = combinations(&clusters[j], d).take(200).collect();
            for _ in 0..4 {
                subsets.push(idx.choose_multiple(&mut rng, d).copied().collect());
            }
            for s in subsets {
                if tried >= 200 {
                    break 'slots;
                }
                tried += 1;
                let pts: Vec<&[f64]> = s.iter().map(|&i| inst.point(i)).collect();
                let Some(h) = hyperplane_through(&pts, kind) else { continue };
                let mut trial = cur.hyperplanes.clone();
                trial[j] = h;
                let cand = evaluate(inst, &trial, &w, kind)?;
                if cand.objective < cur.objective - 1e-12 {
                    cur = cand;
                    improved = true;
                    continue 'slots;
                }
            }
        }
        if !improved {
            break;
        }
    }
    Ok(cur)
}

/// `k`-subsets of `items` in lexicographic order.
pub fn combinations(items: &[usize], k: usize) -> impl Iterator<Item = Vec<usize>> + '_ {
    let n = items.len();
    let mut idx: Vec<usize> = (0..k).collect();
    let mut done = k > n;
    std::iter::from_fn(move || {
        if done {
            return None;
        }
        let out = idx.iter().map(|&i| items[i]).collect();
        let mut t = k;
        loop {
            if t == 0 {
                done = true;
                break;
            }
            t -= 1;
            if idx[t] != t + n - k {
                idx[t] += 1;
                for u in t + 1..k {
                    idx[u] = idx[u - 1] + 1;
                }
                break;
            }
        }
        Some(out)
    })
}

/// Alternates closest assignment and joint refitting from `hs`.
pub fn polish(inst: &Instance, hs: Vec<Hyperplane>, w: &OrderedWeights, kind: ResidualKind, rounds: usize) -> Result<Solution> {
    let mut cur = Solution::evaluate(inst, hs, w, kind)?;
    for _ in 0..rounds {
        let clusters: Vec<Vec<usize>> = cur.clusters().into_iter().filter(|c| !c.is_empty()).collect();
        let (hs, _) = fit_partition(inst.points(), &clusters, w, kind)?;
        let next = Solution::evaluate(inst, hs, w, kind)?;
        if next.objective < cur.objective - 1e-12 {
            cur = next;
        } else {
            break;
        }
    }
    Ok(cur)
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct HalvingCheck {
    pub above: usize,
    pub below: usize,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct CenterCheck {
    pub max_residual: f64,
    /// Points attaining the maximum residual.
    pub at_max: Vec<usize>,
    /// A pair at the maximum residual on the same side whose difference is
    /// parallel to the hyperplane.
    pub parallel_pair: Option<(usize, usize)>,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Diagnostics {
    pub applicable: bool,
    pub pseudo_halving: Option<HalvingCheck>,
    pub center: Option<CenterCheck>,
}

/// Checks for `p = 1` optima: side counts for median objectives, and a
/// blocking or parallel-edge witness for center objectives.
pub fn diagnostics(sol: &Solution, inst: &Instance, w: &OrderedWeights, kind: ResidualKind) -> Diagnostics {
    if sol.hyperplanes.len() != 1 {
        return Diagnostics { applicable: false, pseudo_halving: None, center: None };
    }
    let h = &sol.hyperplanes[0];
    let n = inst.n();
    let d = inst.d();
    let signed: Vec<f64> = inst.points().iter().map(|x| h.value(x)).collect();
    let scale = 1e-9 * (1.0 + inst.max_l1() * crate::geometry::sup_norm(&h.beta) + h.alpha.abs());
    let res: Vec<f64> = inst.points().iter().map(|x| residual(x, h, kind)).collect();
    let pseudo_halving = matches!(w.kind(), Preset::Weber).then(|| {
        let above = signed.iter().filter(|&&s| s > scale).count();
        let below = signed.iter().filter(|&&s| s < -scale).count();
        HalvingCheck { above, below, pass: 2 * above <= n && 2 * below <= n }
    });
    let center = matches!(w.kind(), Preset::Center).then(|| {
        let max = res.iter().cloned().fold(0.0, f64::max);
        let tol = 1e-7 * (1.0 + max);
        let at_max: Vec<usize> = (0..n).filter(|&i| res[i] >= max - tol).collect();
        let mut parallel_pair = None;
        'outer: for (a, &i) in at_max.iter().enumerate() {
            for &j in &at_max[a + 1..] {
                if (signed[i] - signed[j]).abs() <= scale.max(tol) && signed[i].signum() == signed[j].signum() {
                    parallel_pair = Some((i, j));
                    break 'outer;
                }
            }
        }
        let pass = at_max.len() > d || parallel_pair.is_some();
        CenterCheck { max_residual: max, at_max, parallel_pair, pass }
    });
    Diagnostics { applicable: true, pseudo_halving, center }
}
