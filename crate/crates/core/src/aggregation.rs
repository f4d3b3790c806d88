//! k-means aggregation and the resulting a-priori error bound.
//!
//! Each point is replaced by its cluster centroid; the aggregated instance
//! keeps one (possibly repeated) point per original point so that ordered
//! weights of length `n` apply to both. For every hyperplane set whose
//! residuals move by at most `T` when a point moves to its centroid,
//! `|OM(e') - OM(e)| <= 2 OM(T, ..., T) = 2 T sum(lambda)`.
//!
//! `T` is the largest residual change a single move can cause: the l1
//! distance for l1 residuals, and `|dx_d| + B sum_{l<d} |dx_l|` for vertical
//! residuals, where `B` bounds the slopes of every hyperplane involved.

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Hyperplane, Instance, Point, ResidualKind};
use crate::objectives::OrderedWeights;
use crate::solution::Solution;

pub const MAX_LLOYD_ITERATIONS: usize = 100;

#[derive(Clone, Debug)]
pub struct AggregationMap {
    pub original: Instance,
    pub centroids: Vec<Point>,
    /// Centroid index per original point.
    pub assignment: Vec<usize>,
    pub kind: ResidualKind,
    /// Slope bound used for vertical `T`.
    pub slope_bound: f64,
    pub t: f64,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Residual change bound for moving `a` to `b`.
pub fn move_bound(a: &[f64], b: &[f64], kind: ResidualKind, slope_bound: f64) -> f64 {
    let d = a.len();
    match kind {
        ResidualKind::Vertical => {
            (a[d - 1] - b[d - 1]).abs() + slope_bound * (0..d - 1).map(|l| (a[l] - b[l]).abs()).sum::<f64>()
        }
        _ => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
    }
}

impl AggregationMap {
    /// One point per original point, each at its centroid.
    pub fn aggregated_instance(&self) -> Result<Instance> {
        Instance::new(self.assignment.iter().map(|&c| self.centroids[c].clone()).collect())
    }

    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    /// `T` recomputed from the assignment under `slope_bound`.
    pub fn t_for(&self, slope_bound: f64) -> f64 {
        self.original
            .points()
            .iter()
            .zip(&self.assignment)
            .map(|(x, &c)| move_bound(x, &self.centroids[c], self.kind, slope_bound))
            .fold(0.0, f64::max)
    }

    /// Same map with a different slope bound.
    pub fn with_slope_bound(mut self, b: f64) -> Self {
        self.slope_bound = b;
        self.t = self.t_for(b);
        self
    }

    /// `2 OM(T, ..., T)`.
    pub fn bound(&self, w: &OrderedWeights) -> Result<f64> {
        Ok(2.0 * self.t * w.resized(self.original.n())?.sum())
    }
}

/// k-means++ seeding followed by Lloyd iterations (at most
/// [`MAX_LLOYD_ITERATIONS`]). `slope_bound` enters `T` for vertical
/// residuals only.
pub fn kmeans_aggregate(
    inst: &Instance,
    k: usize,
    seed: u64,
    iterations: usize,
    kind: ResidualKind,
    slope_bound: f64,
) -> Result<AggregationMap> {
    let n = inst.n();
    if k == 0 || k > n {
        return Err(Error::BadParam(format!("aggregation needs 1 <= k <= n, got k = {k}, n = {n}")));
    }
    let pts = inst.points();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids: Vec<Point> = vec![pts[rng.gen_range(0..n)].clone()];
    let mut d2: Vec<f64> = pts.iter().map(|x| sq_dist(x, &centroids[0])).collect();
    while centroids.len() < k {
        let next = match WeightedIndex::new(&d2) {
            Ok(dist) => dist.sample(&mut rng),
            // Every point already coincides with a centroid.
            Err(_) => rng.gen_range(0..n),
        };
        centroids.push(pts[next].clone());
        for (i, x) in pts.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(x, &pts[next]));
        }
    }
    let nearest = |cs: &[Point], x: &[f64]| {
        let mut best = (f64::INFINITY, 0);
        for (c, p) in cs.iter().enumerate() {
            let v = sq_dist(x, p);
            if v < best.0 {
                best = (v, c);
            }
        }
        best.1
    };
    let mut assignment: Vec<usize> = pts.iter().map(|x| nearest(&centroids, x)).collect();
    for _ in 0..iterations.min(MAX_LLOYD_ITERATIONS) {
        let d = inst.d();
        let mut sums = vec![vec![0.0; d]; k];
        let mut counts = vec![0usize; k];
        for (x, &c) in pts.iter().zip(&assignment) {
            counts[c] += 1;
            for l in 0..d {
                sums[c][l] += x[l];
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        let next: Vec<usize> = pts.iter().map(|x| nearest(&centroids, x)).collect();
        if next == assignment {
            break;
        }
        assignment = next;
    }
    // Drop centroids that lost all their points.
    let mut remap = vec![usize::MAX; k];
    let mut kept = Vec::new();
    for &c in &assignment {
        if remap[c] == usize::MAX {
            remap[c] = kept.len();
            kept.push(centroids[c].clone());
        }
    }
    let assignment: Vec<usize> = assignment.iter().map(|&c| remap[c]).collect();
    let map = AggregationMap { original: inst.clone(), centroids: kept, assignment, kind, slope_bound, t: 0.0 };
    Ok(map.with_slope_bound(slope_bound))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AggregationReport {
    pub k: usize,
    pub t: f64,
    /// Slope bound behind `t` (vertical residuals).
    pub slope_bound: f64,
    pub bound: f64,
    /// Optimum of the aggregated problem.
    pub aggregated_objective: f64,
    /// Aggregated optimum evaluated on the original points.
    pub evaluated_objective: f64,
    pub best_known: f64,
    pub realized_error: f64,
    pub percent: f64,
}

fn max_slope(hs: &[Hyperplane]) -> f64 {
    hs.iter()
        .filter_map(|h| h.slopes().ok())
        .flat_map(|(s, _)| s.into_iter().map(f64::abs))
        .fold(0.0, f64::max)
}

/// Solves the aggregated problem with `solve`, evaluates its hyperplanes on
/// the original points and compares with `original` (the best known
/// original solution). For vertical residuals the slope bound is raised to
/// cover both solutions, so `T` is valid for them.
pub fn bound_and_error(
    map: &AggregationMap,
    w: &OrderedWeights,
    original: &Solution,
    solve: impl FnOnce(&Instance) -> Result<Solution>,
) -> Result<AggregationReport> {
    let agg = map.aggregated_instance()?;
    let sol = solve(&agg)?;
    let evaluated = Solution::evaluate(&map.original, sol.hyperplanes.clone(), w, map.kind)?;
    let mut map = map.clone();
    if map.kind == ResidualKind::Vertical {
        let b = map.slope_bound.max(max_slope(&sol.hyperplanes)).max(max_slope(&original.hyperplanes));
        map = map.with_slope_bound(b);
    }
    let best = original.objective;
    let realized = evaluated.objective - best;
    Ok(AggregationReport {
        k: map.k(),
        t: map.t,
        slope_bound: map.slope_bound,
        bound: map.bound(w)?,
        aggregated_objective: sol.objective,
        evaluated_objective: evaluated.objective,
        best_known: best,
        realized_error: realized,
        percent: 100.0 * realized / best.abs().max(1e-12),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::Preset;
    use proptest::{prop_assert, proptest};

    fn inst(n: usize, seed: u64) -> Instance {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Instance::new((0..n).map(|_| vec![rng.gen_range(0.0..10.0), rng.gen_range(0.0..10.0)]).collect()).unwrap()
    }

    #[test]
    fn k_equal_n_is_identity() {
        let x = inst(12, 3);
        for kind in [ResidualKind::Vertical, ResidualKind::L1] {
            let m = kmeans_aggregate(&x, 12, 0, 100, kind, 5.0).unwrap();
            assert_eq!(m.t, 0.0);
            assert_eq!(m.aggregated_instance().unwrap().points(), x.points());
        }
    }

    #[test]
    fn k_one_maps_to_mean() {
        let x = inst(9, 4);
        let m = kmeans_aggregate(&x, 1, 0, 100, ResidualKind::L1, 1.0).unwrap();
        let mean: Vec<f64> = (0..2).map(|l| x.points().iter().map(|p| p[l]).sum::<f64>() / 9.0).collect();
        assert!(m.centroids[0].iter().zip(&mean).all(|(a, b)| (a - b).abs() < 1e-12));
        let far = x.points().iter().map(|p| move_bound(p, &mean, ResidualKind::L1, 1.0)).fold(0.0, f64::max);
        assert!((m.t - far).abs() < 1e-12);
    }

    #[test]
    fn t_matches_recomputation() {
        let x = inst(50, 7);
        let m = kmeans_aggregate(&x, 20, 0, 100, ResidualKind::Vertical, 3.0).unwrap();
        let agg = m.aggregated_instance().unwrap();
        let t = x
            .points()
            .iter()
            .zip(agg.points())
            .map(|(a, b)| (a[1] - b[1]).abs() + 3.0 * (a[0] - b[0]).abs())
            .fold(0.0, f64::max);
        assert!((m.t - t).abs() < 1e-12);
        assert!(m.k() <= 20);
    }

    #[test]
    fn identity_report_is_zero() {
        let x = inst(6, 1);
        let w = OrderedWeights::preset(Preset::Weber, 6).unwrap();
        let m = kmeans_aggregate(&x, 6, 0, 100, ResidualKind::L1, 1.0).unwrap();
        let hs = vec![Hyperplane::vertical(&[0.5], 1.0), Hyperplane::vertical(&[-0.2], 6.0)];
        let orig = Solution::evaluate(&x, hs.clone(), &w, ResidualKind::L1).unwrap();
        let r = bound_and_error(&m, &w, &orig, |a| Solution::evaluate(a, hs.clone(), &w, ResidualKind::L1)).unwrap();
        assert_eq!(r.bound, 0.0);
        assert_eq!(r.realized_error, 0.0);
    }

    proptest! {
        #[test]
        fn residual_moves_within_t(seed in 0u64..500, a in -3.0f64..3.0, b in -2.0f64..2.0, l1 in proptest::bool::ANY) {
            let kind = if l1 { ResidualKind::L1 } else { ResidualKind::Vertical };
            let x = inst(15, seed);
            let m = kmeans_aggregate(&x, 5, seed, 100, kind, 2.0).unwrap();
            let h = Hyperplane::vertical(&[b], a);
            let h = if l1 { h.to_linf() } else { h };
            let agg = m.aggregated_instance().unwrap();
            for (p, q) in x.points().iter().zip(agg.points()) {
                let r = crate::geometry::residual(p, &h, kind);
                let s = crate::geometry::residual(q, &h, kind);
                prop_assert!((r - s).abs() <= m.t + 1e-9);
            }
        }

        #[test]
        fn finer_nested_aggregation_never_raises_t(seed in 0u64..200) {
            let x = inst(10, seed);
            let coarse = kmeans_aggregate(&x, 3, seed, 100, ResidualKind::L1, 1.0).unwrap();
            // Splitting one cluster into singletons keeps the rest nested.
            let mut fine = coarse.clone();
            let target = fine.assignment[0];
            for i in 0..10 {
                if fine.assignment[i] == target {
                    fine.centroids.push(x.point(i).to_vec());
                    fine.assignment[i] = fine.centroids.len() - 1;
                }
            }
            let fine = fine.with_slope_bound(1.0);
            prop_assert!(fine.t <= coarse.t + 1e-12);
        }
    }
}
