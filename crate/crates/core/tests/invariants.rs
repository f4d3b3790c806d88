use hyperfit::branch::{solve_bnp, BnpConfig};
use hyperfit::compact::{solve_compact_auto, CompactConfig};
use hyperfit::fit::fit_single_hyperplane;
use hyperfit::geometry::{distance, residual, Hyperplane, Instance, ResidualKind};
use hyperfit::heuristics::{diagnostics, hyperplane_through, initial_pool, interchange_heuristic};
use hyperfit::lp::Sense;
use hyperfit::master::{DualPrices, Master};
use hyperfit::objectives::{OrderedWeights, Preset};
use hyperfit::oracle::reference_lp::{RefLp, RefStatus};
use hyperfit::oracle::{brute_force_decomposed, brute_force_optimum};
use hyperfit::pricing::{price_exact, PricingOptions, Restriction};
use hyperfit::solution::{MipStatus, Solution};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const KINDS: [ResidualKind; 2] = [ResidualKind::Vertical, ResidualKind::L1];

fn random_instance(seed: u64, n: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Instance::new((0..n).map(|_| vec![rng.gen_range(0.0..10.0), rng.gen_range(0.0..10.0)]).collect()).unwrap()
}

fn preset(i: usize) -> Preset {
    [Preset::Weber, Preset::Center, Preset::KCentrum(3), Preset::Centdian(0.9)][i % 4].clone()
}

/// Minimum of the pricing objective over all nonempty subsets at fixed
/// residuals.
fn best_subset(e: &[f64], d: &DualPrices) -> f64 {
    let n = e.len();
    let mut best = f64::INFINITY;
    for mask in 1u32..(1 << n) {
        let mut v = d.gamma;
        let (mut mass, mut top) = (0.0, 0.0f64);
        for i in (0..n).filter(|i| mask >> i & 1 == 1) {
            v += d.cstar[i] * e[i] - d.phi[i];
            mass += d.peak.get(i).copied().unwrap_or(0.0);
            top = top.max(e[i]);
        }
        best = best.min(v + mass * top);
    }
    best
}

fn master_duals(inst: &Instance, w: &OrderedWeights, kind: ResidualKind, seed: u64) -> (Master, DualPrices) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = inst.n();
    let mut pool = initial_pool(inst, w, kind).unwrap();
    for _ in 0..5 {
        let members: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.4)).collect();
        if !members.is_empty() {
            let h = Hyperplane::vertical(&[rng.gen_range(-2.0..2.0)], rng.gen_range(0.0..10.0));
            pool.push(hyperfit::master::Column::new(inst, members, h, kind));
        }
    }
    let cut = rng.gen_range(1..n);
    for part in [(0..cut).collect::<Vec<usize>>(), (cut..n).collect()] {
        let h = Hyperplane::vertical(&[rng.gen_range(-2.0..2.0)], rng.gen_range(0.0..10.0));
        pool.push(hyperfit::master::Column::new(inst, part, h, kind));
    }
    let mut m = Master::build(inst, pool, 2, w, kind, 1e4).unwrap();
    m.solve().unwrap();
    assert!(m.artificial_mass() <= 1e-9);
    let d = m.extract_duals().unwrap();
    (m, d)
}

fn l1_projection_lp(x: &[f64], h: &Hyperplane) -> f64 {
    let d = x.len();
    let mut lp = RefLp::new();
    let y: Vec<usize> = (0..d).map(|_| lp.add_var(0.0, f64::NEG_INFINITY, f64::INFINITY)).collect();
    let t: Vec<usize> = (0..d).map(|_| lp.add_var(1.0, 0.0, f64::INFINITY)).collect();
    for l in 0..d {
        lp.add_row(&[(t[l], 1.0), (y[l], 1.0)], Sense::Ge, x[l]);
        lp.add_row(&[(t[l], 1.0), (y[l], -1.0)], Sense::Ge, -x[l]);
    }
    let on: Vec<(usize, f64)> = y.iter().zip(&h.beta).map(|(&v, &b)| (v, b)).collect();
    lp.add_row(&on, Sense::Eq, -h.alpha);
    let s = lp.solve();
    assert_eq!(s.status, RefStatus::Optimal);
    s.objective
}

#[test]
fn norm_residual_is_sampled_minimum_distance() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..40 {
        let beta = vec![rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
        let h = Hyperplane::new(beta.clone(), rng.gen_range(-3.0..3.0)).unwrap();
        let x: [f64; 2] = [rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)];
        let nb = beta[0].hypot(beta[1]);
        let y0 = [-h.alpha * beta[0] / (nb * nb), -h.alpha * beta[1] / (nb * nb)];
        let u = [-beta[1] / nb, beta[0] / nb];
        let r = 5.0 + x[0].abs() + x[1].abs() + y0[0].abs() + y0[1].abs();
        for kind in [ResidualKind::L1, ResidualKind::L2, ResidualKind::LInf] {
            let res = residual(&x, &h, kind);
            let sampled = (0..10_000)
                .map(|k| {
                    let s = -r + 2.0 * r * k as f64 / 9999.0;
                    distance(&x, &[y0[0] + s * u[0], y0[1] + s * u[1]], kind)
                })
                .fold(f64::INFINITY, f64::min);
            assert!(sampled >= res - 1e-9 && sampled <= res + 1e-2, "{kind:?}: residual {res} sampled {sampled}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn l1_residual_equals_projection_lp(
        x in prop::collection::vec(-10.0..10.0f64, 3),
        beta in prop::collection::vec(-3.0..3.0f64, 3),
        alpha in -5.0..5.0f64,
    ) {
        prop_assume!(beta.iter().any(|b| b.abs() > 1e-3));
        let h = Hyperplane::new(beta, alpha).unwrap();
        let r = residual(&x, &h, ResidualKind::L1);
        let lp = l1_projection_lp(&x, &h);
        prop_assert!((r - lp).abs() <= 1e-7 * (1.0 + r), "{} vs {}", r, lp);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn brute_force_ignores_point_order_and_labels(seed in 0u64..10_000, k in 0usize..8) {
        let inst = random_instance(seed, 6);
        let kind = KINDS[k % 2];
        let w = OrderedWeights::preset(preset(k / 2), 6).unwrap();
        let a = brute_force_optimum(&inst, 2, &w, kind).unwrap();
        let mut pts = inst.points().to_vec();
        pts.reverse();
        pts.swap(1, 4);
        let b = brute_force_optimum(&Instance::new(pts).unwrap(), 2, &w, kind).unwrap();
        prop_assert!((a.objective - b.objective).abs() <= 1e-9);
        let mut hs = a.hyperplanes.clone();
        hs.reverse();
        let relabeled = Solution::evaluate(&inst, hs, &w, kind).unwrap();
        prop_assert!((relabeled.objective - a.objective).abs() <= 1e-9);
    }

    #[test]
    fn weber_oracle_decomposes(seed in 0u64..10_000, k in 0usize..2) {
        let inst = random_instance(seed, 7);
        let kind = KINDS[k];
        let w = OrderedWeights::preset(Preset::Weber, 7).unwrap();
        let joint = brute_force_optimum(&inst, 2, &w, kind).unwrap().objective;
        let split = brute_force_decomposed(&inst, 2, kind).unwrap();
        prop_assert!((joint - split).abs() <= 1e-9, "{} vs {}", joint, split);
    }

    #[test]
    fn bnp_bounds_are_sound(seed in 0u64..10_000, k in 0usize..8) {
        let inst = random_instance(seed, 6);
        let kind = KINDS[k % 2];
        let w = OrderedWeights::preset(preset(k / 2), 6).unwrap();
        let opt = brute_force_optimum(&inst, 2, &w, kind).unwrap().objective;
        let root = solve_bnp(&inst, 2, &w, kind, &BnpConfig { node_limit: 1, ..Default::default() }).unwrap();
        prop_assert!(root.lower_bound <= opt + 1e-7, "root bound {} above optimum {}", root.lower_bound, opt);
        let full = solve_bnp(&inst, 2, &w, kind, &BnpConfig::default()).unwrap();
        let obj = full.objective().unwrap();
        prop_assert!(full.lower_bound <= obj + 1e-7);
        prop_assert_eq!(full.status, MipStatus::Optimal);
        prop_assert!((full.lower_bound - obj).abs() <= 1e-6);
        let sol = full.solution.unwrap();
        let again = Solution::evaluate(&inst, sol.hyperplanes.clone(), &w, kind).unwrap();
        prop_assert!((again.objective - obj).abs() <= 1e-6);
    }

    #[test]
    fn compact_is_monotone_in_p_and_reevaluates(seed in 0u64..10_000, k in 0usize..8) {
        let inst = random_instance(seed, 7);
        let kind = KINDS[k % 2];
        let w = OrderedWeights::preset(preset(k / 2), 7).unwrap();
        let mut last = f64::INFINITY;
        for p in 1..=3 {
            let r = solve_compact_auto(&inst, p, &w, kind, None, &CompactConfig::default()).unwrap();
            prop_assert_eq!(r.status, MipStatus::Optimal);
            let sol = r.solution.unwrap();
            let again = Solution::evaluate(&inst, sol.hyperplanes.clone(), &w, kind).unwrap();
            prop_assert!((again.objective - sol.objective).abs() <= 1e-6);
            prop_assert!(sol.objective <= last + 1e-7, "p = {}: {} after {}", p, sol.objective, last);
            last = sol.objective;
        }
    }

    #[test]
    fn compact_weber_line_halves_the_points(seed in 0u64..10_000) {
        let inst = random_instance(seed, 9);
        let w = OrderedWeights::preset(Preset::Weber, 9).unwrap();
        let r = solve_compact_auto(&inst, 1, &w, ResidualKind::Vertical, None, &CompactConfig::default()).unwrap();
        let sol = r.solution.unwrap();
        let dg = diagnostics(&sol, &inst, &w, ResidualKind::Vertical);
        prop_assert!(dg.pseudo_halving.unwrap().pass);
    }

    #[test]
    fn priced_columns_are_sound_and_greedy_optimal(seed in 0u64..10_000, k in 0usize..8) {
        let inst = random_instance(seed, 8);
        let kind = KINDS[k % 2];
        let w = OrderedWeights::preset(preset(k / 2), 8).unwrap();
        let (m, d) = master_duals(&inst, &w, kind, seed);
        let out = price_exact(&inst, &d, kind, &Restriction::none(8), &PricingOptions::default()).unwrap();
        for pc in &out.columns {
            prop_assert!((pc.reduced_cost - hyperfit::master::reduced_cost(&pc.column, &d)).abs() <= 1e-8);
            let lp = m.lp_reduced_cost(&pc.column).unwrap();
            // Row duals reach the artificial cost and residuals can be large,
            // so the LP-side check is relative to the terms involved.
            let scale = 1.0 + lp.abs() + pc.column.residuals.iter().sum::<f64>();
            prop_assert!((pc.reduced_cost - lp).abs() <= 1e-10 * scale, "priced {} lp {} scale {}", pc.reduced_cost, lp, scale);
            prop_assert!(pc.column.integrity_error(&inst, kind) <= 1e-9);
        }
        if let Some(best) = out.best_column() {
            let e: Vec<f64> = inst.points().iter().map(|x| residual(x, &best.column.hyperplane, kind)).collect();
            let v = best_subset(&e, &d);
            prop_assert!((v - best.reduced_cost).abs() <= 1e-9 * (1.0 + v.abs()), "subset min {} vs priced {}", v, best.reduced_cost);
        }
    }

    #[test]
    fn single_fit_beats_incidence_lines(seed in 0u64..10_000, n in 3usize..=8, k in 0usize..2) {
        let inst = random_instance(seed, n);
        let kind = KINDS[k];
        let w = OrderedWeights::preset(Preset::Weber, n).unwrap();
        let fit = fit_single_hyperplane(inst.points(), &w, kind).unwrap();
        for a in 0..n {
            for b in a + 1..n {
                if let Some(h) = hyperplane_through(&[inst.point(a), inst.point(b)], kind) {
                    let c: f64 = inst.points().iter().map(|x| residual(x, &h, kind)).sum();
                    prop_assert!(fit.cost <= c + 1e-9);
                }
            }
        }
    }
}

#[test]
fn pricing_minimum_beats_random_hyperplanes() {
    let inst = random_instance(77, 5);
    let kind = ResidualKind::Vertical;
    let mut rng = ChaCha8Rng::seed_from_u64(78);
    for t in 0..4 {
        let w = OrderedWeights::preset(preset(t), 5).unwrap();
        let (_, d) = master_duals(&inst, &w, kind, t as u64);
        let out = price_exact(&inst, &d, kind, &Restriction::none(5), &PricingOptions::default()).unwrap();
        let mut e = vec![0.0; 5];
        for _ in 0..1_000_000 {
            let h = Hyperplane::vertical(&[rng.gen_range(-5.0..5.0)], rng.gen_range(-30.0..30.0));
            for (i, x) in inst.points().iter().enumerate() {
                e[i] = residual(x, &h, kind);
            }
            let v = best_subset(&e, &d);
            assert!(out.best <= v + 1e-9, "sampled hyperplane {h:?} reaches {v} below {}", out.best);
        }
    }
}

#[test]
fn pool_covers_every_point_twice_and_interchange_improves() {
    for seed in 0..5 {
        let inst = random_instance(seed, 9);
        for kind in KINDS {
            let w = OrderedWeights::preset(Preset::Centdian(0.5), 9).unwrap();
            let pool = initial_pool(&inst, &w, kind).unwrap();
            for i in 0..9 {
                assert!(pool.iter().filter(|c| c.contains(i)).count() >= 2);
            }
            let single = fit_single_hyperplane(inst.points(), &w, kind).unwrap();
            let two = interchange_heuristic(&inst, 2, &w, kind, seed).unwrap();
            assert!(two.objective <= single.cost + 1e-9);
        }
    }
}
