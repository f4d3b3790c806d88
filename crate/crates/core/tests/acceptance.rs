//! Acceptance criteria. Runs without the libtest harness so every criterion
//! prints one PASS/FAIL line; the process fails if any criterion fails.

use std::time::{Duration, Instant};

use hyperfit::aggregation::{bound_and_error, kmeans_aggregate};
use hyperfit::branch::{merge_pair, solve_bnp, BnpConfig};
use hyperfit::compact::{default_coef_bound, solve_compact_auto, CompactConfig};
use hyperfit::geometry::{residual, Hyperplane, Instance, ResidualKind};
use hyperfit::heuristics::{diagnostics, initial_pool};
use hyperfit::io::quandt;
use hyperfit::master::{reduced_cost, Column, Master};
use hyperfit::objectives::{om_eval, om_lp_value, OrderedWeights, Preset};
use hyperfit::oracle::{brute_force_optimum, grid_pricing_oracle};
use hyperfit::pricing::{price_exact, PricingOptions, Restriction};
use hyperfit::solution::{MipStatus, Solution};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

const KINDS: [ResidualKind; 2] = [ResidualKind::Vertical, ResidualKind::L1];

fn presets() -> [Preset; 4] {
    [Preset::Weber, Preset::Center, Preset::KCentrum(3), Preset::Centdian(0.9)]
}

fn random_instance(rng: &mut ChaCha8Rng, n: usize) -> Instance {
    Instance::new((0..n).map(|_| vec![rng.gen_range(0.0..10.0), rng.gen_range(0.0..10.0)]).collect()).unwrap()
}

fn brute_solution(inst: &Instance, p: usize, w: &OrderedWeights, kind: ResidualKind) -> hyperfit::Result<Solution> {
    let bf = brute_force_optimum(inst, p, w, kind)?;
    Solution::evaluate(inst, bf.hyperplanes, &w.resized(inst.n())?, kind)
}

fn oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    let mut bad = Vec::new();
    for t in 0..30 {
        let n = [6, 7, 8][t % 3];
        let kind = KINDS[(t / 3) % 2];
        let preset = presets()[t % 4].clone();
        let inst = random_instance(&mut rng, n);
        let w = OrderedWeights::preset(preset.clone(), n).unwrap();
        let bf = brute_force_optimum(&inst, 2, &w, kind).map_err(|e| e.to_string())?.objective;
        let bp = solve_bnp(&inst, 2, &w, kind, &BnpConfig::default()).map_err(|e| e.to_string())?;
        let cp = solve_compact_auto(&inst, 2, &w, kind, None, &CompactConfig::default()).map_err(|e| e.to_string())?;
        let (Some(a), Some(b)) = (bp.objective(), cp.objective()) else {
            bad.push(format!("#{t}: missing solution"));
            continue;
        };
        let dev = (a - bf).abs().max((b - bf).abs());
        worst = worst.max(dev);
        if dev > 1e-6 || bp.status != MipStatus::Optimal || cp.status != MipStatus::Optimal {
            bad.push(format!("#{t} n={n} {kind:?} {preset:?}: brute {bf} bp {a} ({:?}) compact {b} ({:?})", bp.status, cp.status));
        }
    }
    if bad.is_empty() {
        Ok(format!("30 instances, max deviation {worst:.2e}"))
    } else {
        Err(bad.join("; "))
    }
}

fn vertical_through(p: (f64, f64), q: (f64, f64)) -> Hyperplane {
    let slope = (q.1 - p.1) / (q.0 - p.0);
    Hyperplane::vertical(&[slope], p.1 - slope * p.0)
}

fn quandt_figures() -> Outcome {
    let inst = quandt();
    let kind = ResidualKind::L1;
    let figures = [
        (Preset::Weber, (2.16266666666667, 16.9193333333333), (6.84514285714286, 14.1302857142857)),
        (Preset::Center, (2.16771428571429, 15.598), (5.43871428571429, 16.8482142857143)),
        (Preset::KCentrum(10), (2.28069230769231, 16.8025384615385), (6.36036094674556, 14.678201183432)),
        (Preset::Centdian(0.9), (1.94430769230769, 16.2235384615385), (6.48302797202797, 14.5136503496503)),
    ];
    let mut lines = Vec::new();
    let mut ok = true;
    for (preset, a, b) in figures {
        let w = OrderedWeights::preset(preset.clone(), inst.n()).unwrap();
        let hs = vec![vertical_through((1.0, a.0), (20.0, a.1)), vertical_through((1.0, b.0), (20.0, b.1))];
        let fig = Solution::evaluate(&inst, hs, &w, kind).map_err(|e| e.to_string())?.objective;
        let t = Instant::now();
        let cfg = BnpConfig { time_limit: Some(Duration::from_secs(300)), ..Default::default() };
        let r = solve_bnp(&inst, 2, &w, kind, &cfg).map_err(|e| e.to_string())?;
        let obj = r.objective().unwrap_or(f64::INFINITY);
        let pass = r.status == MipStatus::Optimal && obj <= fig + 1e-5;
        ok &= pass;
        lines.push(format!(
            "{preset:?}: {:?} {obj:.6} vs figure {fig:.6} ({:.1}s)",
            r.status,
            t.elapsed().as_secs_f64()
        ));
    }
    if ok {
        Ok(lines.join("; "))
    } else {
        Err(lines.join("; "))
    }
}

fn om_representation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let n = rng.gen_range(1..=8);
        let mut lambda: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..2.0)).collect();
        lambda.sort_by(|a, b| b.total_cmp(a));
        let w = OrderedWeights::new(lambda).unwrap();
        let e: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..10.0)).collect();
        let a = om_eval(&w, &e).map_err(|x| x.to_string())?;
        let b = om_lp_value(&w, &e).map_err(|x| x.to_string())?;
        worst = worst.max((a - b).abs());
    }
    if worst <= 1e-7 {
        Ok(format!("200 pairs, max deviation {worst:.2e}"))
    } else {
        Err(format!("max deviation {worst:.2e}"))
    }
}

fn merge_inequalities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut violations = [0usize; 2];
    let mut l1_trials = 0;
    for t in 0..1000 {
        let d = 2 + t % 2;
        let slopes = |rng: &mut ChaCha8Rng| (0..d - 1).map(|_| rng.gen_range(-5.0..5.0)).collect::<Vec<f64>>();
        let h1 = Hyperplane::vertical(&slopes(&mut rng), rng.gen_range(-5.0..5.0));
        let h2 = Hyperplane::vertical(&slopes(&mut rng), rng.gen_range(-5.0..5.0));
        let sigma = rng.gen_range(0.0..=1.0);
        let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let m = merge_pair(&h1, &h2, sigma, ResidualKind::Vertical).map_err(|e| e.to_string())?.ok_or("vertical merge refused")?;
        let k = ResidualKind::Vertical;
        if residual(&x, &m, k) > sigma * residual(&x, &h1, k) + (1.0 - sigma) * residual(&x, &h2, k) + 1e-9 {
            violations[0] += 1;
        }
    }
    while l1_trials < 1000 {
        let d = 2 + l1_trials % 2;
        let pivot = rng.gen_range(0..d);
        let mk = |rng: &mut ChaCha8Rng| {
            let mut beta: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            beta[pivot] = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            Hyperplane::new(beta, rng.gen_range(-5.0..5.0)).unwrap()
        };
        let h1 = mk(&mut rng);
        let h2 = mk(&mut rng);
        let sigma = rng.gen_range(0.0..=1.0);
        let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let k = ResidualKind::L1;
        let m = merge_pair(&h1, &h2, sigma, k).map_err(|e| e.to_string())?.ok_or("shared pivot merge refused")?;
        if residual(&x, &m, k) > sigma * residual(&x, &h1, k) + (1.0 - sigma) * residual(&x, &h2, k) + 1e-9 {
            violations[1] += 1;
        }
        l1_trials += 1;
    }
    if violations == [0, 0] {
        Ok("1000 vertical and 1000 l1 triples, 0 violations".into())
    } else {
        Err(format!("violations: vertical {}, l1 {}", violations[0], violations[1]))
    }
}

fn pricing_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let inst = random_instance(&mut rng, 6);
    let n = inst.n();
    let mut worst_grid: f64 = 0.0;
    let mut worst_rc: f64 = 0.0;
    let mut emitted = 0;
    let mut worst_case = String::new();
    for t in 0..50 {
        let kind = KINDS[t % 2];
        let preset = presets()[(t / 2) % 4].clone();
        let w = OrderedWeights::preset(preset, n).unwrap();
        let mut pool = initial_pool(&inst, &w, kind).map_err(|e| e.to_string())?;
        for _ in 0..rng.gen_range(2..8) {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut rng);
            idx.truncate(rng.gen_range(1..=4));
            let h = Hyperplane::vertical(&[rng.gen_range(-2.0..2.0)], rng.gen_range(0.0..10.0));
            pool.push(Column::new(&inst, idx, h, kind));
        }
        // A random two-cluster partition keeps the master feasible without
        // artificials, so the duals stay at data scale.
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut rng);
        let cut = rng.gen_range(1..n);
        for part in [&idx[..cut], &idx[cut..]] {
            let h = Hyperplane::vertical(&[rng.gen_range(-2.0..2.0)], rng.gen_range(0.0..10.0));
            pool.push(Column::new(&inst, part.to_vec(), h, kind));
        }
        let mut master = Master::build(&inst, pool, 2, &w, kind, 1e4).map_err(|e| e.to_string())?;
        master.solve().map_err(|e| e.to_string())?;
        let duals = master.extract_duals().map_err(|e| e.to_string())?;
        let out = price_exact(&inst, &duals, kind, &Restriction::none(n), &PricingOptions::default()).map_err(|e| e.to_string())?;
        let grid = grid_pricing_oracle(&inst, &duals, kind, 2001).map_err(|e| e.to_string())?;
        let dev = (out.best - grid.polished_value).abs();
        if dev > worst_grid {
            worst_grid = dev;
            worst_case = format!("trial {t} {kind:?} {:?}: exact {} grid {}", w.kind(), out.best, grid.polished_value);
        }
        for pc in &out.columns {
            let lp = master.lp_reduced_cost(&pc.column).map_err(|e| e.to_string())?;
            worst_rc = worst_rc.max((pc.reduced_cost - lp).abs()).max((pc.reduced_cost - reduced_cost(&pc.column, &duals)).abs());
            emitted += 1;
        }
    }
    let msg = format!("50 dual vectors, exact vs grid {worst_grid:.2e} ({worst_case}), reduced cost recomputation {worst_rc:.2e} over {emitted} columns");
    if worst_grid <= 1e-4 && worst_rc <= 1e-8 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn aggregation_bound() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut worst_ratio: f64 = 0.0;
    let mut bad = Vec::new();
    for t in 0..20 {
        let n = [8, 9, 10][t % 3];
        let kind = KINDS[t % 2];
        let preset = presets()[(t / 2) % 4].clone();
        let inst = random_instance(&mut rng, n);
        let w = OrderedWeights::preset(preset, n).unwrap();
        let original = brute_solution(&inst, 2, &w, kind).map_err(|e| e.to_string())?;
        let map = kmeans_aggregate(&inst, n / 2, t as u64, 100, kind, default_coef_bound(&inst)).map_err(|e| e.to_string())?;
        let rep = bound_and_error(&map, &w, &original, |agg| brute_solution(agg, 2, &w, kind)).map_err(|e| e.to_string())?;
        let diff = (rep.aggregated_objective - rep.best_known).abs();
        worst_ratio = worst_ratio.max(diff / rep.bound.max(1e-300));
        if diff > rep.bound + 1e-9 || rep.realized_error > rep.bound + 1e-9 {
            bad.push(format!("#{t}: diff {diff} realized {} bound {}", rep.realized_error, rep.bound));
        }
        if t < 5 {
            let id = kmeans_aggregate(&inst, n, 0, 100, kind, default_coef_bound(&inst)).map_err(|e| e.to_string())?;
            let r = bound_and_error(&id, &w, &original, |agg| brute_solution(agg, 2, &w, kind)).map_err(|e| e.to_string())?;
            if r.bound != 0.0 || r.realized_error.abs() > 1e-9 || (r.aggregated_objective - r.best_known).abs() > 1e-9 {
                bad.push(format!("identity #{t}: bound {} error {}", r.bound, r.realized_error));
            }
        }
    }
    if bad.is_empty() {
        Ok(format!("20 instances, 0 violations, largest |diff|/bound {worst_ratio:.3}; identity bound 0, error 0"))
    } else {
        Err(bad.join("; "))
    }
}

fn geometric_diagnostics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let mut fails = Vec::new();
    for t in 0..20 {
        let inst = random_instance(&mut rng, 10);
        let kind = KINDS[t % 2];
        for preset in [Preset::Weber, Preset::Center] {
            let w = OrderedWeights::preset(preset.clone(), 10).unwrap();
            let sol = brute_solution(&inst, 1, &w, kind).map_err(|e| e.to_string())?;
            let dg = diagnostics(&sol, &inst, &w, kind);
            let pass = match preset {
                Preset::Weber => dg.pseudo_halving.as_ref().is_some_and(|h| h.pass),
                _ => dg.center.as_ref().is_some_and(|c| c.pass),
            };
            if !pass {
                fails.push(format!("#{t} {kind:?} {preset:?}: {dg:?}"));
            }
        }
    }
    if fails.is_empty() {
        Ok("20 Weber sets pseudo-halving, 20 Center sets with a witness".into())
    } else {
        Err(fails.join("; "))
    }
}

fn desk_scale() -> Outcome {
    let inst = quandt();
    let kind = ResidualKind::Vertical;
    let limit = Some(Duration::from_secs(600));
    let mut lines = Vec::new();
    let mut ok = true;
    for preset in [Preset::Weber, Preset::Center, Preset::KCentrum(10), Preset::Centdian(0.9)] {
        let w = OrderedWeights::preset(preset.clone(), inst.n()).unwrap();
        let t0 = Instant::now();
        let bp = solve_bnp(&inst, 2, &w, kind, &BnpConfig { time_limit: limit, ..Default::default() }).map_err(|e| e.to_string())?;
        let t1 = Instant::now();
        let cp = solve_compact_auto(&inst, 2, &w, kind, None, &CompactConfig { time_limit: limit, ..Default::default() })
            .map_err(|e| e.to_string())?;
        let t2 = Instant::now();
        let (a, b) = (bp.objective().unwrap_or(f64::NAN), cp.objective().unwrap_or(f64::NAN));
        let pass = bp.status == MipStatus::Optimal && cp.status == MipStatus::Optimal && (a - b).abs() <= 1e-6;
        ok &= pass;
        lines.push(format!(
            "{preset:?}: bp {:?} {a:.6} ({:.1}s), compact {:?} {b:.6} ({:.1}s)",
            bp.status,
            (t1 - t0).as_secs_f64(),
            cp.status,
            (t2 - t1).as_secs_f64()
        ));
    }
    if ok {
        Ok(lines.join("; "))
    } else {
        Err(lines.join("; "))
    }
}

fn main() {
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let criteria: [Criterion; 8] = [
        ("1 oracle equivalence", oracle_equivalence),
        ("2 quandt figure check", quandt_figures),
        ("3 om representation", om_representation),
        ("4 merge inequalities", merge_inequalities),
        ("5 pricing exactness", pricing_exactness),
        ("6 aggregation bound", aggregation_bound),
        ("7 geometric diagnostics", geometric_diagnostics),
        ("8 desk-scale solvability", desk_scale),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        if !filter.is_empty() && !filter.iter().any(|p| name.contains(p.as_str())) {
            continue;
        }
        let t = Instant::now();
        let res = f();
        let secs = t.elapsed().as_secs_f64();
        match res {
            Ok(msg) => println!("PASS criterion {name} [{secs:.1}s]: {msg}"),
            Err(msg) => {
                failed += 1;
                println!("FAIL criterion {name} [{secs:.1}s]: {msg}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
