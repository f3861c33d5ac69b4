//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::Instant;

use pathflow::diagnostics::{
    bv_propagation_experiment, cross_validate_wft_fv, inflow_fraction_bump, stability_experiment,
    tv_blowup_report, verify_flux_trace_tv, CounterexampleOptions, CounterexampleSpec, TraceProblem,
};
use pathflow::flux::{piecewise_linearize, Burgers, FluxModel};
use pathflow::front_tracking::{evolve, solve_ibvp_ft, StepFunction};
use pathflow::godunov::Boundary;
use pathflow::network::fixtures::{
    data_from_weights, equal_pieces, tree_network, pass_through_network, split_network, split_steady_data,
    two_junction_network, uniform_data,
};
use pathflow::network::{solve_network, Network, NetworkData, NetworkOptions, NetworkSolution};
use pathflow::series::PiecewiseConstant;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn lwr() -> FluxModel {
    FluxModel::lwr_linear(1.0, 1.0).unwrap()
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Random step function with lattice values in `[lo, hi]` (indices) and
/// variation at most `max_tv` (indices).
fn random_step(rng: &mut ChaCha8Rng, level: u32, span: (f64, f64), lo: i64, hi: i64, max_tv: i64) -> StepFunction {
    loop {
        let pieces = rng.gen_range(2..=8);
        let mut bp: Vec<f64> = (0..pieces - 1).map(|_| rng.gen_range(span.0..span.1)).collect();
        bp.sort_by(f64::total_cmp);
        bp.dedup();
        let values: Vec<i64> = (0..=bp.len()).map(|_| rng.gen_range(lo..=hi)).collect();
        let s = StepFunction::new(level, bp, values).unwrap();
        if s.variation_index() <= max_tv {
            return s;
        }
    }
}

/// Time traces of monotone-flux front tracking never vary more than the datum.
fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = (0i64, 0i64);
    let mut checked = 0;
    for problem in 0..50 {
        let level = if problem % 2 == 0 { 4 } else { 6 };
        let scale = 1i64 << level;
        // u^3/3 + u^2/2 + u/4 has derivative (u + 1/2)^2 >= 0 and an inflection at -1/2.
        let f = piecewise_linearize(|u| u * u * u / 3.0 + u * u / 2.0 + u / 4.0, level, -2.0, 2.0).unwrap();
        let init = random_step(&mut rng, level, (-1.0, 1.0), -2 * scale, scale, 4 * scale);
        let sol = evolve(&init, &f, 1.0).map_err(|e| e.to_string())?;
        for _ in 0..20 {
            let x = rng.gen_range(-2.0..2.0);
            let trace = sol.sample_time_trace(x).map_err(|e| e.to_string())?;
            let (tv, tv0) = (trace.variation_index(), init.variation_index());
            checked += 1;
            if tv > tv0 {
                return Err(format!("problem {problem}, x = {x}: trace variation {tv} > datum {tv0} (lattice units)"));
            }
            if tv - tv0 > worst.0 - worst.1 || checked == 1 {
                worst = (tv, tv0);
            }
        }
    }
    Ok(format!("{checked} traces, tightest trace/datum = {}/{} lattice units", worst.0, worst.1))
}

/// Boundary-value front tracking obeys the trace bound exactly.
fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let m = lwr();
    let horizon = 1.5;
    let mut checked = 0;
    for problem in 0..20 {
        let level = 4 + (problem % 3) as u32;
        let top = ((m.critical_density() * (1u64 << level) as f64).round()) as i64;
        let f = piecewise_linearize(|r| m.g(r), level, 0.0, m.critical_density()).unwrap();
        let init = random_step(&mut rng, level, (0.0, 1.0), 0, top, 4 * top);
        let inflow = random_step(&mut rng, level, (0.0, horizon), 0, top, 4 * top);
        let sol = solve_ibvp_ft(&init, &inflow, &f, 0.0, 1.0, horizon).map_err(|e| e.to_string())?;
        let bound = init.restrict(0.0, 1.0).variation_index()
            + inflow.restrict(0.0, horizon).variation_index()
            + (init.index_at(0.0) - inflow.index_at(0.0)).abs();
        for _ in 0..10 {
            let x = rng.gen_range(0.01..0.99);
            let trace = sol.sample_time_trace(x).map_err(|e| e.to_string())?;
            checked += 1;
            if trace.variation_index() > bound {
                return Err(format!(
                    "problem {problem}, x = {x}: trace variation {} > bound {bound}",
                    trace.variation_index()
                ));
            }
        }
    }
    Ok(format!("{checked} one-sided trace pairs within the bound"))
}

/// Flux-trace variation for Burgers stays put under refinement. Datum jumps
/// and probes sit on interfaces of the coarsest grid, so every level
/// represents the datum exactly and samples the same position.
fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let dxs = [4e-3, 2e-3, 1e-3];
    let coarse_cells = 500i64;
    let node = |k: i64| -1.0 + 2.0 * k as f64 / coarse_cells as f64;
    let mut worst: f64 = 0.0;
    let mut per_probe: f64 = 0.0;
    for datum in 0..10 {
        let level = 6;
        let scale = 1i64 << level;
        let step = loop {
            let pieces = rng.gen_range(2..=8);
            let mut nodes: Vec<i64> = (0..pieces - 1).map(|_| rng.gen_range(75..=425)).collect();
            nodes.sort_unstable();
            nodes.dedup();
            let values: Vec<i64> = (0..=nodes.len()).map(|_| rng.gen_range(-scale..=scale)).collect();
            let s = StepFunction::new(level, nodes.iter().map(|&k| node(k)).collect(), values).unwrap();
            if s.variation_index() <= 4 * scale {
                break s;
            }
        };
        let problem = TraceProblem {
            u0: step.to_piecewise_constant(),
            alpha: -1.0,
            beta: 1.0,
            horizon: 1.0,
            left: Boundary::Extrapolate,
            right: Boundary::Extrapolate,
        };
        let xs: Vec<f64> = (0..10).map(|_| node(rng.gen_range(50..=450))).collect();
        let report = verify_flux_trace_tv(&Burgers, &problem, &xs, &dxs).map_err(|e| e.to_string())?;
        // The bound is uniform in x: compare max_x TV w(., x) across levels,
        // with an absolute floor for data whose waves barely reach a probe.
        let (lo, hi) = report.bound_spread();
        if !(hi <= 1.1 * lo + 1e-3) {
            return Err(format!("datum {datum}: max trace TV over probes ranges over [{lo:.6}, {hi:.6}]"));
        }
        if lo > 1e-3 {
            worst = worst.max((hi - lo) / lo);
        }
        for i in 0..xs.len() {
            let (a, b) = report.spread(i);
            per_probe = per_probe.max(b - a);
        }
    }
    Ok(format!(
        "10 data x 10 probes, bound spread across levels at most {:.2}%, largest per-probe spread {per_probe:.4}",
        100.0 * worst
    ))
}

/// The exact trace's variation blows up while the datum and flux trace stay bounded.
fn criterion_4() -> Outcome {
    const TV_W_BOUND: f64 = 0.26;
    let opts = CounterexampleOptions::default();
    let mut tvs = Vec::new();
    let mut last = None;
    for nb in 1..=8 {
        let spec = CounterexampleSpec::new(nb).map_err(|e| e.to_string())?;
        let r = tv_blowup_report(&spec, &opts).map_err(|e| e.to_string())?;
        tvs.push((nb as f64, r.tv_u.total_variation));
        last = Some(r);
    }
    let r = last.unwrap();
    let n = tvs.len() as f64;
    let (sx, sy) = tvs.iter().fold((0.0, 0.0), |(a, b), &(x, y)| (a + x, b + y));
    let (mx, my) = (sx / n, sy / n);
    let slope = tvs.iter().map(|&(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / tvs.iter().map(|&(x, _)| (x - mx) * (x - mx)).sum::<f64>();
    let increasing = tvs.windows(2).all(|w| w[1].1 > w[0].1);
    let ok = r.tv_u.total_variation >= 3.0
        && r.tv_lower_bound >= 3.0
        && slope >= 0.45
        && increasing
        && r.tv_u0 <= 5.13
        && r.tv_w.total_variation <= TV_W_BOUND
        && r.rh_residual <= 1e-6
        && r.fan_edge_max < 0.0;
    check(
        ok,
        format!(
            "TV u(.,0) = {:.4} (lower bound {:.4}), slope {:.3}/block, TV u0 = {:.4}, TV w = {:.4}, RH residual {:.2e}",
            r.tv_u.total_variation, r.tv_lower_bound, slope, r.tv_u0, r.tv_w.total_variation, r.rh_residual
        ),
    )
}

fn steady_residual(sol: &NetworkSolution, junction: &str, from: f64) -> f64 {
    sol.junction_flux_residual(junction)
        .unwrap()
        .iter()
        .filter(|(t, _)| *t >= from)
        .map(|(_, r)| *r)
        .fold(0.0, f64::max)
}

/// Outgoing densities at a split, junction residual and a transparent junction.
fn criterion_5() -> Outcome {
    let m = lwr();
    let horizon = 6.0;
    let net = split_network(50, 1.0);
    let sol = solve_network(&net, &m, &split_steady_data(&net), horizon, &NetworkOptions::default())
        .map_err(|e| e.to_string())?;
    // Free root of rho (1 - rho) = share * 0.2 * 0.8.
    let root = |q: f64| (1.0 - (1.0 - 4.0 * q).sqrt()) / 2.0;
    let (ra, rb) = (root(0.6 * 0.16), root(0.4 * 0.16));
    let density_err = |id: &str, target: f64| {
        sol.road_solution(id)
            .unwrap()
            .density
            .final_state()
            .iter()
            .map(|r| (r - target).abs())
            .fold(0.0, f64::max)
    };
    let (ea, eb) = (density_err("A", ra), density_err("B", rb));
    let residual = steady_residual(&sol, "J", horizon - 1.0);

    let pass = pass_through_network(50, 1.0);
    let mut data = uniform_data(&pass, 0.2, &[0.6, 0.4]);
    data.rho0.insert("C".into(), PiecewiseConstant::constant(0.0));
    let psol = solve_network(&pass, &m, &data, horizon, &NetworkOptions::default()).map_err(|e| e.to_string())?;
    let c = psol.road_solution("C").unwrap();
    let mut pass_err: f64 = c.density.final_state().iter().map(|r| (r - 0.2).abs()).fold(0.0, f64::max);
    for (p, share) in [("P1", 0.6), ("P2", 0.4)] {
        let th = psol.theta_solution(p, "C").unwrap();
        let level = th.mass.len() - 1;
        for (mk, rho) in th.mass[level].iter().zip(&th.rho[level]) {
            pass_err = pass_err.max((mk - share * rho).abs());
        }
    }
    // Quoted reference decimals; the second differs from its own root formula by 6e-4.
    let quoted = |id: &str, target: f64| density_err(id, target);
    let (qa, qb) = (quoted("A", 0.107565), quoted("B", 0.068119));
    let ok = ea <= 1e-3 && eb <= 1e-3 && qa <= 1e-3 && qb <= 1e-3 && residual <= 1e-8 && pass_err <= 1e-3;
    check(
        ok,
        format!(
            "A: {ra:.6} (err {ea:.1e}, vs quoted {qa:.1e}), B: {rb:.6} (err {eb:.1e}, vs quoted {qb:.1e}), steady junction residual {residual:.1e}, pass-through err {pass_err:.1e}"
        ),
    )
}

fn random_network_data(net: &Network, rng: &mut ChaCha8Rng, lo: f64, hi: f64, theta_min: f64, horizon: f64) -> NetworkData {
    let pieces = 4;
    let mut rho0 = BTreeMap::new();
    let mut weights0 = BTreeMap::new();
    for r in &net.roads {
        rho0.insert(r.id.clone(), (0..pieces).map(|_| rng.gen_range(lo..=hi)).collect());
        for p in net.paths.iter().filter(|p| p.roads.contains(&r.id)) {
            weights0.insert(
                (p.id.clone(), r.id.clone()),
                (0..pieces).map(|_| rng.gen_range(0.2..1.0)).collect::<Vec<f64>>(),
            );
        }
    }
    let rho_in = equal_pieces(horizon, &(0..pieces).map(|_| rng.gen_range(lo..=hi)).collect::<Vec<_>>());
    let weights_in: Vec<Vec<f64>> = net
        .paths
        .iter()
        .map(|_| (0..pieces).map(|_| rng.gen_range(0.2..1.0)).collect())
        .collect();
    let mut data = data_from_weights(net, &rho0, &weights0, rho_in, &weights_in, horizon);
    if theta_min > 0.0 {
        // every fraction already exceeds 0.2 / (0.2 + (n - 1)) >= theta_min for the small fixtures
        debug_assert!(data.theta0.values().all(|f| f.min() >= theta_min));
    }
    data.rho_in = data.rho_in.map(|v| v.clamp(lo, hi));
    data
}

/// Path masses add up to the density on the full tree.
fn criterion_6() -> Outcome {
    let m = lwr();
    let mut worst: f64 = 0.0;
    let mut balance: f64 = 0.0;
    for seed in 0..3 {
        let mut rng = ChaCha8Rng::seed_from_u64(60 + seed);
        let net = tree_network(50);
        let data = random_network_data(&net, &mut rng, 0.0, 0.45, 0.0, 2.0);
        let sol = solve_network(&net, &m, &data, 2.0, &NetworkOptions {
            output_times: (1..20).map(|k| 0.1 * k as f64).collect(),
            ..NetworkOptions::default()
        })
        .map_err(|e| e.to_string())?;
        worst = worst.max(sol.max_sum_to_one_residual());
        balance = balance.max(sol.mass_balance_error());
    }
    check(
        worst <= 1e-6 * m.rho_max(),
        format!("max |sum m_k - rho| = {worst:.2e}, mass balance {balance:.1e}"),
    )
}

/// Recorded densities stay in the free regime on every fixture.
fn criterion_7() -> Outcome {
    let m = lwr();
    let star = m.critical_density();
    let opts = NetworkOptions {
        output_times: (1..40).map(|k| 0.1 * k as f64).collect(),
        ..NetworkOptions::default()
    };
    let mut runs: Vec<(&str, Network, NetworkData)> = Vec::new();
    let split = split_network(50, 1.0);
    runs.push(("split", split.clone(), split_steady_data(&split)));
    let pass = pass_through_network(50, 1.0);
    runs.push(("pass-through", pass.clone(), uniform_data(&pass, 0.2, &[0.6, 0.4])));
    let mut rng = ChaCha8Rng::seed_from_u64(70);
    let two = two_junction_network(50, 1.0);
    runs.push(("two-junction", two.clone(), random_network_data(&two, &mut rng, 0.0, 0.5, 0.0, 4.0)));
    let fig = tree_network(40);
    runs.push(("tree", fig.clone(), random_network_data(&fig, &mut rng, 0.0, 0.5, 0.0, 4.0)));
    let full = uniform_data(&split, star, &[0.5, 0.5]);
    runs.push(("critical", split, full));
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (name, net, data) in &runs {
        let sol = solve_network(net, &m, data, 4.0, &opts).map_err(|e| format!("{name}: {e}"))?;
        let (a, b) = sol.density_range();
        if a < 0.0 || b > star + 1e-12 {
            return Err(format!("{name}: density range [{a:e}, {b:.15}] leaves [0, {star}]"));
        }
        lo = lo.min(a);
        hi = hi.max(b);
    }
    Ok(format!("{} fixtures, densities in [{lo:.3e}, {hi:.15}]", runs.len()))
}

/// L1 distances shrink with the data perturbation, down to the scheme's own error.
fn criterion_8() -> Outcome {
    let m = lwr();
    let horizon = 2.0;
    let n_cells = 50;
    let base_net = split_network(n_cells, 1.0);
    let base = uniform_data(&base_net, 0.25, &[0.5, 0.5]);
    let perturbed: Vec<(f64, NetworkData)> = (0..4)
        .map(|k| {
            let delta = 0.1 * 0.5f64.powi(k);
            (delta, inflow_fraction_bump(&base, "P1", "P2", 0.2, 0.3, delta).unwrap())
        })
        .collect();
    let report = stability_experiment(
        |n| split_network(n, 1.0),
        n_cells,
        &m,
        &base,
        &perturbed,
        horizon,
        &NetworkOptions {
            output_times: (1..20).map(|k| 0.1 * k as f64).collect(),
            ..NetworkOptions::default()
        },
    )
    .map_err(|e| e.to_string())?;
    let rows: Vec<String> = report
        .rows
        .iter()
        .map(|r| format!("{:.4}:{:.2e}/{:.2e}", r.delta, r.rho_distance, r.mass_distance))
        .collect();
    let ok = report.is_monotone() && report.ends_below_self_error(3.0) && report.min_decrease_ratio() >= 1.5;
    check(
        ok,
        format!(
            "delta:rho/m {} ; self-error {:.2e}/{:.2e}; min ratio {:.2}",
            rows.join(" "),
            report.self_error_rho,
            report.self_error_mass,
            report.min_decrease_ratio()
        ),
    )
}

/// Spatial variation of every density and fraction is bounded uniformly in the grid.
fn criterion_9() -> Outcome {
    let m = lwr();
    let eps = 0.05;
    let horizon = 2.0;
    let mut rng = ChaCha8Rng::seed_from_u64(90);
    let net = two_junction_network(100, 1.0);
    let data = random_network_data(&net, &mut rng, eps, m.critical_density() - eps, eps, horizon);
    if let Some(f) = data.theta0.values().chain(data.theta_in.values()).find(|f| f.min() < eps) {
        return Err(format!("data are not separated: fraction {}", f.min()));
    }
    let report = bv_propagation_experiment(
        |n| two_junction_network(n, 1.0),
        &[100, 200, 400],
        &m,
        &data,
        horizon,
        &NetworkOptions {
            output_times: (1..40).map(|k| 0.05 * k as f64).collect(),
            ..NetworkOptions::default()
        },
    )
    .map_err(|e| e.to_string())?;
    let ratio = report.max_ratio(1e-9);
    let source = (0..report.rows.len()).map(|i| report.source_tv(i)).fold(0.0, f64::max);
    check(
        ratio <= 1.1 && source <= report.source_bound + 1e-2,
        format!(
            "max TV ratio across 100/200/400 cells {ratio:.4}; source road TV {source:.4} vs bound {:.4}",
            report.source_bound
        ),
    )
}

/// Front tracking and Godunov agree on the same piecewise-linear flux.
fn criterion_10() -> Outcome {
    let level = 3;
    let f = piecewise_linearize(|u| u * u, level, -2.0, 2.0).unwrap();
    let s = 1i64 << level;
    let fixtures = [
        ("shock", StepFunction::new(level, vec![0.0], vec![s, 0]).unwrap()),
        ("rarefaction", StepFunction::new(level, vec![0.0], vec![-s, s]).unwrap()),
        (
            "interaction",
            StepFunction::new(level, vec![-0.5, 0.0, 0.5], vec![s, 0, -s, s]).unwrap(),
        ),
    ];
    let mut parts = Vec::new();
    let mut ok = true;
    for (name, init) in &fixtures {
        let cv = cross_validate_wft_fv(init, &f, 1.0, (-3.0, 3.0), 1e-3).map_err(|e| format!("{name}: {e}"))?;
        ok &= cv.l1 <= 5e-2;
        parts.push(format!("{name} {:.2e}", cv.l1));
    }
    check(ok, format!("L1 at T = 1, dx = 1e-3: {}", parts.join(", ")))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("front-tracking trace variation", criterion_1),
        ("boundary trace bound", criterion_2),
        ("flux trace variation under refinement", criterion_3),
        ("trace variation blow-up", criterion_4),
        ("junction correctness", criterion_5),
        ("sum to one", criterion_6),
        ("free-regime maximum principle", criterion_7),
        ("stability", criterion_8),
        ("BV propagation", criterion_9),
        ("front tracking vs Godunov", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:2} PASS  {name} ({secs:.1}s): {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:2} FAIL  {name} ({secs:.1}s): {detail}", i + 1);
            }
        }
    }
    if failed == 0 {
        println!("acceptance: all {} criteria passed", criteria.len());
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} of {} criteria failed", criteria.len());
        ExitCode::FAILURE
    }
}
