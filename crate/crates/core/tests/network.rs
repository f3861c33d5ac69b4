use pathflow::flux::FluxModel;
use pathflow::godunov::{solve_ibvp_fv, FvOptions, Grid, TimeStep};
use pathflow::network::fixtures::{tree_network, split_network, split_steady_data, two_junction_network, uniform_data};
use pathflow::network::{solve_network, Network, NetworkData, NetworkOptions, PathSpec, Road};
use pathflow::series::PiecewiseConstant;
use pathflow::theta::{solve_theta, ThetaOptions, VacuumRule};
use pathflow::Error;

fn lwr() -> FluxModel {
    FluxModel::lwr_linear(1.0, 1.0).unwrap()
}

fn time_varying_split(net: &Network) -> NetworkData {
    let mut data = split_steady_data(net);
    let p1 = PiecewiseConstant::new(vec![0.5, 1.2], vec![0.6, 0.2, 0.9]).unwrap();
    data.theta_in.insert("P2".into(), p1.map(|v| 1.0 - v));
    data.theta_in.insert("P1".into(), p1);
    data.rho_in = PiecewiseConstant::new(vec![0.8], vec![0.2, 0.35]).unwrap();
    data
}

#[test]
fn single_road_matches_the_one_road_solvers() {
    let net = Network {
        roads: vec![Road {
            id: "R".into(),
            length: 2.0,
            n_cells: 40,
        }],
        junctions: Vec::new(),
        paths: vec![
            PathSpec {
                id: "P1".into(),
                roads: vec!["R".into()],
            },
            PathSpec {
                id: "P2".into(),
                roads: vec!["R".into()],
            },
        ],
    };
    let m = lwr();
    let mut data = uniform_data(&net, 0.3, &[0.25, 0.75]);
    data.rho0.insert("R".into(), PiecewiseConstant::new(vec![1.0], vec![0.1, 0.4]).unwrap());
    data.rho_in = PiecewiseConstant::new(vec![0.5], vec![0.3, 0.05]).unwrap();
    let sol = solve_network(&net, &m, &data, 1.5, &NetworkOptions::default()).unwrap();

    let grid = Grid::new(0.0, 2.0, 40).unwrap();
    let opts = FvOptions {
        time_step: TimeStep::Fixed(sol.dt),
        record_interface_fluxes: true,
        ..FvOptions::default()
    };
    let drive = solve_ibvp_fv(&data.rho0["R"], &data.rho_in, &m, grid, 1.5, &opts).unwrap();
    let road = sol.road_solution("R").unwrap();
    assert_eq!(road.density.rho, drive.rho);
    let theta0 = grid.averages(&data.theta0[&("P1".to_string(), "R".to_string())]);
    let inflow = vec![0.25; drive.n_steps()];
    let th = solve_theta(&drive, &theta0, &inflow, &ThetaOptions::for_rho_max(1.0)).unwrap();
    assert_eq!(sol.theta_solution("P1", "R").unwrap().mass, th.mass);
}

#[test]
fn corrupted_junction_fraction_breaks_both_residuals() {
    let m = lwr();
    let net = split_network(30, 1.0);
    let data = time_varying_split(&net);
    let clean = solve_network(&net, &m, &data, 3.0, &NetworkOptions::default()).unwrap();
    assert!(clean.max_junction_residual() <= 1e-12);
    assert!(clean.max_sum_to_one_residual() <= 1e-12);

    let faulty = solve_network(
        &net,
        &m,
        &data,
        3.0,
        &NetworkOptions {
            theta_boundary_fault: Some(("P1".into(), 0.5)),
            ..NetworkOptions::default()
        },
    )
    .unwrap();
    assert!(faulty.max_junction_residual() > 1e-3, "{}", faulty.max_junction_residual());
    assert!(faulty.max_sum_to_one_residual() > 1e-3, "{}", faulty.max_sum_to_one_residual());
}

#[test]
fn vacuum_convention_does_not_change_path_masses() {
    let m = lwr();
    let net = two_junction_network(30, 1.0);
    let mut data = uniform_data(&net, 0.25, &[0.2, 0.3, 0.5]);
    for id in ["A", "B", "A1", "A2"] {
        data.rho0.insert(id.into(), PiecewiseConstant::new(vec![0.5], vec![0.0, 0.3]).unwrap());
    }
    let run = |rule| {
        solve_network(
            &net,
            &m,
            &data,
            2.0,
            &NetworkOptions {
                vacuum_rule: rule,
                output_times: vec![0.5, 1.0, 1.5],
                ..NetworkOptions::default()
            },
        )
        .unwrap()
    };
    let (a, b) = (run(VacuumRule::Upwind), run(VacuumRule::Zero));
    let mut worst: f64 = 0.0;
    for (ra, rb) in a.roads.iter().zip(&b.roads) {
        for (k, ta) in &ra.thetas {
            for (la, lb) in ta.mass.iter().zip(&rb.thetas[k].mass) {
                for (x, y) in la.iter().zip(lb) {
                    worst = worst.max((x - y).abs());
                }
            }
        }
    }
    assert!(worst <= 1e-10, "{worst}");
}

#[test]
fn time_varying_fractions_keep_residuals_at_rounding_level() {
    let m = lwr();
    for n in [20, 40, 80] {
        let net = split_network(n, 1.0);
        let sol = solve_network(&net, &m, &time_varying_split(&net), 3.0, &NetworkOptions::default()).unwrap();
        let l1: f64 = sol
            .junction_flux_residual("J")
            .unwrap()
            .iter()
            .map(|(_, r)| r * sol.dt)
            .sum();
        assert!(l1 <= 1e-12, "n = {n}: {l1}");
        assert!(sol.mass_balance_error() <= 1e-8);
    }
}

#[test]
fn source_road_fractions_are_exactly_linear() {
    let m = lwr();
    let net = tree_network(20);
    let shares: Vec<f64> = (1..=10).map(|k| k as f64 / 55.0).collect();
    let data = uniform_data(&net, 0.3, &shares);
    let sol = solve_network(&net, &m, &data, 2.0, &NetworkOptions::default()).unwrap();
    let source = sol.sum_to_one_residual("S-N1").unwrap();
    assert!(source.iter().flatten().all(|r| r.abs() <= 1e-9));
    assert!(sol.max_sum_to_one_residual() <= 1e-6);
    assert!(sol.mass_balance_error() <= 1e-8);
}

#[test]
fn oversized_junction_fraction_is_clamped_and_logged() {
    let m = lwr();
    let net = split_network(10, 1.0);
    let data = uniform_data(&net, 0.5, &[0.5, 0.5]);
    let opts = NetworkOptions {
        theta_boundary_fault: Some(("P1".into(), 3.0)),
        ..NetworkOptions::default()
    };
    let sol = solve_network(&net, &m, &data, 0.5, &opts).unwrap();
    assert!(sol.junctions[0].clamp_events > 0);
    let bars = &sol.junctions[0].outgoing[0].theta_bar;
    assert!(bars.iter().flatten().all(|&v| (0.0..=1.0).contains(&v)));
}

#[test]
fn invalid_inputs_are_reported_as_validation_errors() {
    let m = lwr();
    let mut net = split_network(10, 1.0);
    net.junctions[0].incoming.push("B".into());
    let data = uniform_data(&net, 0.2, &[0.5, 0.5]);
    let Err(Error::Validation(msgs)) = solve_network(&net, &m, &data, 1.0, &NetworkOptions::default()) else {
        panic!("expected a validation error");
    };
    assert!(msgs.iter().any(|s| s.contains("non-T junction")));
}
