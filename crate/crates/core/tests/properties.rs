use pathflow::diagnostics::total_variation;
use pathflow::flux::{piecewise_linearize, Burgers, FluxModel, PiecewiseLinearFlux};
use pathflow::front_tracking::{evolve, solve_riemann_pl, StepFunction};
use pathflow::godunov::{solve_fv, solve_ibvp_fv, Boundary, FvOptions, Grid};
use pathflow::network::fixtures::{split_network, uniform_data};
use pathflow::network::{solve_network, NetworkOptions};
use pathflow::series::PiecewiseConstant;
use pathflow::theta::{solve_theta, ThetaOptions};
use proptest::prelude::*;

const LEVEL: u32 = 4;

fn cubic() -> PiecewiseLinearFlux {
    piecewise_linearize(|u| u * u * u - u, LEVEL, -2.0, 2.0).unwrap()
}

fn step_datum() -> impl Strategy<Value = StepFunction> {
    (1usize..6)
        .prop_flat_map(|n| {
            (
                prop::collection::vec(-1.0f64..1.0, n),
                prop::collection::vec(-24i64..=24, n + 1),
            )
        })
        .prop_map(|(mut bp, values)| {
            bp.sort_by(f64::total_cmp);
            for i in 1..bp.len() {
                if bp[i] <= bp[i - 1] {
                    bp[i] = bp[i - 1] + 1e-3;
                }
            }
            StepFunction::new(LEVEL, bp, values).unwrap()
        })
}

fn pieces(lo: f64, hi: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(lo..hi, 1..6)
}

fn equal_split(values: &[f64], length: f64) -> PiecewiseConstant {
    let n = values.len();
    let bp = (1..n).map(|i| length * i as f64 / n as f64).collect();
    PiecewiseConstant::new(bp, values.to_vec()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn riemann_fan_follows_the_envelope(ul in -32i64..=32, ur in -32i64..=32) {
        let f = cubic();
        let waves = solve_riemann_pl(ul, ur, &f);
        if ul == ur {
            prop_assert!(waves.is_empty());
        } else {
            prop_assert_eq!(waves[0].left, ul);
            prop_assert_eq!(waves.last().unwrap().right, ur);
            for w in waves.windows(2) {
                prop_assert_eq!(w[0].right, w[1].left);
                prop_assert!(w[0].speed < w[1].speed);
            }
            for w in &waves {
                let (fa, fb) = (f.value_at(w.left), f.value_at(w.right));
                let s = (fb - fa) / ((w.right - w.left) as f64 * f.step());
                prop_assert!((w.speed - s).abs() <= 1e-12 * s.abs().max(1.0));
                // Every lattice point the wave jumps over lies on the correct
                // side of its chord.
                let (a, b) = (w.left.min(w.right), w.left.max(w.right));
                for j in a..=b {
                    let chord = fa + s * (j - w.left) as f64 * f.step();
                    let gap = f.value_at(j) - chord;
                    if ul < ur {
                        prop_assert!(gap >= -1e-12);
                    } else {
                        prop_assert!(gap <= 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn front_tracking_conserves_mass_and_variation(init in step_datum(), horizon in 0.1f64..1.0) {
        let f = cubic();
        let sol = evolve(&init, &f, horizon).unwrap();
        let profile = sol.sample_space_profile(horizon).unwrap();
        prop_assert!(profile.variation_index() <= init.variation_index());
        let (lo, hi) = init.index_range();
        let speed = (lo..hi).map(|j| f.segment_slope(j).abs()).fold(0.0, f64::max);
        let reach = 1.0 + speed * horizon + 1.0;
        let (a, b) = (-reach, reach);
        let outflow = f.value_at(init.index_at(b)) - f.value_at(init.index_at(a));
        let before = init.integral(a, b);
        let after = profile.integral(a, b);
        prop_assert!((after - (before - horizon * outflow)).abs() <= 1e-9);
    }

    #[test]
    fn godunov_conserves_and_diminishes_variation(u0 in prop::collection::vec(-1.5f64..1.5, 4..60)) {
        let grid = Grid::new(-1.0, 1.0, u0.len()).unwrap();
        let tv0 = total_variation(&u0);
        let sol = solve_fv(&Burgers, grid, u0, &Boundary::Extrapolate, &Boundary::Extrapolate, 0.4, &FvOptions::default()).unwrap();
        prop_assert!(sol.conservation_error() <= 1e-12);
        for level in &sol.rho {
            prop_assert!(total_variation(level) <= tv0 + 1e-12);
        }
    }

    #[test]
    fn free_inversion_round_trips(v_max in 0.5f64..3.0, rho_max in 0.2f64..2.0, frac in 0.0f64..=1.0) {
        let m = FluxModel::lwr_linear(v_max, rho_max).unwrap();
        let q = frac * m.q_max();
        let rho = m.invert_flux_free(q).unwrap();
        prop_assert!((0.0..=m.critical_density() + 1e-12).contains(&rho));
        prop_assert!((m.g(rho) - q).abs() <= 1e-12 * m.q_max().max(1.0));
    }

    #[test]
    fn fractions_stay_in_the_unit_interval(
        rho0 in pieces(0.0, 0.5),
        inflow in pieces(0.0, 0.5),
        theta0 in pieces(0.0, 1.0),
        theta_in in pieces(0.0, 1.0),
    ) {
        let m = FluxModel::lwr_linear(1.0, 1.0).unwrap();
        let grid = Grid::new(0.0, 1.0, 40).unwrap();
        let horizon = 1.0;
        let opts = FvOptions { record_interface_fluxes: true, ..FvOptions::default() };
        let drive = solve_ibvp_fv(&equal_split(&rho0, 1.0), &equal_split(&inflow, horizon), &m, grid, horizon, &opts).unwrap();
        let th_in = equal_split(&theta_in, horizon);
        let per_step: Vec<f64> = drive.step_times.iter().map(|&t| th_in.eval(t)).collect();
        let th = solve_theta(&drive, &grid.averages(&equal_split(&theta0, 1.0)), &per_step, &ThetaOptions::for_rho_max(1.0)).unwrap();
        for (l, level) in th.mass.iter().enumerate() {
            prop_assert_eq!(&th.rho[l], &drive.rho[l]);
            for (mk, r) in level.iter().zip(&th.rho[l]) {
                prop_assert!(*mk >= -1e-15 && *mk <= r + 1e-14);
            }
        }
        for theta in th.theta_level(th.mass.len() - 1).into_iter().flatten() {
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(&theta));
        }
    }

    #[test]
    fn split_network_keeps_path_masses_consistent(rho in 0.0f64..0.5, share in 0.0f64..=1.0) {
        let m = FluxModel::lwr_linear(1.0, 1.0).unwrap();
        let net = split_network(20, 1.0);
        let data = uniform_data(&net, rho, &[share, 1.0 - share]);
        let sol = solve_network(&net, &m, &data, 1.5, &NetworkOptions::default()).unwrap();
        prop_assert!(sol.max_sum_to_one_residual() <= 1e-12);
        prop_assert!(sol.mass_balance_error() <= 1e-12);
        prop_assert!(sol.max_junction_residual() <= 1e-12);
        let (lo, hi) = sol.density_range();
        prop_assert!(lo >= 0.0 && hi <= m.critical_density() + 1e-12);
    }
}
