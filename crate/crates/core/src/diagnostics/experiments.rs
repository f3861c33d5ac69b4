//! Experiment drivers: flux-trace variation under refinement, stability of
//! the network solve under data perturbations, propagation of spatial
//! variation, and front tracking against the finite-volume scheme.

use std::io::Write;

use rayon::prelude::*;

use super::tv::{total_variation, TvReport};
use crate::error::{Error, Result};
use crate::flux::{PiecewiseLinearFlux, ScalarFlux};
use crate::front_tracking::{evolve, StepFunction};
use crate::godunov::{solve_fv, Boundary, FvOptions, Grid, TimeStep, DEFAULT_CFL};
use crate::network::{solve_network, Network, NetworkData, NetworkOptions, NetworkSolution};
use crate::series::PiecewiseConstant;
use crate::theta::theta_value;
use crate::flux::FluxModel;

/// A scalar problem on `[alpha, beta]` for the flux-trace experiment.
#[derive(Debug, Clone)]
pub struct TraceProblem {
    pub u0: PiecewiseConstant,
    pub alpha: f64,
    pub beta: f64,
    pub horizon: f64,
    pub left: Boundary,
    pub right: Boundary,
}

#[derive(Debug, Clone)]
pub struct TraceLevel {
    pub dx: f64,
    /// One report per probe position, in input order.
    pub reports: Vec<TvReport>,
}

#[derive(Debug, Clone)]
pub struct FluxTraceTvReport {
    pub xs: Vec<f64>,
    pub levels: Vec<TraceLevel>,
}

impl FluxTraceTvReport {
    /// Smallest and largest trace variation at probe `i` over the levels.
    pub fn spread(&self, i: usize) -> (f64, f64) {
        self.levels
            .iter()
            .map(|l| l.reports[i].total_variation)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)))
    }

    /// Smallest and largest over the levels of `max_x TV w(., x)`, the
    /// tightest bound uniform in the probe position.
    pub fn bound_spread(&self) -> (f64, f64) {
        self.levels
            .iter()
            .map(|l| l.reports.iter().map(|r| r.total_variation).fold(0.0, f64::max))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)))
    }

    /// Probes whose variation grows by more than `rel` (plus `abs`) between
    /// the smallest and the largest level value.
    pub fn unstable_probes(&self, rel: f64, abs: f64) -> Vec<usize> {
        (0..self.xs.len())
            .filter(|&i| {
                let (lo, hi) = self.spread(i);
                hi > (1.0 + rel) * lo + abs
            })
            .collect()
    }

    /// Writes `dx,x,samples,tv,positive,negative` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# pathflow-csv v1 flux-trace-tv")?;
        writeln!(out, "dx,x,samples,tv,positive,negative")?;
        for l in &self.levels {
            for r in &l.reports {
                writeln!(
                    out,
                    "{:.16e},{:.16e},{},{:.16e},{:.16e},{:.16e}",
                    l.dx, r.x, r.samples, r.total_variation, r.positive_variation, r.negative_variation
                )?;
            }
        }
        Ok(())
    }
}

/// Solves `problem` at every grid width in `dxs` and reports the variation of
/// the numerical flux through the interface nearest to each `x`, sampled at
/// every step.
pub fn verify_flux_trace_tv<F: ScalarFlux + Sync + ?Sized>(
    flux: &F,
    problem: &TraceProblem,
    xs: &[f64],
    dxs: &[f64],
) -> Result<FluxTraceTvReport> {
    if let Some(x) = xs.iter().find(|&&x| !(x > problem.alpha && x < problem.beta)) {
        return Err(Error::Domain(format!(
            "probe {x} outside ({}, {})",
            problem.alpha, problem.beta
        )));
    }
    let levels = dxs
        .par_iter()
        .map(|&dx| {
            let n = ((problem.beta - problem.alpha) / dx).round().max(2.0) as usize;
            let grid = Grid::new(problem.alpha, problem.beta, n)?;
            let opts = FvOptions {
                probes: xs.to_vec(),
                ..FvOptions::default()
            };
            let sol = solve_fv(
                flux,
                grid,
                grid.averages(&problem.u0),
                &problem.left,
                &problem.right,
                problem.horizon,
                &opts,
            )?;
            let reports = sol
                .probes
                .iter()
                .map(|p| TvReport::from_samples(p.x, &p.flux, grid.dx))
                .collect();
            Ok(TraceLevel { dx: grid.dx, reports })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FluxTraceTvReport {
        xs: xs.to_vec(),
        levels,
    })
}

/// L1 distances between two network solutions, maximized over the recorded
/// levels: `(sum over roads of |rho_a - rho_b|, sum over (path, road) of
/// |m_a - m_b|)`. The finer solution is averaged onto the coarser grid when
/// its cell count is a multiple of the coarser one.
pub fn network_l1_distance(a: &NetworkSolution, b: &NetworkSolution) -> Result<(f64, f64)> {
    if a.network.roads.len() != b.network.roads.len() || a.times().len() != b.times().len() {
        return Err(Error::Domain("solutions do not share roads and recorded levels".into()));
    }
    let (coarse, fine) = if a.roads[0].density.grid.n_cells <= b.roads[0].density.grid.n_cells {
        (a, b)
    } else {
        (b, a)
    };
    let mut rho_dist: f64 = 0.0;
    let mut mass_dist: f64 = 0.0;
    for level in 0..coarse.times().len() {
        let mut rho_sum = 0.0;
        let mut mass_sum = 0.0;
        for (rc, rf) in coarse.roads.iter().zip(&fine.roads) {
            let gc = rc.density.grid;
            let ratio = rf.density.grid.n_cells / gc.n_cells;
            if ratio == 0 || rf.density.grid.n_cells != ratio * gc.n_cells {
                return Err(Error::Domain(format!(
                    "grids of {} and {} cells are not nested",
                    gc.n_cells, rf.density.grid.n_cells
                )));
            }
            rho_sum += cell_l1(&rc.density.rho[level], &rf.density.rho[level], ratio, gc.dx);
            for (k, th) in &rc.thetas {
                let other = rf
                    .thetas
                    .get(k)
                    .ok_or_else(|| Error::Domain(format!("path {k} missing on one road")))?;
                mass_sum += cell_l1(&th.mass[level], &other.mass[level], ratio, gc.dx);
            }
        }
        rho_dist = rho_dist.max(rho_sum);
        mass_dist = mass_dist.max(mass_sum);
    }
    Ok((rho_dist, mass_dist))
}

fn cell_l1(coarse: &[f64], fine: &[f64], ratio: usize, dx: f64) -> f64 {
    coarse
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let avg = fine[i * ratio..(i + 1) * ratio].iter().sum::<f64>() / ratio as f64;
            (c - avg).abs() * dx
        })
        .sum()
}

/// Adds `height` on `[start, start + delta / height)` to the inflow fraction
/// of `path` and subtracts it from `compensating`, so that the perturbation
/// has L1 size `delta` and the fractions still sum to one.
pub fn inflow_fraction_bump(
    data: &NetworkData,
    path: &str,
    compensating: &str,
    start: f64,
    height: f64,
    delta: f64,
) -> Result<NetworkData> {
    let mut out = data.clone();
    if delta == 0.0 {
        return Ok(out);
    }
    let bump = PiecewiseConstant::new(vec![start, start + delta / height], vec![0.0, height, 0.0])?;
    for (id, sign) in [(path, 1.0), (compensating, -1.0)] {
        let f = out
            .theta_in
            .get_mut(id)
            .ok_or_else(|| Error::Validation(vec![format!("no inflow fraction for path {id}")]))?;
        *f = f.add(&bump.map(|v| sign * v));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityRow {
    pub delta: f64,
    pub rho_distance: f64,
    pub mass_distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub n_cells: usize,
    pub rows: Vec<StabilityRow>,
    /// Distance of the base run from the same run on a grid twice as fine.
    pub self_error_rho: f64,
    pub self_error_mass: f64,
}

impl StabilityReport {
    /// Both distances strictly decrease along the rows.
    pub fn is_monotone(&self) -> bool {
        self.rows.windows(2).all(|w| {
            w[1].rho_distance < w[0].rho_distance && w[1].mass_distance < w[0].mass_distance
        })
    }

    /// The last row's distances are below `factor` times the self-error.
    pub fn ends_below_self_error(&self, factor: f64) -> bool {
        self.rows.last().is_some_and(|r| {
            r.rho_distance <= factor * self.self_error_rho && r.mass_distance <= factor * self.self_error_mass
        })
    }

    /// Smallest ratio between consecutive distances (the weaker of the two fields).
    pub fn min_decrease_ratio(&self) -> f64 {
        self.rows
            .windows(2)
            .map(|w| {
                (w[0].rho_distance / w[1].rho_distance).min(w[0].mass_distance / w[1].mass_distance)
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# pathflow-csv v1 stability")?;
        writeln!(out, "delta,rho_distance,mass_distance,self_error_rho,self_error_mass")?;
        for r in &self.rows {
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                r.delta, r.rho_distance, r.mass_distance, self.self_error_rho, self.self_error_mass
            )?;
        }
        Ok(())
    }
}

/// Runs the base data and each perturbed data set on `build(n_cells)`, and
/// the base data on `build(2 n_cells)` for the self-error.
pub fn stability_experiment<B>(
    build: B,
    n_cells: usize,
    m: &FluxModel,
    base: &NetworkData,
    perturbed: &[(f64, NetworkData)],
    horizon: f64,
    opts: &NetworkOptions,
) -> Result<StabilityReport>
where
    B: Fn(usize) -> Network + Sync,
{
    let net = build(n_cells);
    let fine_net = build(2 * n_cells);
    let (base_sol, fine_sol) = rayon::join(
        || solve_network(&net, m, base, horizon, opts),
        || solve_network(&fine_net, m, base, horizon, opts),
    );
    let base_sol = base_sol?;
    let (self_error_rho, self_error_mass) = network_l1_distance(&base_sol, &fine_sol?)?;
    let rows = perturbed
        .par_iter()
        .map(|(delta, data)| {
            let sol = solve_network(&net, m, data, horizon, opts)?;
            let (rho_distance, mass_distance) = network_l1_distance(&base_sol, &sol)?;
            Ok(StabilityRow {
                delta: *delta,
                rho_distance,
                mass_distance,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(StabilityReport {
        n_cells,
        rows,
        self_error_rho,
        self_error_mass,
    })
}

/// Largest spatial variation over the recorded levels of one resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct BvRow {
    pub n_cells: usize,
    /// `(road, max_t TV rho)`.
    pub rho_tv: Vec<(String, f64)>,
    /// `((path, road), max_t TV theta)` over non-vacuum cells.
    pub theta_tv: Vec<((String, String), f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BvReport {
    pub rows: Vec<BvRow>,
    /// `TV rho0 + TV rho_in + |rho0(0+) - rho_in(0+)|` on the source road.
    pub source_bound: f64,
    pub source_road: String,
}

impl BvReport {
    /// Largest `max / min` over resolutions of any entry; entries that stay
    /// below `floor` at every resolution are skipped.
    pub fn max_ratio(&self, floor: f64) -> f64 {
        let mut columns: Vec<Vec<f64>> = Vec::new();
        for row in &self.rows {
            let values = row.rho_tv.iter().map(|e| e.1).chain(row.theta_tv.iter().map(|e| e.1));
            for (i, v) in values.enumerate() {
                if columns.len() <= i {
                    columns.push(Vec::new());
                }
                columns[i].push(v);
            }
        }
        columns
            .iter()
            .filter(|c| c.iter().any(|&v| v >= floor))
            .map(|c| {
                let hi = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lo = c.iter().copied().fold(f64::INFINITY, f64::min);
                if lo > 0.0 {
                    hi / lo
                } else {
                    f64::INFINITY
                }
            })
            .fold(1.0, f64::max)
    }

    pub fn source_tv(&self, row: usize) -> f64 {
        self.rows[row]
            .rho_tv
            .iter()
            .find(|e| e.0 == self.source_road)
            .map(|e| e.1)
            .unwrap_or(0.0)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# pathflow-csv v1 bv-propagation")?;
        writeln!(out, "n_cells,field,path,road,max_tv")?;
        for r in &self.rows {
            for (road, tv) in &r.rho_tv {
                writeln!(out, "{},rho,,{road},{tv:.16e}", r.n_cells)?;
            }
            for ((path, road), tv) in &r.theta_tv {
                writeln!(out, "{},theta,{path},{road},{tv:.16e}", r.n_cells)?;
            }
        }
        Ok(())
    }
}

/// Spatial variation of the fraction over the cells with `rho > eps`.
pub fn theta_variation(rho: &[f64], mass: &[f64], eps: f64) -> f64 {
    let values: Vec<f64> = rho
        .iter()
        .zip(mass)
        .filter_map(|(&r, &m)| theta_value(r, m, eps))
        .collect();
    total_variation(&values)
}

/// Solves on `build(n)` for every `n` in `resolutions` and tabulates the
/// largest spatial variation of every density and fraction over the
/// recorded levels.
pub fn bv_propagation_experiment<B>(
    build: B,
    resolutions: &[usize],
    m: &FluxModel,
    data: &NetworkData,
    horizon: f64,
    opts: &NetworkOptions,
) -> Result<BvReport>
where
    B: Fn(usize) -> Network + Sync,
{
    let rows = resolutions
        .par_iter()
        .map(|&n| {
            let net = build(n);
            let sol = solve_network(&net, m, data, horizon, opts)?;
            let mut rho_tv = Vec::new();
            let mut theta_tv = Vec::new();
            for rs in &sol.roads {
                let id = net.roads[rs.road].id.clone();
                let tv = rs.density.rho.iter().map(|l| total_variation(l)).fold(0.0, f64::max);
                rho_tv.push((id.clone(), tv));
                for (&k, th) in &rs.thetas {
                    let tv = (0..th.mass.len())
                        .map(|l| theta_variation(&th.rho[l], &th.mass[l], sol.vacuum_eps))
                        .fold(0.0, f64::max);
                    theta_tv.push(((net.paths[k].id.clone(), id.clone()), tv));
                }
            }
            Ok(BvRow {
                n_cells: n,
                rho_tv,
                theta_tv,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let net = build(resolutions.first().copied().unwrap_or(2));
    let topo = net.validate().map_err(Error::Validation)?;
    let source = &net.roads[topo.source];
    let rho0 = data
        .rho0
        .get(&source.id)
        .ok_or_else(|| Error::Validation(vec![format!("no initial density on road {}", source.id)]))?;
    let source_bound = rho0.total_variation_on(0.0, source.length)
        + data.rho_in.total_variation_on(0.0, horizon)
        + (rho0.eval(0.0) - data.rho_in.eval(0.0)).abs();
    Ok(BvReport {
        rows,
        source_bound,
        source_road: source.id.clone(),
    })
}

/// Front tracking against the finite-volume scheme on the same piecewise
/// linear flux.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossValidation {
    pub dx: f64,
    pub window: (f64, f64),
    pub horizon: f64,
    /// Exact L1 distance on the window between the two profiles at the horizon.
    pub l1: f64,
    pub n_fronts: usize,
}

/// Evolves `init` exactly and with Godunov on a grid wide enough that the
/// boundaries cannot influence `window` before `horizon`, then integrates
/// `|u_fv - u_exact|` over the window exactly.
pub fn cross_validate_wft_fv(
    init: &StepFunction,
    f: &PiecewiseLinearFlux,
    horizon: f64,
    window: (f64, f64),
    dx: f64,
) -> Result<CrossValidation> {
    let (a, b) = window;
    if !(a < b && dx > 0.0) {
        return Err(Error::Domain(format!("bad window [{a}, {b}] or width {dx}")));
    }
    let exact = evolve(init, f, horizon)?;
    let profile = exact.sample_space_profile(horizon)?.to_piecewise_constant();

    let values = init.values();
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let pad = f.max_wave_speed(lo, hi) * horizon * 1.5 + 10.0 * dx;
    let n = ((b - a + 2.0 * pad) / dx).ceil() as usize;
    let alpha = a - pad;
    let grid = Grid::new(alpha, alpha + n as f64 * dx, n)?;
    let u0 = grid.averages(&init.to_piecewise_constant());
    let fv_opts = FvOptions {
        time_step: TimeStep::Adaptive { cfl: DEFAULT_CFL },
        ..FvOptions::default()
    };
    let sol = solve_fv(f, grid, u0, &Boundary::Extrapolate, &Boundary::Extrapolate, horizon, &fv_opts)?;
    let l1 = l1_cells_vs_step(&grid, sol.final_state(), &profile, a, b);
    Ok(CrossValidation {
        dx: grid.dx,
        window,
        horizon,
        l1,
        n_fronts: exact.fronts().len(),
    })
}

/// `int_a^b |cells(x) - profile(x)| dx`, integrated piece by piece.
pub fn l1_cells_vs_step(grid: &Grid, cells: &[f64], profile: &PiecewiseConstant, a: f64, b: f64) -> f64 {
    let bp = profile.breakpoints();
    let mut total = 0.0;
    for (i, &c) in cells.iter().enumerate() {
        let lo = grid.interface(i).max(a);
        let hi = grid.interface(i + 1).min(b);
        if !(hi > lo) {
            continue;
        }
        let start = bp.partition_point(|&x| x <= lo);
        let end = bp.partition_point(|&x| x < hi);
        let mut left = lo;
        for &x in &bp[start..end] {
            total += (c - profile.eval(0.5 * (left + x))).abs() * (x - left);
            left = x;
        }
        total += (c - profile.eval(0.5 * (left + hi))).abs() * (hi - left);
    }
    total
}
