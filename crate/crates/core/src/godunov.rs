//! First-order Godunov finite-volume solver on a uniform grid.

use std::io::Write;

use crate::error::{Error, Result};
use crate::flux::{FluxModel, ScalarFlux};
use crate::series::PiecewiseConstant;

pub const DEFAULT_CFL: f64 = 0.45;
const SPEED_FLOOR: f64 = 1e-12;
/// Slack above `rho*` tolerated when checking free-regime data.
pub const FREE_REGIME_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub alpha: f64,
    pub beta: f64,
    pub n_cells: usize,
    pub dx: f64,
}

impl Grid {
    pub fn new(alpha: f64, beta: f64, n_cells: usize) -> Result<Self> {
        if n_cells < 2 {
            return Err(Error::Domain(format!("grid needs at least 2 cells, got {n_cells}")));
        }
        if !(alpha.is_finite() && beta.is_finite() && alpha < beta) {
            return Err(Error::Domain(format!("invalid grid interval [{alpha}, {beta}]")));
        }
        Ok(Self {
            alpha,
            beta,
            n_cells,
            dx: (beta - alpha) / n_cells as f64,
        })
    }

    pub fn center(&self, i: usize) -> f64 {
        self.alpha + (i as f64 + 0.5) * self.dx
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.n_cells).map(|i| self.center(i)).collect()
    }

    /// Position of interface `j`, between cells `j-1` and `j`.
    pub fn interface(&self, j: usize) -> f64 {
        self.alpha + j as f64 * self.dx
    }

    /// Interface closest to `x`.
    pub fn nearest_interface(&self, x: f64) -> usize {
        (((x - self.alpha) / self.dx).round().max(0.0) as usize).min(self.n_cells)
    }

    /// Cell containing `x` (clamped to the grid).
    pub fn cell_of(&self, x: f64) -> usize {
        (((x - self.alpha) / self.dx).floor().max(0.0) as usize).min(self.n_cells - 1)
    }

    pub fn averages(&self, f: &PiecewiseConstant) -> Vec<f64> {
        f.cell_averages(self.alpha, self.dx, self.n_cells)
    }
}

/// Ghost-cell rule at one end of the grid.
#[derive(Debug, Clone)]
pub enum Boundary {
    /// Zero-order extrapolation of the adjacent interior cell.
    Extrapolate,
    /// Ghost value read from a function of time at the start of each step.
    Dirichlet(PiecewiseConstant),
    /// Ghost value given per step; the solver must take exactly this many steps.
    PerStep(Vec<f64>),
}

impl Boundary {
    fn ghost(&self, step: usize, t: f64, interior: f64) -> Result<f64> {
        match self {
            Boundary::Extrapolate => Ok(interior),
            Boundary::Dirichlet(f) => Ok(f.eval(t)),
            Boundary::PerStep(v) => v.get(step).copied().ok_or_else(|| {
                Error::Coupling(format!("boundary data has {} steps, step {step} requested", v.len()))
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeStep {
    /// `dt = cfl dx / max signal speed`, recomputed every step.
    Adaptive { cfl: f64 },
    /// Steps at `t_n = n dt`; the last one is shortened to land on the horizon.
    Fixed(f64),
}

#[derive(Debug, Clone)]
pub struct FvOptions {
    pub time_step: TimeStep,
    /// Levels recorded besides `t = 0` and the horizon.
    pub output_times: Vec<f64>,
    /// Keep every interface flux of every step (needed to drive transport).
    pub record_interface_fluxes: bool,
    /// Positions whose nearest interface flux and containing cell are
    /// recorded at every step.
    pub probes: Vec<f64>,
}

impl Default for FvOptions {
    fn default() -> Self {
        Self {
            time_step: TimeStep::Adaptive { cfl: DEFAULT_CFL },
            output_times: Vec::new(),
            record_interface_fluxes: false,
            probes: Vec::new(),
        }
    }
}

/// Per-step record at one probe position.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeRecord {
    pub x: f64,
    pub interface: usize,
    pub cell: usize,
    /// Numerical flux through the nearest interface during each step.
    pub flux: Vec<f64>,
    /// Cell value at the start of each step, followed by the final value.
    pub cell_values: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct GridSolution {
    pub grid: Grid,
    pub horizon: f64,
    /// Recorded time levels.
    pub times: Vec<f64>,
    /// Cell averages at each recorded level.
    pub rho: Vec<Vec<f64>>,
    /// Number of completed steps at each recorded level.
    pub recorded_steps: Vec<usize>,
    /// Start time of every step.
    pub step_times: Vec<f64>,
    pub step_dt: Vec<f64>,
    /// Flux through `alpha` during each step.
    pub left_flux: Vec<f64>,
    /// Flux through `beta` during each step.
    pub right_flux: Vec<f64>,
    /// All `n_cells + 1` interface fluxes of each step, when requested.
    pub interface_fluxes: Option<Vec<Vec<f64>>>,
    pub probes: Vec<ProbeRecord>,
    pub initial: Vec<f64>,
}

impl GridSolution {
    pub fn n_steps(&self) -> usize {
        self.step_dt.len()
    }

    pub fn final_state(&self) -> &[f64] {
        self.rho.last().expect("at least the initial level is recorded")
    }

    pub fn mass(&self, level: usize) -> f64 {
        self.rho[level].iter().sum::<f64>() * self.grid.dx
    }

    /// Recorded level at or before `t`.
    pub fn level_at(&self, t: f64) -> usize {
        self.times.partition_point(|&s| s <= t).saturating_sub(1)
    }

    /// Net boundary inflow over the steps before recorded level `level`.
    pub fn boundary_inflow_until(&self, level: usize) -> f64 {
        let n = self.recorded_steps[level];
        (0..n)
            .map(|k| self.step_dt[k] * (self.left_flux[k] - self.right_flux[k]))
            .sum()
    }

    /// Largest relative mismatch between the mass change and the boundary
    /// flux balance over all recorded levels.
    pub fn conservation_error(&self) -> f64 {
        let m0 = self.mass(0);
        (0..self.times.len())
            .map(|l| {
                let lhs = self.mass(l) - m0;
                let rhs = self.boundary_inflow_until(l);
                (lhs - rhs).abs() / m0.abs().max(1.0)
            })
            .fold(0.0, f64::max)
    }

    /// Writes `t,x_center,rho` long-format rows for every recorded level.
    pub fn write_density_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# pathflow-csv v1 density")?;
        writeln!(out, "t,x_center,rho")?;
        for (t, rho) in self.times.iter().zip(&self.rho) {
            for (i, r) in rho.iter().enumerate() {
                writeln!(out, "{t:.16e},{:.16e},{r:.16e}", self.grid.center(i))?;
            }
        }
        Ok(())
    }

    /// Writes `t,flux_left,flux_right` rows, one per step.
    pub fn write_trace_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# pathflow-csv v1 boundary-flux")?;
        writeln!(out, "t,flux_left,flux_right")?;
        for k in 0..self.n_steps() {
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e}",
                self.step_times[k], self.left_flux[k], self.right_flux[k]
            )?;
        }
        Ok(())
    }
}

/// Stable step for the density update alone: `cfl dx / max |f'|` on the
/// attained range, floored at `1e-12` speed and capped at `cap`.
pub fn cfl_dt<F: ScalarFlux + ?Sized>(state: &[f64], flux: &F, dx: f64, cfl: f64, cap: f64) -> f64 {
    let (lo, hi) = min_max(state);
    let speed = flux.max_wave_speed(lo, hi).max(SPEED_FLOOR);
    (cfl * dx / speed).min(cap)
}

/// Like [`cfl_dt`] but bounded by the flux's signal speed, which for traffic
/// models includes the vehicle speed carrying the path fractions.
pub fn transport_cfl_dt<F: ScalarFlux + ?Sized>(
    state: &[f64],
    flux: &F,
    dx: f64,
    cfl: f64,
    cap: f64,
) -> f64 {
    let (lo, hi) = min_max(state);
    let speed = flux.max_signal_speed(lo, hi).max(SPEED_FLOOR);
    (cfl * dx / speed).min(cap)
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)))
}

/// Explicit Godunov scheme for `u_t + f(u)_x = 0` on `grid` up to `horizon`.
pub fn solve_fv<F: ScalarFlux + ?Sized>(
    flux: &F,
    grid: Grid,
    u0: Vec<f64>,
    left: &Boundary,
    right: &Boundary,
    horizon: f64,
    opts: &FvOptions,
) -> Result<GridSolution> {
    if u0.len() != grid.n_cells {
        return Err(Error::Domain(format!(
            "initial datum has {} cells, grid has {}",
            u0.len(),
            grid.n_cells
        )));
    }
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::Domain(format!("horizon must be positive, got {horizon}")));
    }
    let n = grid.n_cells;
    let dx = grid.dx;
    let mut outputs: Vec<f64> = opts
        .output_times
        .iter()
        .copied()
        .filter(|&t| t > 0.0 && t < horizon)
        .collect();
    outputs.sort_by(f64::total_cmp);
    outputs.dedup();
    let fixed_steps = match opts.time_step {
        TimeStep::Fixed(dt) => {
            if !(dt > 0.0) {
                return Err(Error::Domain(format!("time step must be positive, got {dt}")));
            }
            Some(((horizon / dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize)
        }
        TimeStep::Adaptive { cfl } => {
            if !(cfl > 0.0 && cfl <= 1.0) {
                return Err(Error::Domain(format!("cfl must be in (0, 1], got {cfl}")));
            }
            None
        }
    };

    let mut sol = GridSolution {
        grid,
        horizon,
        times: vec![0.0],
        rho: vec![u0.clone()],
        recorded_steps: vec![0],
        step_times: Vec::new(),
        step_dt: Vec::new(),
        left_flux: Vec::new(),
        right_flux: Vec::new(),
        interface_fluxes: opts.record_interface_fluxes.then(Vec::new),
        probes: opts
            .probes
            .iter()
            .map(|&x| ProbeRecord {
                x,
                interface: grid.nearest_interface(x),
                cell: grid.cell_of(x),
                flux: Vec::new(),
                cell_values: Vec::new(),
            })
            .collect(),
        initial: u0.clone(),
    };

    let mut u = u0;
    let mut f = vec![0.0; n + 1];
    let mut t = 0.0;
    let mut step = 0usize;
    let mut next_output = 0usize;
    loop {
        let done = match fixed_steps {
            Some(total) => step >= total,
            None => t >= horizon,
        };
        if done {
            break;
        }
        let ghost_l = left.ghost(step, t, u[0])?;
        let ghost_r = right.ghost(step, t, u[n - 1])?;
        let dt = match opts.time_step {
            TimeStep::Fixed(dt) => {
                let start = step as f64 * dt;
                if step + 1 == fixed_steps.unwrap() {
                    horizon - start
                } else {
                    dt
                }
            }
            TimeStep::Adaptive { cfl } => {
                let (lo, hi) = min_max(&u);
                let (lo, hi) = (lo.min(ghost_l).min(ghost_r), hi.max(ghost_l).max(ghost_r));
                let speed = flux.max_signal_speed(lo, hi).max(SPEED_FLOOR);
                let dt = (cfl * dx / speed).min(horizon - t);
                // avoid a sliver step at the end
                if horizon - (t + dt) < 1e-12 * horizon {
                    horizon - t
                } else {
                    dt
                }
            }
        };
        if let TimeStep::Fixed(h) = opts.time_step {
            t = step as f64 * h;
        }
        // The current level is the last one at or before every output time
        // that this step would pass.
        while next_output < outputs.len() && outputs[next_output] < t + dt {
            if outputs[next_output] >= t {
                record(&mut sol, t, step, &u);
            }
            next_output += 1;
        }
        f[0] = flux.godunov(ghost_l, u[0]);
        for j in 1..n {
            f[j] = flux.godunov(u[j - 1], u[j]);
        }
        f[n] = flux.godunov(u[n - 1], ghost_r);

        for p in sol.probes.iter_mut() {
            p.flux.push(f[p.interface]);
            p.cell_values.push(u[p.cell]);
        }
        sol.step_times.push(t);
        sol.step_dt.push(dt);
        sol.left_flux.push(f[0]);
        sol.right_flux.push(f[n]);
        if let Some(all) = sol.interface_fluxes.as_mut() {
            all.push(f.clone());
        }

        let lambda = dt / dx;
        for j in 0..n {
            u[j] -= lambda * (f[j + 1] - f[j]);
        }
        step += 1;
        t = match opts.time_step {
            TimeStep::Fixed(h) if step < fixed_steps.unwrap() => step as f64 * h,
            TimeStep::Fixed(_) => horizon,
            TimeStep::Adaptive { .. } => {
                if horizon - (t + dt) < 1e-12 * horizon {
                    horizon
                } else {
                    t + dt
                }
            }
        };
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::Internal(format!("non-finite state at t = {t}")));
        }
    }
    for p in sol.probes.iter_mut() {
        p.cell_values.push(u[p.cell]);
    }
    if sol.times.last() != Some(&t) || sol.recorded_steps.last() != Some(&step) {
        record(&mut sol, t, step, &u);
    }
    Ok(sol)
}

fn record(sol: &mut GridSolution, t: f64, step: usize, u: &[f64]) {
    if sol.recorded_steps.last() == Some(&step) {
        return;
    }
    sol.times.push(t);
    sol.recorded_steps.push(step);
    sol.rho.push(u.to_vec());
}

/// Checks that every value of `data` lies in the free regime `[0, rho*]`.
pub fn check_free_regime(what: &str, data: &[f64], m: &FluxModel) -> Result<()> {
    let top = m.critical_density() + FREE_REGIME_TOL;
    match data.iter().position(|&r| !(r >= 0.0 && r <= top)) {
        Some(i) => Err(Error::FreeRegime(format!(
            "{what} value {} at index {i} outside [0, rho* = {}]",
            data[i],
            m.critical_density()
        ))),
        None => Ok(()),
    }
}

/// Density on one road with the inflow datum imposed through the upstream
/// ghost cell and a free outflow downstream. Data must be in the free regime.
pub fn solve_ibvp_fv(
    rho0: &PiecewiseConstant,
    inflow: &PiecewiseConstant,
    m: &FluxModel,
    grid: Grid,
    horizon: f64,
    opts: &FvOptions,
) -> Result<GridSolution> {
    check_free_regime("initial density", rho0.values(), m)?;
    check_free_regime("inflow density", inflow.values(), m)?;
    solve_fv(
        m,
        grid,
        grid.averages(rho0),
        &Boundary::Dirichlet(inflow.clone()),
        &Boundary::Extrapolate,
        horizon,
        opts,
    )
}
