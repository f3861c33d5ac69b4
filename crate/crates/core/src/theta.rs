//! Upwind transport of the path fraction `theta` through the conserved mass
//! `m = rho theta`, slaved to the time steps and interface fluxes of a
//! density solution.

use std::io::Write;

use crate::error::{Error, Result};
use crate::godunov::{Grid, GridSolution};

/// How the fraction carried out of a vacuum cell is chosen. Any choice
/// transports the same mass up to the vacuum threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VacuumRule {
    /// Fraction of the nearest non-vacuum upwind cell, else the inflow fraction.
    #[default]
    Upwind,
    /// Vacuum cells carry no mass.
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaOptions {
    /// Cells with `rho <= vacuum_eps` are vacuum.
    pub vacuum_eps: f64,
    pub vacuum_rule: VacuumRule,
    pub record_interface_fluxes: bool,
}

impl ThetaOptions {
    /// Defaults with the vacuum threshold `1e-10 rho_max`.
    pub fn for_rho_max(rho_max: f64) -> Self {
        Self {
            vacuum_eps: 1e-10 * rho_max,
            vacuum_rule: VacuumRule::Upwind,
            record_interface_fluxes: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ThetaSolution {
    pub grid: Grid,
    pub horizon: f64,
    pub times: Vec<f64>,
    /// Density at the recorded levels, rebuilt from the drive's fluxes.
    pub rho: Vec<Vec<f64>>,
    /// Conserved `m = rho theta` at the recorded levels.
    pub mass: Vec<Vec<f64>>,
    pub step_times: Vec<f64>,
    pub step_dt: Vec<f64>,
    /// Mass flux through `alpha` during each step.
    pub left_flux: Vec<f64>,
    /// Mass flux through `beta` during each step.
    pub right_flux: Vec<f64>,
    pub interface_fluxes: Option<Vec<Vec<f64>>>,
    pub vacuum_eps: f64,
}

/// `m / rho` clamped to `[0, 1]`, or `None` on vacuum.
pub fn theta_value(rho: f64, m: f64, vacuum_eps: f64) -> Option<f64> {
    (rho > vacuum_eps).then(|| (m / rho).clamp(0.0, 1.0))
}

impl ThetaSolution {
    /// Fraction at the recorded level at or before `t`, in the cell holding `x`.
    pub fn theta_of(&self, t: f64, x: f64) -> Option<f64> {
        let level = self.times.partition_point(|&s| s <= t).saturating_sub(1);
        let i = self.grid.cell_of(x);
        theta_value(self.rho[level][i], self.mass[level][i], self.vacuum_eps)
    }

    /// Fraction field at a recorded level; vacuum cells are `None`.
    pub fn theta_level(&self, level: usize) -> Vec<Option<f64>> {
        self.rho[level]
            .iter()
            .zip(&self.mass[level])
            .map(|(&r, &m)| theta_value(r, m, self.vacuum_eps))
            .collect()
    }

    pub fn total_mass(&self, level: usize) -> f64 {
        self.mass[level].iter().sum::<f64>() * self.grid.dx
    }

    /// Writes `t,x_center,rho,m,theta` rows; `theta` is `nan` on vacuum.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# pathflow-csv v1 theta")?;
        writeln!(out, "t,x_center,rho,m,theta")?;
        for (l, &t) in self.times.iter().enumerate() {
            for i in 0..self.grid.n_cells {
                let (r, m) = (self.rho[l][i], self.mass[l][i]);
                let th = theta_value(r, m, self.vacuum_eps).unwrap_or(f64::NAN);
                writeln!(out, "{t:.16e},{:.16e},{r:.16e},{m:.16e},{th:.16e}", self.grid.center(i))?;
            }
        }
        Ok(())
    }
}

/// Transports `theta0` (cell values) with inflow fraction `theta_in[n]`
/// during step `n` of `drive`.
pub fn solve_theta(
    drive: &GridSolution,
    theta0: &[f64],
    theta_in: &[f64],
    opts: &ThetaOptions,
) -> Result<ThetaSolution> {
    let grid = drive.grid;
    let n = grid.n_cells;
    let fluxes = drive
        .interface_fluxes
        .as_ref()
        .ok_or_else(|| Error::Coupling("density solution did not record interface fluxes".into()))?;
    if theta0.len() != n {
        return Err(Error::Coupling(format!(
            "initial fraction has {} cells, grid has {n}",
            theta0.len()
        )));
    }
    let steps = drive.n_steps();
    if theta_in.len() < steps {
        return Err(Error::Coupling(format!(
            "inflow fraction has {} steps, density solution took {steps}",
            theta_in.len()
        )));
    }
    if let Some(v) = theta0.iter().chain(&theta_in[..steps]).find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::Domain(format!("fraction {v} outside [0, 1]")));
    }

    let eps = opts.vacuum_eps;
    let mut rho = drive.initial.clone();
    let mut mass: Vec<f64> = rho.iter().zip(theta0).map(|(r, th)| r * th).collect();
    let mut sol = ThetaSolution {
        grid,
        horizon: drive.horizon,
        times: vec![0.0],
        rho: vec![rho.clone()],
        mass: vec![mass.clone()],
        step_times: drive.step_times.clone(),
        step_dt: drive.step_dt.clone(),
        left_flux: Vec::with_capacity(steps),
        right_flux: Vec::with_capacity(steps),
        interface_fluxes: opts.record_interface_fluxes.then(Vec::new),
        vacuum_eps: eps,
    };
    let mut next_record = 1usize;
    let mut upwind = vec![0.0; n];
    let mut q = vec![0.0; n + 1];
    for step in 0..steps {
        let f = &fluxes[step];
        if let Some(j) = f.iter().position(|&v| v < 0.0) {
            return Err(Error::UnsupportedRegime(format!(
                "negative density flux {} at interface {j}, step {step}",
                f[j]
            )));
        }
        let inflow_theta = theta_in[step];
        let mut carried = inflow_theta;
        for i in 0..n {
            upwind[i] = match theta_value(rho[i], mass[i], eps) {
                Some(th) => {
                    carried = th;
                    th
                }
                None => match opts.vacuum_rule {
                    VacuumRule::Upwind => carried,
                    VacuumRule::Zero => 0.0,
                },
            };
        }
        q[0] = f[0] * inflow_theta;
        for j in 1..=n {
            q[j] = f[j] * upwind[j - 1];
        }
        sol.left_flux.push(q[0]);
        sol.right_flux.push(q[n]);
        if let Some(all) = sol.interface_fluxes.as_mut() {
            all.push(q.clone());
        }
        // Same update formula as the density solver, so `rho` is reproduced
        // bit for bit.
        let lambda = drive.step_dt[step] / grid.dx;
        for j in 0..n {
            rho[j] -= lambda * (f[j + 1] - f[j]);
            mass[j] -= lambda * (q[j + 1] - q[j]);
        }
        while next_record < drive.recorded_steps.len() && drive.recorded_steps[next_record] == step + 1 {
            sol.times.push(drive.times[next_record]);
            sol.rho.push(rho.clone());
            sol.mass.push(mass.clone());
            next_record += 1;
        }
    }
    Ok(sol)
}
