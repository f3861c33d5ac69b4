use std::collections::BTreeMap;
use std::io::Write;

use log::{debug, warn};
use rayon::prelude::*;

use super::{Network, Topology};
use crate::error::{Error, Result};
use crate::flux::{FluxModel, ScalarFlux, FLUX_CLAMP_TOL};
use crate::godunov::{
    check_free_regime, solve_fv, Boundary, FvOptions, Grid, GridSolution, TimeStep, DEFAULT_CFL,
};
use crate::series::PiecewiseConstant;
use crate::theta::{solve_theta, ThetaOptions, ThetaSolution, VacuumRule};

/// Smallest excursion of a junction fraction outside `[0, 1]` counted as a
/// clamp event.
pub const CLAMP_EVENT_TOL: f64 = 1e-12;

/// Tolerance on the sum of the path fractions in the data.
pub const SUM_TO_ONE_TOL: f64 = 1e-9;

/// Initial and source boundary data of a network problem.
#[derive(Debug, Clone, Default)]
pub struct NetworkData {
    /// Initial density per road, as a function of the position in `[0, length]`.
    pub rho0: BTreeMap<String, PiecewiseConstant>,
    /// Initial fraction per `(path, road)`.
    pub theta0: BTreeMap<(String, String), PiecewiseConstant>,
    /// Inflow density on the source road, as a function of time.
    pub rho_in: PiecewiseConstant,
    /// Inflow fraction of each path on the source road.
    pub theta_in: BTreeMap<String, PiecewiseConstant>,
}

#[derive(Debug, Clone)]
pub struct NetworkOptions {
    pub cfl: f64,
    pub output_times: Vec<f64>,
    pub vacuum_rule: VacuumRule,
    /// Multiplies the junction fraction handed to one path before clamping.
    /// A fault injector for checking that the residual diagnostics respond.
    pub theta_boundary_fault: Option<(String, f64)>,
}

impl Default for NetworkOptions {
    fn default() -> Self {
        Self {
            cfl: DEFAULT_CFL,
            output_times: Vec::new(),
            vacuum_rule: VacuumRule::Upwind,
            theta_boundary_fault: None,
        }
    }
}

/// Boundary data assembled at a junction for one outgoing road, per step.
#[derive(Debug, Clone)]
pub struct OutgoingAudit {
    pub road: usize,
    pub paths: Vec<usize>,
    /// Sum of the incoming path flows routed to this road.
    pub demand: Vec<f64>,
    /// Inflow density handed to the road.
    pub rho_bar: Vec<f64>,
    /// Inflow fraction handed to each path in `paths`, per step.
    pub theta_bar: Vec<Vec<f64>>,
    /// Incoming path flows `q_k`, per path in `paths`, per step.
    pub incoming_flows: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct JunctionAudit {
    pub junction: usize,
    pub incoming: usize,
    pub outgoing: Vec<OutgoingAudit>,
    /// Junction fractions that left `[0, 1]` by more than `CLAMP_EVENT_TOL`
    /// before clamping; rounding-level excursions are clamped silently.
    pub clamp_events: usize,
}

#[derive(Debug, Clone)]
pub struct RoadSolution {
    pub road: usize,
    pub density: GridSolution,
    /// Transport solutions of the paths through the road, by path index.
    pub thetas: BTreeMap<usize, ThetaSolution>,
}

#[derive(Debug, Clone)]
pub struct NetworkSolution {
    pub network: Network,
    pub topology: Topology,
    pub model: FluxModel,
    pub dt: f64,
    pub horizon: f64,
    /// Indexed like `network.roads`.
    pub roads: Vec<RoadSolution>,
    /// Indexed like `network.junctions`.
    pub junctions: Vec<JunctionAudit>,
    pub vacuum_eps: f64,
}

/// Checks the data against the network and the model: every road and path
/// has data, densities are in the free regime, fractions in `[0, 1]` and the
/// fractions of the paths sharing a road sum to one.
pub fn validate_data(net: &Network, topo: &Topology, data: &NetworkData, m: &FluxModel) -> Result<()> {
    let mut errs = Vec::new();
    let top = m.critical_density() + crate::godunov::FREE_REGIME_TOL;
    let free = |what: String, f: &PiecewiseConstant, errs: &mut Vec<String>| {
        if f.min() < 0.0 || f.max() > top {
            errs.push(format!(
                "{what}: free-regime bound violated, values in [{}, {}] but rho* = {}",
                f.min(),
                f.max(),
                m.critical_density()
            ));
        }
    };
    free("source inflow density".into(), &data.rho_in, &mut errs);
    for (ri, road) in net.roads.iter().enumerate() {
        match data.rho0.get(&road.id) {
            Some(f) => free(format!("initial density on road {}", road.id), f, &mut errs),
            None => errs.push(format!("road {}: missing initial density", road.id)),
        }
        let mut sum: Option<PiecewiseConstant> = None;
        for &pi in &topo.paths_on_road[ri] {
            let key = (net.paths[pi].id.clone(), road.id.clone());
            match data.theta0.get(&key) {
                Some(f) => {
                    if f.min() < 0.0 || f.max() > 1.0 {
                        errs.push(format!("initial fraction of path {} on road {} outside [0, 1]", key.0, key.1));
                    }
                    sum = Some(match sum {
                        None => f.clone(),
                        Some(s) => s.add(f),
                    });
                }
                None => errs.push(format!("path {} on road {}: missing initial fraction", key.0, key.1)),
            }
        }
        if let Some(s) = sum {
            if s.values().iter().any(|v| (v - 1.0).abs() > SUM_TO_ONE_TOL) {
                errs.push(format!(
                    "road {}: sum-to-one violated by the initial fractions (range [{}, {}])",
                    road.id,
                    s.min(),
                    s.max()
                ));
            }
        }
    }
    let mut sum: Option<PiecewiseConstant> = None;
    for p in &net.paths {
        match data.theta_in.get(&p.id) {
            Some(f) => {
                if f.min() < 0.0 || f.max() > 1.0 {
                    errs.push(format!("inflow fraction of path {} outside [0, 1]", p.id));
                }
                sum = Some(match sum {
                    None => f.clone(),
                    Some(s) => s.add(f),
                });
            }
            None => errs.push(format!("path {}: missing inflow fraction", p.id)),
        }
    }
    if let Some(s) = sum {
        if s.values().iter().any(|v| (v - 1.0).abs() > SUM_TO_ONE_TOL) {
            errs.push(format!(
                "sum-to-one violated by the inflow fractions (range [{}, {}])",
                s.min(),
                s.max()
            ));
        }
    }
    for key in data.theta0.keys() {
        let known = net.path_index(&key.0).zip(net.road_index(&key.1));
        if !matches!(known, Some((p, r)) if topo.paths_on_road[r].contains(&p)) {
            errs.push(format!("initial fraction given for path {} on road {}, which it does not use", key.0, key.1));
        }
    }
    if errs.is_empty() {
        Ok(())
    } else {
        Err(Error::Validation(errs))
    }
}

/// The single time step shared by all roads: `cfl` times the smallest cell
/// width over the largest signal speed on `[0, rho*]`.
pub fn global_time_step(net: &Network, m: &FluxModel, cfl: f64) -> f64 {
    let dx = net
        .roads
        .iter()
        .map(|r| r.length / r.n_cells as f64)
        .fold(f64::INFINITY, f64::min);
    cfl * dx / m.max_signal_speed(0.0, m.critical_density()).max(1e-12)
}

/// Solves the network road by road in upstream-to-downstream order. The
/// flows of the paths leaving a road become the inflow data of the roads
/// after its downstream junction.
pub fn solve_network(
    net: &Network,
    m: &FluxModel,
    data: &NetworkData,
    horizon: f64,
    opts: &NetworkOptions,
) -> Result<NetworkSolution> {
    let topo = net.validate().map_err(Error::Validation)?;
    validate_data(net, &topo, data, m)?;
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::Domain(format!("horizon must be positive, got {horizon}")));
    }
    let dt = global_time_step(net, m, opts.cfl);
    let n_steps = ((horizon / dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    let step_times: Vec<f64> = (0..n_steps).map(|k| k as f64 * dt).collect();
    let theta_opts = ThetaOptions {
        vacuum_rule: opts.vacuum_rule,
        record_interface_fluxes: true,
        ..ThetaOptions::for_rho_max(m.rho_max())
    };
    let fv_opts = FvOptions {
        time_step: TimeStep::Fixed(dt),
        output_times: opts.output_times.clone(),
        record_interface_fluxes: true,
        probes: Vec::new(),
    };
    let fault = match &opts.theta_boundary_fault {
        Some((id, factor)) => Some((
            net.path_index(id)
                .ok_or_else(|| Error::Validation(vec![format!("fault targets unknown path {id}")]))?,
            *factor,
        )),
        None => None,
    };

    let n_roads = net.roads.len();
    let mut inflow_rho: Vec<Option<Vec<f64>>> = vec![None; n_roads];
    let mut inflow_theta: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
    let mut solved: Vec<Option<RoadSolution>> = vec![None; n_roads];
    let mut audits: Vec<Option<JunctionAudit>> = vec![None; net.junctions.len()];

    for &r in &topo.order {
        let road = &net.roads[r];
        let grid = Grid::new(0.0, road.length, road.n_cells)?;
        let rho0 = grid.averages(&data.rho0[&road.id]);
        check_free_regime(&format!("initial density on road {}", road.id), &rho0, m)?;
        let left = match inflow_rho[r].take() {
            Some(v) => Boundary::PerStep(v),
            None => Boundary::Dirichlet(data.rho_in.clone()),
        };
        let density = solve_fv(m, grid, rho0, &left, &Boundary::Extrapolate, horizon, &fv_opts)?;
        if density.n_steps() != n_steps {
            return Err(Error::Internal(format!(
                "road {} took {} steps, expected {n_steps}",
                road.id,
                density.n_steps()
            )));
        }
        let path_list = topo.paths_on_road[r].clone();
        let inputs: Vec<(usize, Vec<f64>, Vec<f64>)> = path_list
            .iter()
            .map(|&p| {
                let theta0 = grid.averages(&data.theta0[&(net.paths[p].id.clone(), road.id.clone())]);
                let theta_in = match inflow_theta.remove(&(p, r)) {
                    Some(v) => v,
                    None => {
                        let f = &data.theta_in[&net.paths[p].id];
                        step_times.iter().map(|&t| f.eval(t)).collect()
                    }
                };
                (p, theta0, theta_in)
            })
            .collect();
        let thetas: Vec<(usize, ThetaSolution)> = inputs
            .into_par_iter()
            .map(|(p, theta0, theta_in)| solve_theta(&density, &theta0, &theta_in, &theta_opts).map(|s| (p, s)))
            .collect::<Result<_>>()?;
        let thetas: BTreeMap<usize, ThetaSolution> = thetas.into_iter().collect();

        if let Some(j) = topo.downstream_junction[r] {
            let junction = &net.junctions[j];
            let mut audit = JunctionAudit {
                junction: j,
                incoming: r,
                outgoing: Vec::new(),
                clamp_events: 0,
            };
            for out_id in &junction.outgoing {
                let o = net.road_index(out_id).expect("validated");
                let paths: Vec<usize> = topo.paths_on_road[o].clone();
                let mut demand = Vec::with_capacity(n_steps);
                let mut rho_bar = Vec::with_capacity(n_steps);
                let mut theta_bar = vec![Vec::with_capacity(n_steps); paths.len()];
                let mut incoming_flows = vec![Vec::with_capacity(n_steps); paths.len()];
                for step in 0..n_steps {
                    let q: Vec<f64> = paths.iter().map(|p| thetas[p].right_flux[step]).collect();
                    let total: f64 = q.iter().sum();
                    if total > m.q_max() + FLUX_CLAMP_TOL {
                        return Err(Error::Congestion {
                            junction: junction.id.clone(),
                            demand: total,
                            capacity: m.q_max(),
                            time: step_times[step],
                        });
                    }
                    let rb = m.invert_flux_free(total.max(0.0))?;
                    let g = m.g(rb);
                    for (k, &qk) in q.iter().enumerate() {
                        let mut th = if g > 0.0 { qk / g } else { 0.0 };
                        if let Some((fp, factor)) = fault {
                            if fp == paths[k] {
                                th *= factor;
                            }
                        }
                        let clamped = th.clamp(0.0, 1.0);
                        if (clamped - th).abs() > CLAMP_EVENT_TOL {
                            audit.clamp_events += 1;
                            debug!("junction {}: fraction {th} clamped at step {step}", junction.id);
                        }
                        theta_bar[k].push(clamped);
                        incoming_flows[k].push(qk);
                    }
                    demand.push(total);
                    rho_bar.push(rb);
                }
                for (k, &p) in paths.iter().enumerate() {
                    inflow_theta.insert((p, o), theta_bar[k].clone());
                }
                inflow_rho[o] = Some(rho_bar.clone());
                audit.outgoing.push(OutgoingAudit {
                    road: o,
                    paths,
                    demand,
                    rho_bar,
                    theta_bar,
                    incoming_flows,
                });
            }
            if audit.clamp_events > 0 {
                debug!("junction {}: {} clamped fractions", junction.id, audit.clamp_events);
            }
            audits[j] = Some(audit);
        }
        solved[r] = Some(RoadSolution {
            road: r,
            density,
            thetas,
        });
    }
    let roads: Vec<RoadSolution> = solved.into_iter().map(|s| s.expect("every road solved")).collect();
    let junctions: Vec<JunctionAudit> = audits
        .into_iter()
        .map(|a| a.expect("every junction has an incoming road"))
        .collect();
    let sol = NetworkSolution {
        network: net.clone(),
        topology: topo,
        model: m.clone(),
        dt,
        horizon,
        roads,
        junctions,
        vacuum_eps: theta_opts.vacuum_eps,
    };
    let (lo, hi) = sol.density_range();
    if lo < 0.0 || hi > m.critical_density() + crate::godunov::FREE_REGIME_TOL {
        warn!("density left the free regime: range [{lo}, {hi}]");
    }
    Ok(sol)
}

impl NetworkSolution {
    fn road(&self, id: &str) -> Result<&RoadSolution> {
        self.network
            .road_index(id)
            .map(|r| &self.roads[r])
            .ok_or_else(|| Error::Domain(format!("unknown road {id}")))
    }

    pub fn road_solution(&self, id: &str) -> Option<&RoadSolution> {
        self.road(id).ok()
    }

    pub fn theta_solution(&self, path: &str, road: &str) -> Option<&ThetaSolution> {
        let p = self.network.path_index(path)?;
        self.road(road).ok()?.thetas.get(&p)
    }

    pub fn n_steps(&self) -> usize {
        self.roads[0].density.n_steps()
    }

    /// Recorded times, shared by all roads.
    pub fn times(&self) -> &[f64] {
        &self.roads[0].density.times
    }

    /// Smallest and largest recorded density over all roads and levels.
    pub fn density_range(&self) -> (f64, f64) {
        self.roads
            .iter()
            .flat_map(|r| r.density.rho.iter().flatten())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)))
    }

    /// Per step: the larger of `|F(d+) - sum_k q_k(d-)|`, the density flux
    /// entering each outgoing road against the path flows leaving the
    /// incoming road, and `|sum_k Q_k(d+) - F(d+)|`, the path flows entering
    /// the outgoing road against its density flux.
    pub fn junction_flux_residual(&self, junction: &str) -> Result<Vec<(f64, f64)>> {
        let j = self
            .network
            .junction_index(junction)
            .ok_or_else(|| Error::Domain(format!("unknown junction {junction}")))?;
        let audit = &self.junctions[j];
        let incoming = &self.roads[audit.incoming];
        let steps = self.n_steps();
        let mut out = Vec::with_capacity(steps);
        for step in 0..steps {
            let mut worst: f64 = 0.0;
            for o in &audit.outgoing {
                let road = &self.roads[o.road];
                let f_out = road.density.left_flux[step];
                let q_in: f64 = o.paths.iter().map(|p| incoming.thetas[p].right_flux[step]).sum();
                let q_out: f64 = o.paths.iter().map(|p| road.thetas[p].left_flux[step]).sum();
                worst = worst.max((f_out - q_in).abs()).max((q_out - f_out).abs());
            }
            out.push((road_step_time(incoming, step), worst));
        }
        Ok(out)
    }

    pub fn max_junction_residual(&self) -> f64 {
        self.network
            .junctions
            .iter()
            .flat_map(|j| self.junction_flux_residual(&j.id).unwrap_or_default())
            .map(|(_, r)| r)
            .fold(0.0, f64::max)
    }

    /// Cellwise `sum_k m_k - rho` on a road at every recorded level; zero on vacuum.
    pub fn sum_to_one_residual(&self, road: &str) -> Result<Vec<Vec<f64>>> {
        let rs = self.road(road)?;
        let levels = rs.density.rho.len();
        Ok((0..levels)
            .map(|l| {
                let rho = &rs.density.rho[l];
                (0..rho.len())
                    .map(|i| {
                        if rho[i] <= self.vacuum_eps {
                            0.0
                        } else {
                            rs.thetas.values().map(|t| t.mass[l][i]).sum::<f64>() - rho[i]
                        }
                    })
                    .collect()
            })
            .collect())
    }

    pub fn max_sum_to_one_residual(&self) -> f64 {
        self.network
            .roads
            .iter()
            .flat_map(|r| self.sum_to_one_residual(&r.id).unwrap_or_default())
            .flatten()
            .map(f64::abs)
            .fold(0.0, f64::max)
    }

    /// Total vehicle count on the network at a recorded level.
    pub fn total_mass(&self, level: usize) -> f64 {
        self.roads.iter().map(|r| r.density.mass(level)).sum()
    }

    /// Largest relative defect of `mass(t) - mass(0) - (source inflow -
    /// destination outflow)` over the recorded levels.
    pub fn mass_balance_error(&self) -> f64 {
        let source = &self.roads[self.topology.source].density;
        let m0 = self.total_mass(0);
        let mut worst: f64 = 0.0;
        for (l, &steps) in source.recorded_steps.iter().enumerate() {
            let inflow: f64 = (0..steps).map(|k| source.step_dt[k] * source.left_flux[k]).sum();
            let outflow: f64 = self
                .roads
                .iter()
                .filter(|r| self.topology.downstream_junction[r.road].is_none())
                .map(|r| (0..steps).map(|k| r.density.step_dt[k] * r.density.right_flux[k]).sum::<f64>())
                .sum();
            let defect = self.total_mass(l) - m0 - (inflow - outflow);
            let scale = (m0 + inflow).abs().max(1.0);
            worst = worst.max(defect.abs() / scale);
        }
        worst
    }

    /// Mass profile of one path glued along its roads: `(x, m)` at cell
    /// centers, with `x` measured from the start of the path.
    pub fn path_mass_profile(&self, path: &str, level: usize) -> Result<Vec<(f64, f64)>> {
        let p = self
            .network
            .path_index(path)
            .ok_or_else(|| Error::Domain(format!("unknown path {path}")))?;
        let mut offset = 0.0;
        let mut out = Vec::new();
        for &r in &self.topology.paths[p] {
            let th = &self.roads[r].thetas[&p];
            for i in 0..th.grid.n_cells {
                out.push((offset + th.grid.center(i), th.mass[level][i]));
            }
            offset += self.network.roads[r].length;
        }
        Ok(out)
    }

    /// Writes `junction,road,path,t,demand,rho_bar,q_in,theta_bar` rows.
    pub fn write_junction_audit_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# pathflow-csv v1 junction-audit")?;
        writeln!(out, "junction,road,path,t,demand,rho_bar,q_in,theta_bar")?;
        for a in &self.junctions {
            let jid = &self.network.junctions[a.junction].id;
            let times = &self.roads[a.incoming].density.step_times;
            for o in &a.outgoing {
                let rid = &self.network.roads[o.road].id;
                for (k, &p) in o.paths.iter().enumerate() {
                    let pid = &self.network.paths[p].id;
                    for step in 0..o.demand.len() {
                        writeln!(
                            out,
                            "{jid},{rid},{pid},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                            times[step],
                            o.demand[step],
                            o.rho_bar[step],
                            o.incoming_flows[k][step],
                            o.theta_bar[k][step]
                        )?;
                    }
                }
            }
        }
        Ok(())
    }
}

fn road_step_time(r: &RoadSolution, step: usize) -> f64 {
    r.density.step_times[step]
}
