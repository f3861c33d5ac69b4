//! Boundary traces of both solvers as piecewise-constant functions of time.
//!
//! Flows are stored with their physical (rightward) sign. The inward-normal
//! orientation, which flips the sign at the left end, is applied only by
//! [`distributional_theta_trace`] and [`interior_theta_trace`].

use std::io::Write;

use crate::error::{Error, Result};
use crate::front_tracking::{Domain, FrontTrackingSolution, StepFunction};
use crate::godunov::GridSolution;
use crate::theta::ThetaSolution;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceKind {
    Density,
    Flow,
    /// Flow of the conserved mass `rho theta`.
    ThetaFlow,
}

impl TraceKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            TraceKind::Density => "density",
            TraceKind::Flow => "flow",
            TraceKind::ThetaFlow => "theta_flow",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TraceSide {
    AlphaPlus,
    BetaMinus,
    XMinus(f64),
    XPlus(f64),
}

impl TraceSide {
    pub fn label(&self) -> String {
        match self {
            TraceSide::AlphaPlus => "alpha+".into(),
            TraceSide::BetaMinus => "beta-".into(),
            TraceSide::XMinus(x) => format!("{x}-"),
            TraceSide::XPlus(x) => format!("{x}+"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endpoint {
    Alpha,
    Beta,
}

/// Right-continuous step function of time: `values[k]` holds on
/// `[times[k], times[k+1])`, the last one until `end`.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub end: f64,
    pub kind: TraceKind,
    pub side: TraceSide,
}

impl TraceSeries {
    pub fn new(times: Vec<f64>, values: Vec<f64>, end: f64, kind: TraceKind, side: TraceSide) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return Err(Error::Domain(format!(
                "trace needs matching non-empty times and values, got {} and {}",
                times.len(),
                values.len()
            )));
        }
        if times.windows(2).any(|w| !(w[0] < w[1])) || !(end >= *times.last().unwrap()) {
            return Err(Error::Domain("trace times must increase strictly and end after the last sample".into()));
        }
        Ok(Self {
            times,
            values,
            end,
            kind,
            side,
        })
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn value_at(&self, t: f64) -> f64 {
        let k = self.times.partition_point(|&s| s <= t);
        self.values[k.saturating_sub(1)]
    }

    pub fn total_variation(&self) -> f64 {
        crate::diagnostics::total_variation(&self.values)
    }

    pub fn positive_variation(&self) -> f64 {
        crate::diagnostics::positive_variation(&self.values)
    }

    pub fn integral(&self) -> f64 {
        self.times
            .iter()
            .enumerate()
            .map(|(k, &t)| {
                let next = self.times.get(k + 1).copied().unwrap_or(self.end);
                self.values[k] * (next - t)
            })
            .sum()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v * factor).collect(),
            ..self.clone()
        }
    }

    /// Checks that a flow trace lies in `[0, q_max]` up to `tol`.
    pub fn check_flow_range(&self, q_max: f64, tol: f64) -> Result<()> {
        match self.values.iter().find(|&&v| v < -tol || v > q_max + tol) {
            Some(v) => Err(Error::Domain(format!("flow {v} outside [0, {q_max}]"))),
            None => Ok(()),
        }
    }

    /// Writes `t,value,kind,side` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# pathflow-csv v1 trace")?;
        writeln!(out, "t,value,kind,side")?;
        for (t, v) in self.times.iter().zip(&self.values) {
            writeln!(out, "{t:.16e},{v:.16e},{},{}", self.kind.as_str(), self.side.label())?;
        }
        Ok(())
    }
}

fn series_from_steps(times: &[f64], values: &[f64], end: f64, kind: TraceKind, side: TraceSide) -> TraceSeries {
    if times.is_empty() {
        return TraceSeries::new(vec![0.0], vec![0.0], end, kind, side).expect("single sample");
    }
    TraceSeries::new(times.to_vec(), values.to_vec(), end, kind, side).expect("solver step times increase")
}

/// Flux trace `f(u)` at an endpoint, attained in the strong sense.
pub trait StrongFluxTrace {
    fn strong_flux_trace(&self, end: Endpoint) -> Result<TraceSeries>;
}

impl StrongFluxTrace for GridSolution {
    /// The numerical flux through the boundary interface at every step.
    fn strong_flux_trace(&self, end: Endpoint) -> Result<TraceSeries> {
        let (values, side) = match end {
            Endpoint::Alpha => (&self.left_flux, TraceSide::AlphaPlus),
            Endpoint::Beta => (&self.right_flux, TraceSide::BetaMinus),
        };
        Ok(series_from_steps(&self.step_times, values, self.horizon, TraceKind::Flow, side))
    }
}

impl StrongFluxTrace for FrontTrackingSolution {
    /// `f^nu` of the exact one-sided state at the endpoint.
    fn strong_flux_trace(&self, end: Endpoint) -> Result<TraceSeries> {
        if !matches!(self.domain(), Domain::Interval { .. }) {
            return Err(Error::Domain("endpoint traces need an interval domain".into()));
        }
        let (state, side) = match end {
            Endpoint::Alpha => (self.alpha_trace()?, TraceSide::AlphaPlus),
            Endpoint::Beta => (self.beta_trace()?, TraceSide::BetaMinus),
        };
        Ok(flux_of_step(&state, self, side))
    }
}

fn flux_of_step(state: &StepFunction, sol: &FrontTrackingSolution, side: TraceSide) -> TraceSeries {
    let f = sol.flux();
    let mut times = vec![0.0];
    times.extend(state.breakpoints().iter().copied().filter(|&t| t > 0.0));
    let skip = state.breakpoints().len() + 1 - times.len();
    let values: Vec<f64> = state.indices()[skip..].iter().map(|&j| f.value_at(j)).collect();
    TraceSeries::new(times, values, sol.horizon(), TraceKind::Flow, side).expect("breakpoints increase")
}

/// Mass-flux trace of a transport solution with both conventions.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionalTrace {
    /// Rightward flow through the endpoint.
    pub physical: TraceSeries,
    /// Inward-normal orientation: negated at `alpha+`, unchanged at `beta-`.
    pub oriented: TraceSeries,
}

pub fn distributional_theta_trace(sol: &ThetaSolution, end: Endpoint) -> DistributionalTrace {
    let (values, side, sign) = match end {
        Endpoint::Alpha => (&sol.left_flux, TraceSide::AlphaPlus, -1.0),
        Endpoint::Beta => (&sol.right_flux, TraceSide::BetaMinus, 1.0),
    };
    let physical = series_from_steps(&sol.step_times, values, sol.horizon, TraceKind::ThetaFlow, side);
    let oriented = physical.scaled(sign);
    DistributionalTrace { physical, oriented }
}

/// Oriented mass-flux traces at interior interface `j`, seen from the left
/// subdomain (`d-`) and from the right subdomain (`d+`).
pub fn interior_theta_trace(sol: &ThetaSolution, j: usize) -> Result<(TraceSeries, TraceSeries)> {
    let all = sol
        .interface_fluxes
        .as_ref()
        .ok_or_else(|| Error::Coupling("transport solution did not record interface fluxes".into()))?;
    if j == 0 || j >= sol.grid.n_cells {
        return Err(Error::Domain(format!("interface {j} is not interior")));
    }
    let x = sol.grid.interface(j);
    let q: Vec<f64> = all.iter().map(|f| f[j]).collect();
    let from_left = series_from_steps(&sol.step_times, &q, sol.horizon, TraceKind::ThetaFlow, TraceSide::XMinus(x));
    let mut from_right = from_left.scaled(-1.0);
    from_right.side = TraceSide::XPlus(x);
    Ok((from_left, from_right))
}

/// L1 distance over the common time window, on the merged partition.
pub fn trace_l1_distance(a: &TraceSeries, b: &TraceSeries) -> Result<f64> {
    if a.kind != b.kind {
        return Err(Error::Domain(format!(
            "cannot compare a {} trace with a {} trace",
            a.kind.as_str(),
            b.kind.as_str()
        )));
    }
    let lo = a.start().max(b.start());
    let hi = a.end.min(b.end);
    if !(hi > lo) {
        return Err(Error::Domain("traces do not overlap in time".into()));
    }
    let mut cuts: Vec<f64> = a
        .times
        .iter()
        .chain(&b.times)
        .copied()
        .filter(|&t| t > lo && t < hi)
        .collect();
    cuts.push(lo);
    cuts.push(hi);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    Ok(cuts
        .windows(2)
        .map(|w| (a.value_at(w[0]) - b.value_at(w[0])).abs() * (w[1] - w[0]))
        .sum())
}
