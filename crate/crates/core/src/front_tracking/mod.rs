//! Exact wave front-tracking for `u_t + f(u)_x = 0` with a piecewise-affine
//! flux on a dyadic lattice.
//!
//! States are stored as lattice indices, so every front speed is the exact
//! chord slope between two tabulated flux values. Positions are floating
//! point.

mod riemann;
mod sample;
mod solver;

pub use riemann::{solve_riemann_pl, Wave};
pub use sample::TimeTrace;
pub use solver::{evolve, solve_ibvp_ft};

use crate::error::{Error, Result};
use crate::flux::PiecewiseLinearFlux;
use crate::series::PiecewiseConstant;

/// Two events closer than this in time are simultaneous.
pub const TIME_TOL: f64 = 1e-13;

/// Piecewise-constant function with values on the lattice `2^-level Z`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFunction {
    level: u32,
    breakpoints: Vec<f64>,
    values: Vec<i64>,
}

impl StepFunction {
    /// Builds a step function from lattice indices, dropping zero-strength jumps.
    pub fn new(level: u32, breakpoints: Vec<f64>, values: Vec<i64>) -> Result<Self> {
        if values.len() != breakpoints.len() + 1 {
            return Err(Error::Domain(format!(
                "step function needs {} values, got {}",
                breakpoints.len() + 1,
                values.len()
            )));
        }
        if breakpoints.windows(2).any(|w| !(w[0] < w[1])) || breakpoints.iter().any(|b| !b.is_finite()) {
            return Err(Error::Domain("step breakpoints must be finite and strictly increasing".into()));
        }
        let mut bp = Vec::with_capacity(breakpoints.len());
        let mut vals = Vec::with_capacity(values.len());
        vals.push(values[0]);
        for (x, v) in breakpoints.into_iter().zip(values.into_iter().skip(1)) {
            if *vals.last().unwrap() != v {
                bp.push(x);
                vals.push(v);
            }
        }
        Ok(Self {
            level,
            breakpoints: bp,
            values: vals,
        })
    }

    pub fn constant(level: u32, index: i64) -> Self {
        Self {
            level,
            breakpoints: Vec::new(),
            values: vec![index],
        }
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn step(&self) -> f64 {
        2f64.powi(-(self.level as i32))
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    /// Lattice indices; value `k` holds between breakpoints `k-1` and `k`.
    pub fn indices(&self) -> &[i64] {
        &self.values
    }

    pub fn values(&self) -> Vec<f64> {
        let h = self.step();
        self.values.iter().map(|&j| j as f64 * h).collect()
    }

    pub fn index_at(&self, x: f64) -> i64 {
        self.values[self.breakpoints.partition_point(|&b| b <= x)]
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.index_at(x) as f64 * self.step()
    }

    pub fn index_range(&self) -> (i64, i64) {
        let lo = *self.values.iter().min().unwrap();
        let hi = *self.values.iter().max().unwrap();
        (lo, hi)
    }

    /// Total variation in lattice units.
    pub fn variation_index(&self) -> i64 {
        self.values.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
    }

    pub fn total_variation(&self) -> f64 {
        self.variation_index() as f64 * self.step()
    }

    /// Restriction to `(a, b)`: breakpoints outside are dropped.
    pub fn restrict(&self, a: f64, b: f64) -> Self {
        let lo = self.breakpoints.partition_point(|&x| x <= a);
        let hi = self.breakpoints.partition_point(|&x| x < b);
        Self {
            level: self.level,
            breakpoints: self.breakpoints[lo..hi].to_vec(),
            values: self.values[lo..=hi].to_vec(),
        }
    }

    pub fn to_piecewise_constant(&self) -> PiecewiseConstant {
        PiecewiseConstant::new(self.breakpoints.clone(), self.values())
            .expect("step function invariants imply a valid piecewise-constant function")
    }

    /// Exact integral over `[a, b]`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        self.to_piecewise_constant().integral(a, b)
    }
}

/// Rounds a real value to the nearest lattice index, ties toward zero.
pub fn round_to_lattice(u: f64, level: u32) -> i64 {
    let scaled = u * 2f64.powi(level as i32);
    let magnitude = scaled.abs();
    let floor = magnitude.floor();
    let rounded = if magnitude - floor > 0.5 { floor + 1.0 } else { floor };
    (rounded as i64) * if scaled < 0.0 { -1 } else { 1 }
}

/// Projects a piecewise-constant datum onto `2^-level Z`, merging equal
/// neighbours.
pub fn quantize_datum(u0: &PiecewiseConstant, level: u32) -> StepFunction {
    let values = u0
        .values()
        .iter()
        .map(|&u| round_to_lattice(u, level))
        .collect();
    StepFunction::new(level, u0.breakpoints().to_vec(), values)
        .expect("breakpoints of a valid piecewise-constant function")
}

/// Spatial domain of a front-tracking problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    Line,
    Interval { alpha: f64, beta: f64 },
}

/// A front's whole life: it moves on a straight line from its birth until it
/// is absorbed in a collision, leaves the domain, or the horizon is reached
/// (`death_time == INFINITY`).
#[derive(Debug, Clone, PartialEq)]
pub struct Front {
    pub birth_time: f64,
    pub birth_position: f64,
    pub speed: f64,
    pub left: i64,
    pub right: i64,
    pub death_time: f64,
}

impl Front {
    pub fn position(&self, t: f64) -> f64 {
        self.birth_position + self.speed * (t - self.birth_time)
    }

    pub fn alive_at(&self, t: f64) -> bool {
        self.birth_time <= t && t < self.death_time
    }
}

/// Event history of a front-tracking run.
#[derive(Debug, Clone)]
pub struct FrontTrackingSolution {
    pub(crate) flux: PiecewiseLinearFlux,
    pub(crate) domain: Domain,
    pub(crate) horizon: f64,
    pub(crate) initial: StepFunction,
    pub(crate) fronts: Vec<Front>,
    pub(crate) event_times: Vec<f64>,
    /// State at the left end of the domain after each change: the far-left
    /// state on the line, the `alpha+` trace on an interval.
    pub(crate) left_states: Vec<(f64, i64)>,
    pub(crate) interactions: Vec<(f64, f64)>,
    pub(crate) inflow: Option<StepFunction>,
}

impl FrontTrackingSolution {
    pub fn flux(&self) -> &PiecewiseLinearFlux {
        &self.flux
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn initial(&self) -> &StepFunction {
        &self.initial
    }

    pub fn inflow(&self) -> Option<&StepFunction> {
        self.inflow.as_ref()
    }

    pub fn fronts(&self) -> &[Front] {
        &self.fronts
    }

    /// Times at which fronts interacted, entered or left, in order.
    pub fn event_times(&self) -> &[f64] {
        &self.event_times
    }

    /// Points `(t, x)` where Riemann problems were solved, initial jumps included.
    pub fn interactions(&self) -> &[(f64, f64)] {
        &self.interactions
    }

    pub fn fronts_alive_at(&self, t: f64) -> impl Iterator<Item = &Front> {
        self.fronts.iter().filter(move |f| f.alive_at(t))
    }

    pub(crate) fn left_state_at(&self, t: f64) -> i64 {
        let k = self.left_states.partition_point(|&(s, _)| s <= t);
        self.left_states[k.saturating_sub(1)].1
    }

    /// Length scale used for position tolerances.
    pub(crate) fn length_scale(&self) -> f64 {
        match self.domain {
            Domain::Interval { alpha, beta } => beta - alpha,
            Domain::Line => {
                let bp = self.initial.breakpoints();
                match (bp.first(), bp.last()) {
                    (Some(a), Some(b)) => (b - a).max(1.0),
                    _ => 1.0,
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_ties_toward_zero() {
        assert_eq!(round_to_lattice(0.3, 2), 1);
        assert_eq!(round_to_lattice(0.125, 2), 0);
        assert_eq!(round_to_lattice(-0.125, 2), 0);
        assert_eq!(round_to_lattice(0.375, 2), 1);
        assert_eq!(round_to_lattice(-0.375, 2), -1);
        assert_eq!(round_to_lattice(-0.4, 2), -2);
    }

    #[test]
    fn quantize_examples() {
        let c = PiecewiseConstant::constant(0.75);
        let q = quantize_datum(&c, 2);
        assert_eq!(q.indices(), &[3]);
        assert!(q.breakpoints().is_empty());

        let step = PiecewiseConstant::new(vec![0.0], vec![0.0, 0.3]).unwrap();
        let q = quantize_datum(&step, 2);
        assert_eq!(q.values(), vec![0.0, 0.25]);

        let riemann = PiecewiseConstant::new(vec![0.0], vec![-1.0, 1.0]).unwrap();
        for level in 1..8 {
            assert_eq!(quantize_datum(&riemann, level).values(), vec![-1.0, 1.0]);
        }
    }

    #[test]
    fn quantize_merges_equal_neighbours_and_bounds_tv() {
        let u0 = PiecewiseConstant::new(vec![0.0, 1.0, 2.0], vec![0.0, 0.26, 0.24, 0.9]).unwrap();
        let q = quantize_datum(&u0, 2);
        assert_eq!(q.breakpoints(), &[0.0, 2.0]);
        let jumps = u0.breakpoints().len() as f64;
        assert!(q.total_variation() <= u0.total_variation() + 0.25 * jumps);
    }

    #[test]
    fn step_function_restrict() {
        let s = StepFunction::new(3, vec![0.0, 1.0, 2.0], vec![0, 1, 2, 3]).unwrap();
        let r = s.restrict(0.5, 1.5);
        assert_eq!(r.indices(), &[1, 2]);
        assert_eq!(r.breakpoints(), &[1.0]);
        assert_eq!(s.variation_index(), 3);
    }
}
