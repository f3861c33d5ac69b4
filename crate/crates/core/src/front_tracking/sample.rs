use std::io::Write;

use super::{Domain, FrontTrackingSolution, StepFunction};
use crate::error::{Error, Result};
use crate::traces::{TraceKind, TraceSeries, TraceSide};

/// Interaction points closer than this to the probe (relative to the domain
/// length) trigger a nudge.
const COINCIDENCE_TOL: f64 = 1e-13;
const NUDGE: f64 = 1e-9;
/// Crossing times closer than this are treated as one instant.
const CROSSING_MERGE: f64 = 1e-13;

/// One-sided time traces `u(., x-)` and `u(., x+)` of a front-tracking
/// solution, as step functions of time on `[0, horizon]`.
#[derive(Debug, Clone)]
pub struct TimeTrace {
    /// The position asked for.
    pub requested_x: f64,
    /// The position actually sampled; differs from `requested_x` when nudged.
    pub x: f64,
    /// Set when the requested position hit an interaction point.
    pub nudged: bool,
    pub horizon: f64,
    pub left: StepFunction,
    pub right: StepFunction,
}

impl TimeTrace {
    pub fn total_variation_left(&self) -> f64 {
        self.left.total_variation()
    }

    pub fn total_variation_right(&self) -> f64 {
        self.right.total_variation()
    }

    /// Larger of the two one-sided variations, in lattice units.
    pub fn variation_index(&self) -> i64 {
        self.left.variation_index().max(self.right.variation_index())
    }

    /// Density trace on the chosen side as a [`TraceSeries`].
    pub fn density_series(&self, right_side: bool) -> TraceSeries {
        let (trace, side) = if right_side {
            (&self.right, TraceSide::XPlus(self.x))
        } else {
            (&self.left, TraceSide::XMinus(self.x))
        };
        step_to_series(trace, self.horizon, TraceKind::Density, side)
    }
}

fn step_to_series(s: &StepFunction, horizon: f64, kind: TraceKind, side: TraceSide) -> TraceSeries {
    let mut times = vec![0.0];
    let mut values = vec![s.eval(0.0)];
    for (&t, v) in s.breakpoints().iter().zip(s.values().into_iter().skip(1)) {
        if t > 0.0 && t < horizon {
            times.push(t);
            values.push(v);
        } else if t <= 0.0 {
            values[0] = v;
        }
    }
    TraceSeries::new(times, values, horizon, kind, side).expect("step breakpoints are increasing")
}

impl FrontTrackingSolution {
    /// Exact profile `u(t, .)`.
    pub fn sample_space_profile(&self, t: f64) -> Result<StepFunction> {
        if !(0.0..=self.horizon).contains(&t) {
            return Err(Error::Domain(format!("time {t} outside [0, {}]", self.horizon)));
        }
        let mut alive: Vec<(f64, f64, i64, i64)> = self
            .fronts_alive_at(t)
            .map(|f| (f.position(t), f.speed, f.left, f.right))
            .collect();
        alive.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        let (lo, hi) = match self.domain {
            Domain::Line => (f64::NEG_INFINITY, f64::INFINITY),
            Domain::Interval { alpha, beta } => (alpha, beta),
        };
        let mut breakpoints: Vec<f64> = Vec::new();
        let mut values = vec![self.left_state_at(t)];
        for (x, _, _, right) in alive {
            if x >= hi {
                break;
            }
            let last = values.len() - 1;
            if x <= lo || breakpoints.last() == Some(&x) {
                values[last] = right;
            } else {
                breakpoints.push(x);
                values.push(right);
            }
        }
        let mut profile = StepFunction::new(self.flux.level(), breakpoints, values)?;
        if let Domain::Interval { alpha, beta } = self.domain {
            profile = profile.restrict(alpha, beta);
        }
        Ok(profile)
    }

    /// Value of the solution just left (`right_side == false`) or just right
    /// of `x` at time `t`, read off the front positions.
    fn state_near(&self, t: f64, x: f64, right_side: bool) -> i64 {
        let mut best: Option<(f64, f64, i64)> = None;
        for f in self.fronts_alive_at(t) {
            let p = f.position(t);
            let admissible = if right_side { p <= x } else { p < x };
            if !admissible {
                continue;
            }
            let better = match best {
                None => true,
                Some((bp, bs, _)) => p > bp || (p == bp && f.speed > bs),
            };
            if better {
                best = Some((p, f.speed, f.right));
            }
        }
        match best {
            Some((_, _, right)) => right,
            None => self.left_state_at(t),
        }
    }

    fn hits_interaction(&self, x: f64) -> bool {
        let tol = COINCIDENCE_TOL * self.length_scale();
        self.interactions.iter().any(|&(t, p)| t > 0.0 && (p - x).abs() <= tol)
            || self
                .fronts
                .iter()
                .any(|f| f.speed == 0.0 && (f.birth_position - x).abs() <= tol)
    }

    /// One-sided time traces at an interior point `x`.
    ///
    /// If `x` coincides with an interaction point or a stationary front, the
    /// probe is moved by a relative `1e-9` of the domain length and the
    /// `nudged` flag is set.
    pub fn sample_time_trace(&self, x: f64) -> Result<TimeTrace> {
        if let Domain::Interval { alpha, beta } = self.domain {
            if !(x > alpha && x < beta) {
                return Err(Error::Domain(format!("probe {x} not inside ({alpha}, {beta})")));
            }
        }
        let scale = self.length_scale();
        let mut probe = x;
        let mut nudged = false;
        let mut k = 1.0;
        while self.hits_interaction(probe) {
            nudged = true;
            let step = k * NUDGE * scale;
            probe = if (k as i64) % 2 == 1 { x + step } else { x - step };
            k += 1.0;
            if k > 64.0 {
                return Err(Error::Internal(format!("could not place a clean probe near {x}")));
            }
        }
        let crossings = self.crossing_times(probe);
        let level = self.flux.level();
        let mut starts = vec![0.0];
        starts.extend(crossings);
        let mut left_vals = Vec::with_capacity(starts.len());
        let mut right_vals = Vec::with_capacity(starts.len());
        for (i, &a) in starts.iter().enumerate() {
            let b = starts.get(i + 1).copied().unwrap_or(self.horizon);
            let mid = 0.5 * (a + b);
            left_vals.push(self.state_near(mid, probe, false));
            right_vals.push(self.state_near(mid, probe, true));
        }
        let bps: Vec<f64> = starts[1..].to_vec();
        Ok(TimeTrace {
            requested_x: x,
            x: probe,
            nudged,
            horizon: self.horizon,
            left: StepFunction::new(level, bps.clone(), left_vals)?,
            right: StepFunction::new(level, bps, right_vals)?,
        })
    }

    /// Sorted instants in `(0, horizon)` at which some front passes `x`.
    fn crossing_times(&self, x: f64) -> Vec<f64> {
        let mut times: Vec<f64> = Vec::new();
        for f in &self.fronts {
            if f.speed == 0.0 {
                continue;
            }
            let tc = f.birth_time + (x - f.birth_position) / f.speed;
            let end = f.death_time.min(self.horizon);
            if tc >= f.birth_time - CROSSING_MERGE && tc <= end + CROSSING_MERGE && tc > 0.0 && tc < self.horizon {
                times.push(tc);
            }
        }
        times.sort_by(f64::total_cmp);
        let mut merged: Vec<f64> = Vec::with_capacity(times.len());
        for t in times {
            match merged.last() {
                Some(&last) if t - last <= CROSSING_MERGE => {}
                _ => merged.push(t),
            }
        }
        merged
    }

    /// The state `u(., alpha+)` on an interval domain as a step function of time.
    pub fn alpha_trace(&self) -> Result<StepFunction> {
        if !matches!(self.domain, Domain::Interval { .. }) {
            return Err(Error::Domain("alpha trace needs an interval domain".into()));
        }
        let bps: Vec<f64> = self.left_states.iter().skip(1).map(|s| s.0).collect();
        let mut points = Vec::new();
        let mut values = vec![self.left_states[0].1];
        for (t, v) in bps.into_iter().zip(self.left_states.iter().skip(1).map(|s| s.1)) {
            if t <= 0.0 {
                values[0] = v;
            } else if points.last() == Some(&t) {
                *values.last_mut().unwrap() = v;
            } else {
                points.push(t);
                values.push(v);
            }
        }
        StepFunction::new(self.flux.level(), points, values)
    }

    /// The state `u(., beta-)` on an interval domain as a step function of time.
    pub fn beta_trace(&self) -> Result<StepFunction> {
        let Domain::Interval { beta, .. } = self.domain else {
            return Err(Error::Domain("beta trace needs an interval domain".into()));
        };
        let mut starts = vec![0.0];
        starts.extend(self.crossing_times(beta));
        let values: Vec<i64> = starts
            .iter()
            .enumerate()
            .map(|(i, &a)| {
                let b = starts.get(i + 1).copied().unwrap_or(self.horizon);
                self.state_near(0.5 * (a + b), beta, false)
            })
            .collect();
        StepFunction::new(self.flux.level(), starts[1..].to_vec(), values)
    }

    /// Writes `time,position,left,right,speed` for every front birth.
    pub fn write_events_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# pathflow-csv v1 fronts")?;
        writeln!(out, "time,position,left,right,speed")?;
        let h = self.flux.step();
        for f in &self.fronts {
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                f.birth_time,
                f.birth_position,
                f.left as f64 * h,
                f.right as f64 * h,
                f.speed
            )?;
        }
        Ok(())
    }

    /// Writes the exact profiles at `times` as `t,x,u` rows, one per
    /// breakpoint, plus the leftmost state at `x = -inf` or `alpha`.
    pub fn write_profiles_csv<W: Write>(&self, times: &[f64], mut out: W) -> Result<()> {
        writeln!(out, "# pathflow-csv v1 profiles")?;
        writeln!(out, "t,x,u")?;
        for &t in times {
            let p = self.sample_space_profile(t)?;
            let x0 = match self.domain {
                Domain::Line => f64::NEG_INFINITY,
                Domain::Interval { alpha, .. } => alpha,
            };
            let vals = p.values();
            writeln!(out, "{t:.16e},{x0:.16e},{:.16e}", vals[0])?;
            for (x, u) in p.breakpoints().iter().zip(vals.iter().skip(1)) {
                writeln!(out, "{t:.16e},{x:.16e},{u:.16e}")?;
            }
        }
        Ok(())
    }
}
