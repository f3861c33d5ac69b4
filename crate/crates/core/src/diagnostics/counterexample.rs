//! Closed-form Burgers solution whose shock curve wiggles around `x = 0`
//! faster and faster as `t` approaches `1/8`. The time trace `u(., 0)` then
//! has total variation growing with the number of wiggles, while the flux
//! trace `u(., 0)^2` and the initial datum stay of bounded variation.
//!
//! The shock is `x = gamma(t)`, with `u = -1` on its right. On its left the
//! solution is carried by straight characteristics of speed `2u` that reach
//! the shock at time `t'` with the value `u_- = 1 + gamma'(t')` fixed by
//! Rankine-Hugoniot.

use std::ops::RangeInclusive;

use super::tv::{total_variation, TvReport};
use crate::error::{Error, Result};
use crate::flux::Burgers;
use crate::godunov::{solve_fv, Boundary, FvOptions, Grid};
use crate::series::PiecewiseConstant;

const FIRST_BLOCK: usize = 3;
const BISECTION_TOL: f64 = 1e-12;

/// Shock-curve segment `t^3/(2 eps) - 3t^2/2 + eps t` on `[0, eps]`, with its
/// first and second derivatives.
pub fn gamma_hat(eps: f64, t: f64) -> (f64, f64, f64) {
    let value = t * t * t / (2.0 * eps) - 1.5 * t * t + eps * t;
    let slope = 1.5 * t * t / eps - 3.0 * t + eps;
    let curvature = 3.0 * t / eps - 3.0;
    (value, slope, curvature)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CounterexampleSpec {
    n_blocks: usize,
    horizon: f64,
    r: f64,
}

impl CounterexampleSpec {
    /// Uses the blocks `n = 3 ..= 2 + n_blocks`.
    pub fn new(n_blocks: usize) -> Result<Self> {
        if !(1..=40).contains(&n_blocks) {
            return Err(Error::Domain(format!("n_blocks must be in 1..=40, got {n_blocks}")));
        }
        let horizon = 0.125 - 2f64.powi(-((FIRST_BLOCK + n_blocks) as i32));
        let mut spec = Self {
            n_blocks,
            horizon,
            r: 0.0,
        };
        spec.r = -spec.xi(horizon, 0.0);
        Ok(spec)
    }

    pub fn n_blocks(&self) -> usize {
        self.n_blocks
    }

    /// End of the last block, `1/8 - 2^-(3 + n_blocks)`.
    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Left end `-r` of the nonconstant part of the initial datum.
    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn blocks(&self) -> RangeInclusive<usize> {
        FIRST_BLOCK..=FIRST_BLOCK - 1 + self.n_blocks
    }

    pub fn epsilon(n: usize) -> f64 {
        2f64.powi(-(n as i32 + 1))
    }

    /// Start of block `n`.
    pub fn tau(n: usize) -> f64 {
        0.125 - 2f64.powi(-(n as i32))
    }

    /// Midpoint of block `n`, where the shock is farthest from `x = 0`.
    pub fn sigma(n: usize) -> f64 {
        0.125 - 1.5 * 2f64.powi(-(n as i32 + 1))
    }

    /// Block containing `t`, with `t = horizon` assigned to the last block.
    fn block_of(&self, t: f64) -> usize {
        let last = FIRST_BLOCK - 1 + self.n_blocks;
        self.blocks()
            .find(|&n| t < Self::tau(n) + Self::epsilon(n))
            .unwrap_or(last)
    }

    /// `(gamma, gamma', gamma'')` on `[0, horizon]`, one-sided at the horizon.
    fn gamma_all(&self, t: f64) -> (f64, f64, f64) {
        let n = self.block_of(t);
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        let (g, dg, ddg) = gamma_hat(Self::epsilon(n), t - Self::tau(n));
        (sign * g, sign * dg, sign * ddg)
    }

    /// Position of the characteristic that meets the shock at time `t`, at time `s`.
    pub fn xi(&self, t: f64, s: f64) -> f64 {
        let (g, dg, _) = self.gamma_all(t);
        g + 2.0 * (1.0 + dg) * (s - t)
    }

    /// `d xi_t(s) / dt`, negative on the whole block range.
    pub fn xi_dt(&self, t: f64, s: f64) -> f64 {
        let (_, dg, ddg) = self.gamma_all(t);
        -dg - 2.0 + 2.0 * ddg * (s - t)
    }
}

/// Shock position and speed at `t` in `[0, horizon)`.
pub fn gamma_curve(spec: &CounterexampleSpec, t: f64) -> Result<(f64, f64)> {
    if !(t >= 0.0 && t < spec.horizon) {
        return Err(Error::Domain(format!("time {t} outside [0, {})", spec.horizon)));
    }
    let (g, dg, _) = spec.gamma_all(t);
    Ok((g, dg))
}

/// Root in `[lo, hi]` of a function that is nonnegative at `lo` and
/// nonpositive at `hi`.
fn bisect_decreasing(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    while hi - lo > BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// The shock time `phi(x)` whose characteristic starts from `x` in `[-r, 0]`.
pub fn phi(spec: &CounterexampleSpec, x: f64) -> Result<f64> {
    if !(x >= -spec.r && x <= 0.0) {
        return Err(Error::Domain(format!("{x} outside [-r, 0] = [{}, 0]", -spec.r)));
    }
    Ok(bisect_decreasing(0.0, spec.horizon, |t| spec.xi(t, 0.0) - x))
}

/// Exact initial datum: `0` left of `-r`, `1 + gamma'(phi(x))` on `[-r, 0]`,
/// `-1` right of `0`.
pub fn counterexample_u0(spec: &CounterexampleSpec, x: f64) -> Result<f64> {
    if x > 0.0 {
        Ok(-1.0)
    } else if x < -spec.r {
        Ok(0.0)
    } else {
        let t = phi(spec, x)?;
        Ok(1.0 + spec.gamma_all(t).1)
    }
}

/// Piecewise-constant table of the initial datum.
#[derive(Debug, Clone)]
pub struct CounterexampleDatum {
    pub r: f64,
    pub table: PiecewiseConstant,
    /// Number of shock times sampled per block.
    pub samples_per_block: usize,
}

/// Tabulates the datum on the images `xi_t(0)` of a uniform grid of shock
/// times. Checks that `t -> xi_t(0)` is strictly decreasing, both through its
/// derivative and on the grid.
pub fn counterexample_initial_datum(spec: &CounterexampleSpec, samples_per_block: usize) -> Result<CounterexampleDatum> {
    let samples_per_block = samples_per_block.max(2);
    let mut ts = Vec::with_capacity(spec.n_blocks * samples_per_block + 1);
    for n in spec.blocks() {
        let (a, e) = (CounterexampleSpec::tau(n), CounterexampleSpec::epsilon(n));
        ts.extend((0..samples_per_block).map(|k| a + e * k as f64 / samples_per_block as f64));
    }
    ts.push(spec.horizon);
    let xs: Vec<f64> = ts.iter().map(|&t| spec.xi(t, 0.0)).collect();
    if let Some(k) = ts.iter().position(|&t| spec.xi_dt(t, 0.0) >= 0.0) {
        return Err(Error::Internal(format!(
            "backward characteristics are not ordered at t = {}",
            ts[k]
        )));
    }
    if let Some(k) = xs.windows(2).position(|w| !(w[1] < w[0])) {
        return Err(Error::Internal(format!(
            "backward characteristics cross between t = {} and t = {}",
            ts[k],
            ts[k + 1]
        )));
    }
    // Breakpoints ascending: -r = xs[N], ..., xs[1], xs[0] = 0.
    let mut breakpoints: Vec<f64> = xs.iter().rev().copied().collect();
    let mut values = vec![0.0];
    for k in (0..ts.len() - 1).rev() {
        let mid = 0.5 * (ts[k] + ts[k + 1]);
        values.push(1.0 + spec.gamma_all(mid).1);
    }
    values.push(-1.0);
    breakpoints[0] = -spec.r;
    let table = PiecewiseConstant::new(breakpoints, values)?;
    Ok(CounterexampleDatum {
        r: spec.r,
        table,
        samples_per_block,
    })
}

/// Exact solution at `(t, x)` for `t` in `[0, horizon)` and `x` right of the
/// rarefaction fan issued from `-r`.
pub fn counterexample_exact_u(spec: &CounterexampleSpec, t: f64, x: f64) -> Result<f64> {
    let (g, _) = gamma_curve(spec, t)?;
    if x > g {
        return Ok(-1.0);
    }
    let fan_edge = spec.xi(spec.horizon, t);
    if x < fan_edge {
        return Err(Error::Domain(format!(
            "({t}, {x}) lies in the rarefaction fan (edge at {fan_edge})"
        )));
    }
    let t_shock = bisect_decreasing(t, spec.horizon, |s| spec.xi(s, t) - x);
    Ok(1.0 + spec.gamma_all(t_shock).1)
}

/// FV cross-check of the trace at `x = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct FvTraceCheck {
    pub dx: f64,
    /// Variation of the cell value just right of `x = 0`.
    pub tv_u: f64,
    /// Variation of the numerical flux through `x = 0`.
    pub tv_w: f64,
}

#[derive(Debug, Clone)]
pub struct CounterexampleReport {
    pub n_blocks: usize,
    pub horizon: f64,
    pub r: f64,
    /// `(n, sigma_n, u(sigma_n, 0))` for every block.
    pub sigma_samples: Vec<(usize, f64, f64)>,
    /// `sum |u(sigma_{n+1}, 0) - u(sigma_n, 0)|`.
    pub tv_lower_bound: f64,
    /// Variation of `u(., 0)` on a dense time grid.
    pub tv_u: TvReport,
    /// Variation of `w = u^2` at `x = 0` on the same grid.
    pub tv_w: TvReport,
    pub tv_u0: f64,
    /// Largest `|gamma' - (u_- - 1)|` over the sampled shock times.
    pub rh_residual: f64,
    /// Largest fan edge `xi_H(t)` over the sampled times; negative means
    /// `x = 0` never meets the fan.
    pub fan_edge_max: f64,
    pub fv: Option<FvTraceCheck>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CounterexampleOptions {
    /// Dense time samples per block for the trace variation.
    pub samples_per_block: usize,
    /// Shock times at which Rankine-Hugoniot is checked.
    pub rh_samples: usize,
    /// Cells of the optional FV run on `[-r - 1, 1]`.
    pub fv_cells: Option<usize>,
}

impl Default for CounterexampleOptions {
    fn default() -> Self {
        Self {
            samples_per_block: 2000,
            rh_samples: 100,
            fv_cells: None,
        }
    }
}

/// Variation of the exact trace at `x = 0`, its lower bound from the block
/// midpoints, the datum's variation and the Rankine-Hugoniot check.
pub fn tv_blowup_report(spec: &CounterexampleSpec, opts: &CounterexampleOptions) -> Result<CounterexampleReport> {
    let sigma_samples: Vec<(usize, f64, f64)> = spec
        .blocks()
        .map(|n| {
            let s = CounterexampleSpec::sigma(n);
            counterexample_exact_u(spec, s, 0.0).map(|u| (n, s, u))
        })
        .collect::<Result<_>>()?;
    let sigma_u: Vec<f64> = sigma_samples.iter().map(|s| s.2).collect();
    let tv_lower_bound = total_variation(&sigma_u);

    let m = opts.samples_per_block.max(1);
    let mut times = Vec::with_capacity(spec.n_blocks * m);
    for n in spec.blocks() {
        let (a, e) = (CounterexampleSpec::tau(n), CounterexampleSpec::epsilon(n));
        times.extend((0..m).map(|k| a + e * (k as f64 + 0.5) / m as f64));
    }
    let mut fan_edge_max = f64::NEG_INFINITY;
    let mut u = Vec::with_capacity(times.len());
    for &t in &times {
        fan_edge_max = fan_edge_max.max(spec.xi(spec.horizon, t));
        u.push(counterexample_exact_u(spec, t, 0.0)?);
    }
    let w: Vec<f64> = u.iter().map(|v| v * v).collect();
    let step = spec.horizon / times.len() as f64;
    let tv_u = TvReport::from_samples(0.0, &u, step);
    let tv_w = TvReport::from_samples(0.0, &w, step);

    let datum = counterexample_initial_datum(spec, m)?;
    let tv_u0 = datum.table.total_variation();

    let delta = 1e-10;
    let mut rh_residual: f64 = 0.0;
    for i in 0..opts.rh_samples {
        let t = spec.horizon * (i as f64 + 0.5) / opts.rh_samples as f64;
        let (g, dg) = gamma_curve(spec, t)?;
        let u_minus = counterexample_exact_u(spec, t, g - delta)?;
        rh_residual = rh_residual.max((dg - (u_minus - 1.0)).abs());
    }

    let fv = match opts.fv_cells {
        None => None,
        Some(cells) => {
            let grid = Grid::new(-spec.r - 1.0, 1.0, cells)?;
            let u0 = grid.averages(&datum.table);
            let fv_opts = FvOptions {
                probes: vec![0.0],
                ..FvOptions::default()
            };
            let sol = solve_fv(
                &Burgers,
                grid,
                u0,
                &Boundary::Dirichlet(PiecewiseConstant::constant(0.0)),
                &Boundary::Dirichlet(PiecewiseConstant::constant(-1.0)),
                spec.horizon,
                &fv_opts,
            )?;
            let probe = &sol.probes[0];
            Some(FvTraceCheck {
                dx: grid.dx,
                tv_u: total_variation(&probe.cell_values),
                tv_w: total_variation(&probe.flux),
            })
        }
    };

    Ok(CounterexampleReport {
        n_blocks: spec.n_blocks,
        horizon: spec.horizon,
        r: spec.r,
        sigma_samples,
        tv_lower_bound,
        tv_u,
        tv_w,
        tv_u0,
        rh_residual,
        fan_edge_max,
        fv,
    })
}
