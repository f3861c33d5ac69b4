//! Velocity laws, the LWR flux `g(rho) = rho v(rho)` and its piecewise-affine
//! lattice interpolant.

use crate::error::{Error, Result};

/// Number of sample intervals used to validate a user flux at construction.
const VALIDATION_SAMPLES: usize = 10_000;
/// Requested flows above `q_max` by less than this are clamped.
pub const FLUX_CLAMP_TOL: f64 = 1e-10;

/// Anything that can serve as the flux of a scalar conservation law in the
/// finite-volume solver.
pub trait ScalarFlux {
    fn eval(&self, u: f64) -> f64;

    /// Upper bound of `|f'|` on `[lo, hi]`.
    fn max_wave_speed(&self, lo: f64, hi: f64) -> f64;

    /// Exact Riemann (Godunov) flux between a left state `a` and a right state `b`.
    fn godunov(&self, a: f64, b: f64) -> f64;

    /// Largest speed at which the solver must expect information to travel.
    /// Defaults to the characteristic speed bound.
    fn max_signal_speed(&self, lo: f64, hi: f64) -> f64 {
        self.max_wave_speed(lo, hi)
    }
}

/// The velocity law `v(rho)`.
#[derive(Debug, Clone, PartialEq)]
pub enum VelocityLaw {
    /// `v(rho) = v_max (1 - rho / rho_max)`.
    Linear { v_max: f64 },
    /// `v(rho) = sum_i coeffs[i] rho^i`.
    Polynomial { coeffs: Vec<f64> },
}

impl VelocityLaw {
    fn v(&self, rho: f64, rho_max: f64) -> f64 {
        match self {
            VelocityLaw::Linear { v_max } => v_max * (1.0 - rho / rho_max),
            VelocityLaw::Polynomial { coeffs } => {
                coeffs.iter().rev().fold(0.0, |acc, &c| acc * rho + c)
            }
        }
    }

    fn v_prime(&self, rho: f64, rho_max: f64) -> f64 {
        match self {
            VelocityLaw::Linear { v_max } => -v_max / rho_max,
            VelocityLaw::Polynomial { coeffs } => coeffs
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(0.0, |acc, (i, &c)| acc * rho + i as f64 * c),
        }
    }
}

/// LWR flux model. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct FluxModel {
    law: VelocityLaw,
    rho_max: f64,
    rho_star: f64,
    q_max: f64,
}

impl FluxModel {
    /// The canonical linear law `v = v_max (1 - rho/rho_max)`.
    pub fn lwr_linear(v_max: f64, rho_max: f64) -> Result<Self> {
        Self::new(VelocityLaw::Linear { v_max }, rho_max, Some(0.5 * rho_max))
    }

    /// Polynomial velocity law with coefficients in increasing degree.
    pub fn polynomial(coeffs: Vec<f64>, rho_max: f64, rho_star: Option<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::Model("empty polynomial velocity law".into()));
        }
        Self::new(VelocityLaw::Polynomial { coeffs }, rho_max, rho_star)
    }

    /// Validates the law on a dense grid and locates the critical density
    /// unless one is supplied.
    pub fn new(law: VelocityLaw, rho_max: f64, rho_star: Option<f64>) -> Result<Self> {
        if !(rho_max.is_finite() && rho_max > 0.0) {
            return Err(Error::Model(format!("rho_max must be positive, got {rho_max}")));
        }
        if let VelocityLaw::Linear { v_max } = law {
            if !(v_max.is_finite() && v_max > 0.0) {
                return Err(Error::Model(format!("v_max must be positive, got {v_max}")));
            }
        }
        let mut model = Self {
            law,
            rho_max,
            rho_star: f64::NAN,
            q_max: f64::NAN,
        };
        let scale = (0..=16)
            .map(|i| model.v(rho_max * i as f64 / 16.0).abs())
            .fold(1.0, f64::max);
        if model.v(rho_max).abs() > 1e-12 * scale {
            return Err(Error::Model(format!(
                "velocity must vanish at rho_max, v(rho_max) = {}",
                model.v(rho_max)
            )));
        }
        let grid: Vec<f64> = (0..=VALIDATION_SAMPLES)
            .map(|i| rho_max * i as f64 / VALIDATION_SAMPLES as f64)
            .collect();
        if let Some(&bad) = grid.iter().find(|&&r| model.v(r) < -1e-12 * scale) {
            return Err(Error::Model(format!("negative velocity at rho = {bad}")));
        }
        let g: Vec<f64> = grid.iter().map(|&r| model.g(r)).collect();
        let peak = g
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0);
        if peak == 0 || peak == VALIDATION_SAMPLES {
            return Err(Error::Model("flux has no interior maximum on [0, rho_max]".into()));
        }
        let tol = 1e-12 * scale * rho_max;
        let rising = g[..=peak].windows(2).all(|w| w[1] >= w[0] - tol);
        let falling = g[peak..].windows(2).all(|w| w[1] <= w[0] + tol);
        if !(rising && falling) {
            return Err(Error::Model("flux is not unimodal on the validation grid".into()));
        }

        let rho_star = match rho_star {
            Some(r) => {
                if !(r > 0.0 && r < rho_max) {
                    return Err(Error::Model(format!("rho_star = {r} outside (0, rho_max)")));
                }
                if model.g(r) < g[peak] - 1e-9 * scale * rho_max {
                    return Err(Error::Model(format!(
                        "supplied rho_star = {r} is not the flux maximiser"
                    )));
                }
                r
            }
            None => model.bisect_critical(grid[peak - 1], grid[(peak + 1).min(VALIDATION_SAMPLES)]),
        };
        model.rho_star = rho_star;
        model.q_max = model.g(rho_star);
        Ok(model)
    }

    /// Root of `g'` in `[lo, hi]`, to 1e-12.
    fn bisect_critical(&self, mut lo: f64, mut hi: f64) -> f64 {
        while hi - lo > 1e-12 {
            let mid = 0.5 * (lo + hi);
            if self.g_prime(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    pub fn law(&self) -> &VelocityLaw {
        &self.law
    }

    pub fn rho_max(&self) -> f64 {
        self.rho_max
    }

    /// The critical density `rho*`, where `g` peaks.
    pub fn critical_density(&self) -> f64 {
        self.rho_star
    }

    /// Road capacity `g(rho*)`.
    pub fn q_max(&self) -> f64 {
        self.q_max
    }

    pub fn v(&self, rho: f64) -> f64 {
        self.law.v(rho, self.rho_max)
    }

    /// Unchecked flux evaluation.
    #[inline]
    pub fn g(&self, rho: f64) -> f64 {
        rho * self.v(rho)
    }

    pub fn g_prime(&self, rho: f64) -> f64 {
        self.v(rho) + rho * self.law.v_prime(rho, self.rho_max)
    }

    /// Flux `rho v(rho)` with a range check.
    pub fn flux(&self, rho: f64) -> Result<f64> {
        let tol = 1e-12 * self.rho_max;
        if !(rho >= -tol && rho <= self.rho_max + tol) {
            return Err(Error::Domain(format!(
                "density {rho} outside [0, {}]",
                self.rho_max
            )));
        }
        Ok(self.g(rho))
    }

    /// The unique `rho` in `[0, rho*]` with `g(rho) = q`.
    pub fn invert_flux_free(&self, q: f64) -> Result<f64> {
        if q.is_nan() || q < -FLUX_CLAMP_TOL {
            return Err(Error::Domain(format!("negative flow {q}")));
        }
        if q > self.q_max + FLUX_CLAMP_TOL {
            return Err(Error::InfeasibleFlux {
                q,
                q_max: self.q_max,
            });
        }
        if q <= 0.0 {
            return Ok(0.0);
        }
        if q >= self.q_max {
            return Ok(self.rho_star);
        }
        let (mut lo, mut hi) = (0.0, self.rho_star);
        loop {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.g(mid) < q {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Largest `v` on `[lo, hi]`.
    pub fn max_velocity(&self, lo: f64, hi: f64) -> f64 {
        match self.law {
            VelocityLaw::Linear { .. } => self.v(lo).max(self.v(hi)),
            VelocityLaw::Polynomial { .. } => sample_max(lo, hi, |r| self.v(r)),
        }
    }
}

fn sample_max(lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    const N: usize = 256;
    (0..=N)
        .map(|i| f(lo + (hi - lo) * i as f64 / N as f64))
        .fold(f64::NEG_INFINITY, f64::max)
}

impl ScalarFlux for FluxModel {
    fn eval(&self, u: f64) -> f64 {
        self.g(u)
    }

    fn max_wave_speed(&self, lo: f64, hi: f64) -> f64 {
        match self.law {
            VelocityLaw::Linear { .. } => self.g_prime(lo).abs().max(self.g_prime(hi).abs()),
            VelocityLaw::Polynomial { .. } => sample_max(lo, hi, |r| self.g_prime(r).abs()),
        }
    }

    fn godunov(&self, a: f64, b: f64) -> f64 {
        godunov_flux(a, b, self)
    }

    /// Path fractions ride at the vehicle speed `v`, which can exceed `|g'|`.
    fn max_signal_speed(&self, lo: f64, hi: f64) -> f64 {
        self.max_wave_speed(lo, hi).max(self.max_velocity(lo, hi))
    }
}

/// Godunov flux for a unimodal flux: the minimum of `g` over `[a, b]` when
/// `a <= b`, the maximum over `[b, a]` otherwise.
pub fn godunov_flux(a: f64, b: f64, m: &FluxModel) -> f64 {
    if a <= b {
        m.g(a).min(m.g(b))
    } else if b <= m.rho_star && m.rho_star <= a {
        m.q_max
    } else {
        m.g(a).max(m.g(b))
    }
}

/// Burgers flux `u^2`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Burgers;

impl ScalarFlux for Burgers {
    fn eval(&self, u: f64) -> f64 {
        u * u
    }

    fn max_wave_speed(&self, lo: f64, hi: f64) -> f64 {
        2.0 * lo.abs().max(hi.abs())
    }

    fn godunov(&self, a: f64, b: f64) -> f64 {
        if a <= b {
            if a <= 0.0 && 0.0 <= b {
                0.0
            } else {
                (a * a).min(b * b)
            }
        } else {
            (a * a).max(b * b)
        }
    }
}

/// Piecewise-affine interpolant of a flux on the dyadic lattice `2^-level Z`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinearFlux {
    level: u32,
    step: f64,
    j_lo: i64,
    values: Vec<f64>,
}

impl PiecewiseLinearFlux {
    pub fn level(&self) -> u32 {
        self.level
    }

    /// Lattice spacing `2^-level`.
    pub fn step(&self) -> f64 {
        self.step
    }

    /// Inclusive range of lattice indices carried.
    pub fn index_range(&self) -> (i64, i64) {
        (self.j_lo, self.j_lo + self.values.len() as i64 - 1)
    }

    pub fn lattice_point(&self, j: i64) -> f64 {
        j as f64 * self.step
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        let (lo, hi) = self.index_range();
        (lo..=hi).map(|j| self.lattice_point(j)).collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn contains_index(&self, j: i64) -> bool {
        let (lo, hi) = self.index_range();
        (lo..=hi).contains(&j)
    }

    /// Flux value at the lattice point `j 2^-level`.
    pub fn value_at(&self, j: i64) -> f64 {
        debug_assert!(self.contains_index(j), "lattice index {j} out of range");
        self.values[(j - self.j_lo) as usize]
    }

    /// Rankine-Hugoniot speed of a jump between lattice states `a` and `b`.
    pub fn chord_speed(&self, a: i64, b: i64) -> f64 {
        (self.value_at(b) - self.value_at(a)) / ((b - a) as f64 * self.step)
    }

    /// Slope on the segment `[j, j+1]`.
    pub fn segment_slope(&self, j: i64) -> f64 {
        self.chord_speed(j, j + 1)
    }

    /// Smallest segment slope between lattice indices `a <= b`.
    pub fn min_slope(&self, a: i64, b: i64) -> f64 {
        (a..b)
            .map(|j| self.segment_slope(j))
            .fold(f64::INFINITY, f64::min)
    }

    /// Evaluates the interpolant; outside the carried range the end segments
    /// are extended affinely.
    pub fn eval(&self, u: f64) -> f64 {
        let (lo, hi) = self.index_range();
        let j = ((u / self.step).floor() as i64).clamp(lo, hi - 1);
        let left = self.lattice_point(j);
        let right = self.lattice_point(j + 1);
        (u - left) / self.step * self.value_at(j + 1) + (right - u) / self.step * self.value_at(j)
    }
}

/// Interpolates `f` on the lattice `2^-level Z` over `[lo, hi]`, snapping the
/// ends outward to the lattice.
pub fn piecewise_linearize(
    f: impl Fn(f64) -> f64,
    level: u32,
    lo: f64,
    hi: f64,
) -> Result<PiecewiseLinearFlux> {
    if level == 0 || level > 40 {
        return Err(Error::Domain(format!("refinement level {level} outside 1..=40")));
    }
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::Domain(format!("invalid range [{lo}, {hi}]")));
    }
    let step = 2f64.powi(-(level as i32));
    let j_lo = (lo / step).floor() as i64;
    let j_hi = ((hi / step).ceil() as i64).max(j_lo + 1);
    let values = (j_lo..=j_hi).map(|j| f(j as f64 * step)).collect();
    Ok(PiecewiseLinearFlux {
        level,
        step,
        j_lo,
        values,
    })
}

impl ScalarFlux for PiecewiseLinearFlux {
    fn eval(&self, u: f64) -> f64 {
        PiecewiseLinearFlux::eval(self, u)
    }

    fn max_wave_speed(&self, lo: f64, hi: f64) -> f64 {
        let (jl, jh) = self.index_range();
        let a = ((lo / self.step).floor() as i64).clamp(jl, jh - 1);
        let b = ((hi / self.step).ceil() as i64).clamp(a + 1, jh);
        (a..b)
            .map(|j| self.segment_slope(j).abs())
            .fold(0.0, f64::max)
    }

    fn godunov(&self, a: f64, b: f64) -> f64 {
        let (lo, hi, take_min) = if a <= b { (a, b, true) } else { (b, a, false) };
        let mut best = if take_min {
            self.eval(a).min(self.eval(b))
        } else {
            self.eval(a).max(self.eval(b))
        };
        let (jl, jh) = self.index_range();
        let first = ((lo / self.step).floor() as i64 + 1).max(jl);
        let last = ((hi / self.step).ceil() as i64 - 1).min(jh);
        for j in first..=last {
            let x = self.lattice_point(j);
            if x > lo && x < hi {
                let v = self.value_at(j);
                best = if take_min { best.min(v) } else { best.max(v) };
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear() -> FluxModel {
        FluxModel::lwr_linear(1.0, 1.0).unwrap()
    }

    #[test]
    fn flux_examples() {
        let m = linear();
        assert_eq!(m.flux(0.0).unwrap(), 0.0);
        assert!((m.flux(0.5).unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(m.flux(1.0).unwrap(), 0.0);
        assert!(matches!(m.flux(1.5), Err(Error::Domain(_))));
        assert!(matches!(m.flux(-0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn critical_density_examples() {
        assert_eq!(linear().critical_density(), 0.5);
        let scaled = FluxModel::lwr_linear(2.0, 4.0).unwrap();
        assert_eq!(scaled.critical_density(), 2.0);
        // v = (1 - rho)^2: grid-scan oracle over rho (1 - rho)^2.
        let oracle = (0..=1_000_000)
            .map(|i| i as f64 / 1e6)
            .max_by(|a, b| (a * (1.0 - a).powi(2)).total_cmp(&(b * (1.0 - b).powi(2))))
            .unwrap();
        let cubic = FluxModel::polynomial(vec![1.0, -2.0, 1.0], 1.0, None).unwrap();
        assert!((cubic.critical_density() - oracle).abs() < 2e-6);
        assert!((cubic.critical_density() - 1.0 / 3.0).abs() < 1e-11);
        // Numerically located rho* for the linear law agrees with the analytic one.
        let numeric = FluxModel::polynomial(vec![1.0, -1.0], 1.0, None).unwrap();
        assert!((numeric.critical_density() - 0.5).abs() < 1e-11);
    }

    #[test]
    fn rejects_non_unimodal_and_bad_laws() {
        // v = 1 - 3 rho + 3 rho^2 - ... not vanishing at rho_max.
        assert!(matches!(
            FluxModel::polynomial(vec![1.0, -0.5], 1.0, None),
            Err(Error::Model(_))
        ));
        // g = rho (1 - rho)(rho - 0.3)^2 + ... : two humps.
        // v = (1 - rho) ((rho - 0.5)^2 + 0.001)
        let coeffs = {
            // (1 - r)(r^2 - r + 0.251) = -r^3 + 2 r^2 - 1.251 r + 0.251
            vec![0.251, -1.251, 2.0, -1.0]
        };
        assert!(matches!(
            FluxModel::polynomial(coeffs, 1.0, None),
            Err(Error::Model(_))
        ));
        assert!(FluxModel::lwr_linear(-1.0, 1.0).is_err());
    }

    #[test]
    fn invert_examples() {
        let m = linear();
        assert_eq!(m.invert_flux_free(0.0).unwrap(), 0.0);
        assert_eq!(m.invert_flux_free(0.25).unwrap(), 0.5);
        // bisection oracle on rho (1 - rho) = 0.16 in [0, 0.5]
        let (mut lo, mut hi) = (0.0f64, 0.5f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid * (1.0 - mid) < 0.16 {
                lo = mid
            } else {
                hi = mid
            }
        }
        let r = m.invert_flux_free(0.16).unwrap();
        assert!((r - lo).abs() < 1e-12);
        assert!((r - 0.2).abs() < 1e-12);
        assert_eq!(m.invert_flux_free(0.25 + 5e-11).unwrap(), 0.5);
        assert!(matches!(
            m.invert_flux_free(0.26),
            Err(Error::InfeasibleFlux { .. })
        ));
    }

    #[test]
    fn model_invariants_on_dense_grid() {
        for m in [
            linear(),
            FluxModel::polynomial(vec![1.0, -2.0, 1.0], 1.0, None).unwrap(),
        ] {
            let rs = m.critical_density();
            assert!(m.v(m.rho_max()).abs() < 1e-12);
            assert_eq!(m.g(0.0), 0.0);
            for i in 1..10_000 {
                let r = m.rho_max() * i as f64 / 10_000.0;
                assert!(m.v(r) >= -1e-12);
                if r < rs - 1e-9 {
                    assert!(m.g_prime(r) > 0.0, "g'({r}) <= 0");
                } else if r > rs + 1e-9 {
                    assert!(m.g_prime(r) <= 0.0, "g'({r}) > 0");
                }
            }
            let h = 1e-4;
            assert!(m.g(rs + h) <= m.q_max() && m.g(rs - h) <= m.q_max());
        }
    }

    #[test]
    fn godunov_flux_examples() {
        let m = linear();
        assert_eq!(godunov_flux(0.3, 0.3, &m), m.g(0.3));
        assert!((godunov_flux(0.8, 0.2, &m) - 0.25).abs() < 1e-15);
        assert!((godunov_flux(0.2, 0.8, &m) - 0.16).abs() < 1e-15);
    }

    #[test]
    fn piecewise_linear_examples() {
        let f = piecewise_linearize(|u| u * u, 1, -1.0, 1.0).unwrap();
        assert_eq!(f.breakpoints(), vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
        assert_eq!(f.values(), &[1.0, 0.25, 0.0, 0.25, 1.0]);
        let f2 = piecewise_linearize(|u| u * u, 2, -1.0, 1.0).unwrap();
        assert!((f2.eval(0.375) - 0.15625).abs() < 1e-15);
        let affine = piecewise_linearize(|u| 3.0 * u - 1.0, 3, -2.0, 2.0).unwrap();
        for i in 0..=400 {
            let u = -2.0 + 4.0 * i as f64 / 400.0;
            assert!((affine.eval(u) - (3.0 * u - 1.0)).abs() < 1e-13);
        }
    }

    #[test]
    fn piecewise_linear_snaps_outward() {
        let f = piecewise_linearize(|u| u, 2, -0.3, 0.6).unwrap();
        assert_eq!(f.index_range(), (-2, 3));
        assert!(piecewise_linearize(|u| u, 0, 0.0, 1.0).is_err());
    }

    #[test]
    fn piecewise_godunov_matches_scan() {
        let f = piecewise_linearize(|u| u * u, 3, -1.0, 1.0).unwrap();
        for &(a, b) in &[(-0.9, 0.7), (0.7, -0.9), (0.1, 0.3), (0.3, 0.1), (-0.2, -0.6)] {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let scan: Vec<f64> = (0..=100_000)
                .map(|i| f.eval(lo + (hi - lo) * i as f64 / 100_000.0))
                .collect();
            let expect = if a <= b {
                scan.iter().copied().fold(f64::INFINITY, f64::min)
            } else {
                scan.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            };
            assert!((f.godunov(a, b) - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn burgers_godunov() {
        assert_eq!(Burgers.godunov(-1.0, 1.0), 0.0);
        assert_eq!(Burgers.godunov(1.0, -1.0), 1.0);
        assert_eq!(Burgers.godunov(0.5, 0.8), 0.25);
    }
}
