//! Right-continuous piecewise-constant functions of one variable.
//!
//! Used for initial profiles in space and for boundary data in time.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseConstant {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl PiecewiseConstant {
    /// `values.len()` must be `breakpoints.len() + 1` and breakpoints strictly increasing.
    /// `values[k]` holds on `[breakpoints[k-1], breakpoints[k])`.
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if values.len() != breakpoints.len() + 1 {
            return Err(Error::Domain(format!(
                "piecewise-constant function needs {} values for {} breakpoints, got {}",
                breakpoints.len() + 1,
                breakpoints.len(),
                values.len()
            )));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Domain("breakpoints must be strictly increasing".into()));
        }
        if breakpoints.iter().chain(values.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite breakpoint or value".into()));
        }
        Ok(Self { breakpoints, values })
    }

    pub fn constant(value: f64) -> Self {
        Self {
            breakpoints: Vec::new(),
            values: vec![value],
        }
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn eval(&self, x: f64) -> f64 {
        let k = self.breakpoints.partition_point(|&b| b <= x);
        self.values[k]
    }

    /// Value just left of `x`.
    pub fn eval_left(&self, x: f64) -> f64 {
        let k = self.breakpoints.partition_point(|&b| b < x);
        self.values[k]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Minimum and maximum over `[a, b]`.
    pub fn range_on(&self, a: f64, b: f64) -> (f64, f64) {
        let lo = self.breakpoints.partition_point(|&x| x <= a);
        let hi = self.breakpoints.partition_point(|&x| x < b);
        self.values[lo..=hi]
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(mn, mx), &v| {
                (mn.min(v), mx.max(v))
            })
    }

    /// Total variation over `[a, b]`, counting only jumps strictly inside.
    pub fn total_variation_on(&self, a: f64, b: f64) -> f64 {
        let lo = self.breakpoints.partition_point(|&x| x <= a);
        let hi = self.breakpoints.partition_point(|&x| x < b);
        self.values[lo..=hi]
            .windows(2)
            .map(|w| (w[1] - w[0]).abs())
            .sum()
    }

    pub fn total_variation(&self) -> f64 {
        self.values.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
    }

    /// Exact integral over `[a, b]`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        let mut acc = 0.0;
        let mut left = a;
        let mut k = self.breakpoints.partition_point(|&x| x <= a);
        while left < b {
            let right = self.breakpoints.get(k).copied().unwrap_or(f64::INFINITY).min(b);
            acc += self.values[k] * (right - left);
            left = right;
            k += 1;
        }
        acc
    }

    /// Exact averages over the cells `[x0 + i dx, x0 + (i+1) dx]`.
    pub fn cell_averages(&self, x0: f64, dx: f64, n_cells: usize) -> Vec<f64> {
        (0..n_cells)
            .map(|i| {
                let a = x0 + i as f64 * dx;
                let b = x0 + (i + 1) as f64 * dx;
                self.integral(a, b) / (b - a)
            })
            .collect()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            breakpoints: self.breakpoints.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise sum; the result carries the union of the breakpoints.
    pub fn add(&self, other: &Self) -> Self {
        let mut points: Vec<f64> = self
            .breakpoints
            .iter()
            .chain(other.breakpoints.iter())
            .copied()
            .collect();
        points.sort_by(f64::total_cmp);
        points.dedup();
        let mut values = Vec::with_capacity(points.len() + 1);
        values.push(self.values[0] + other.values[0]);
        for &p in &points {
            values.push(self.eval(p) + other.eval(p));
        }
        Self {
            breakpoints: points,
            values,
        }
    }
}

impl Default for PiecewiseConstant {
    /// The zero function.
    fn default() -> Self {
        Self::constant(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_is_right_continuous() {
        let f = PiecewiseConstant::new(vec![0.0, 1.0], vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(f.eval(-0.5), 1.0);
        assert_eq!(f.eval(0.0), 2.0);
        assert_eq!(f.eval_left(0.0), 1.0);
        assert_eq!(f.eval(1.0), 3.0);
    }

    #[test]
    fn integral_and_averages() {
        let f = PiecewiseConstant::new(vec![0.25], vec![0.0, 1.0]).unwrap();
        assert!((f.integral(0.0, 1.0) - 0.75).abs() < 1e-15);
        let avg = f.cell_averages(0.0, 0.5, 2);
        assert!((avg[0] - 0.5).abs() < 1e-15);
        assert!((avg[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(PiecewiseConstant::new(vec![1.0, 0.0], vec![0.0; 3]).is_err());
        assert!(PiecewiseConstant::new(vec![1.0], vec![0.0]).is_err());
    }

    #[test]
    fn tv_on_subinterval() {
        let f = PiecewiseConstant::new(vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!(f.total_variation(), 4.0);
        assert_eq!(f.total_variation_on(0.5, 1.5), 2.0);
        assert_eq!(f.range_on(0.5, 1.5), (1.0, 3.0));
    }

    #[test]
    fn add_merges_breakpoints() {
        let a = PiecewiseConstant::new(vec![0.0], vec![0.5, 0.25]).unwrap();
        let b = PiecewiseConstant::new(vec![1.0], vec![0.5, 0.75]).unwrap();
        let s = a.add(&b);
        assert_eq!(s.breakpoints(), &[0.0, 1.0]);
        assert_eq!(s.values(), &[1.0, 0.75, 1.0]);
    }
}
