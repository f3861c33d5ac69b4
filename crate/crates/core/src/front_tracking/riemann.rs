use crate::flux::PiecewiseLinearFlux;

/// One discontinuity of a Riemann fan, between two lattice states.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wave {
    pub left: i64,
    pub right: i64,
    pub speed: f64,
}

/// Entropy solution of the Riemann problem `u_l | u_r` for a piecewise-affine
/// flux: the segments of the lower convex envelope of `f` on `[u_l, u_r]` when
/// `u_l < u_r`, of the upper concave envelope on `[u_r, u_l]` otherwise.
/// Waves come out left to right with strictly increasing speeds.
pub fn solve_riemann_pl(u_l: i64, u_r: i64, f: &PiecewiseLinearFlux) -> Vec<Wave> {
    if u_l == u_r {
        return Vec::new();
    }
    let (lo, hi) = (u_l.min(u_r), u_l.max(u_r));
    let lower = u_l < u_r;
    let mut hull: Vec<i64> = Vec::with_capacity((hi - lo + 1) as usize);
    for j in lo..=hi {
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            let turn = cross(f, a, b, j);
            let keep = if lower { turn > 0.0 } else { turn < 0.0 };
            if keep {
                break;
            }
            hull.pop();
        }
        hull.push(j);
    }
    if !lower {
        hull.reverse();
    }
    let mut waves: Vec<Wave> = Vec::with_capacity(hull.len() - 1);
    for pair in hull.windows(2) {
        let mut wave = Wave {
            left: pair[0],
            right: pair[1],
            speed: f.chord_speed(pair[0], pair[1]),
        };
        // Rounding can leave nearly collinear vertices whose chord speeds are
        // not strictly increasing; fuse them.
        while let Some(prev) = waves.last() {
            if prev.speed < wave.speed {
                break;
            }
            let prev = waves.pop().unwrap();
            wave = Wave {
                left: prev.left,
                right: wave.right,
                speed: f.chord_speed(prev.left, wave.right),
            };
        }
        waves.push(wave);
    }
    waves
}

/// Orientation of the lattice points `a < b < c` on the flux graph, with a
/// relative dead zone so that collinear triples count as straight.
fn cross(f: &PiecewiseLinearFlux, a: i64, b: i64, c: i64) -> f64 {
    let (fa, fb, fc) = (f.value_at(a), f.value_at(b), f.value_at(c));
    let (dx1, dy1) = ((b - a) as f64, fb - fa);
    let (dx2, dy2) = ((c - a) as f64, fc - fa);
    let value = dx1 * dy2 - dy1 * dx2;
    let scale = (dx1 * dy2).abs() + (dy1 * dx2).abs();
    if value.abs() <= 1e-13 * scale {
        0.0
    } else {
        value
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flux::piecewise_linearize;

    fn burgers(level: u32) -> PiecewiseLinearFlux {
        piecewise_linearize(|u| u * u, level, -1.0, 1.0).unwrap()
    }

    #[test]
    fn equal_states_give_empty_fan() {
        assert!(solve_riemann_pl(1, 1, &burgers(1)).is_empty());
    }

    #[test]
    fn convex_rarefaction_is_split_at_every_lattice_point() {
        let f = burgers(1);
        let fan = solve_riemann_pl(-2, 2, &f);
        let states: Vec<i64> = fan.iter().map(|w| w.right).collect();
        assert_eq!(states, vec![-1, 0, 1, 2]);
        let speeds: Vec<f64> = fan.iter().map(|w| w.speed).collect();
        assert_eq!(speeds, vec![-1.5, -0.5, 0.5, 1.5]);
    }

    #[test]
    fn convex_shock_is_single_chord() {
        let fan = solve_riemann_pl(2, -2, &burgers(1));
        assert_eq!(fan.len(), 1);
        assert_eq!(fan[0].speed, 0.0);
        assert_eq!((fan[0].left, fan[0].right), (2, -2));
    }

    #[test]
    fn affine_flux_gives_contact() {
        let f = piecewise_linearize(|u| 0.5 * u + 0.1, 3, -1.0, 1.0).unwrap();
        let fan = solve_riemann_pl(-8, 8, &f);
        assert_eq!(fan.len(), 1);
        assert!((fan[0].speed - 0.5).abs() < 1e-14);
    }

    #[test]
    fn nonconvex_flux_mixes_shock_and_rarefaction() {
        // u^3: concave on u < 0, convex on u > 0.
        let f = piecewise_linearize(|u| u * u * u, 2, -1.0, 1.0).unwrap();
        let fan = solve_riemann_pl(-4, 4, &f);
        assert_eq!(fan.first().unwrap().left, -4);
        assert_eq!(fan.last().unwrap().right, 4);
        assert!(fan.windows(2).all(|w| w[0].speed < w[1].speed));
        // first wave jumps over the concave part
        assert!(fan[0].right - fan[0].left > 1);
    }
}
