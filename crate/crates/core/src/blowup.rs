//! Polar blow-up of the planar field `(z1^2 - 2 z1 z2, z2^2 - 2 z1 z2)`,
//! whose origin is a non-hyperbolic equilibrium.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::math;
use crate::roots;

const TAU: f64 = 2.0 * PI;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarPoint {
    pub theta: f64,
    pub r: f64,
}

impl PolarPoint {
    /// Wraps `theta` into `[0, 2 pi)`. Negative radii flip the angle.
    pub fn new(theta: f64, r: f64) -> Self {
        let (theta, r) = if r < 0.0 {
            (theta + PI, -r)
        } else {
            (theta, r)
        };
        Self {
            theta: wrap_angle(theta),
            r,
        }
    }

    pub fn from_cartesian(z1: f64, z2: f64) -> Self {
        Self::new(math::atan2(z2, z1), math::hypot(z1, z2))
    }

    pub fn to_cartesian(self) -> (f64, f64) {
        (
            self.r * math::cos(self.theta),
            self.r * math::sin(self.theta),
        )
    }
}

pub fn wrap_angle(theta: f64) -> f64 {
    let t = theta - TAU * math::floor(theta / TAU);
    // floor rounding can leave exactly 2 pi
    if t >= TAU {
        0.0
    } else {
        t
    }
}

pub fn example_field(z1: f64, z2: f64) -> (f64, f64) {
    (z1 * z1 - 2.0 * z1 * z2, z2 * z2 - 2.0 * z1 * z2)
}

/// The blown-up field divided by `r`, extended continuously to `r = 0`.
pub fn rescaled_blowup(theta: f64, r: f64) -> (f64, f64) {
    let (s, c) = (math::sin(theta), math::cos(theta));
    let dtheta = 3.0 * c * s * (s - c);
    let dr = 0.25 * r * (c + 3.0 * math::cos(3.0 * theta) + s - 3.0 * math::sin(3.0 * theta));
    (dtheta, dr)
}

/// `example_field` pushed through the polar map and divided by `r`; only
/// defined for `r > 0`.
pub fn pushed_forward(theta: f64, r: f64) -> (f64, f64) {
    let (s, c) = (math::sin(theta), math::cos(theta));
    let (f1, f2) = example_field(r * c, r * s);
    let dr = c * f1 + s * f2;
    let dtheta = (c * f2 - s * f1) / r;
    (dtheta / r, dr / r)
}

/// Jacobian of [`rescaled_blowup`] in `(theta, r)`.
pub fn blowup_jacobian(theta: f64, r: f64) -> [[f64; 2]; 2] {
    let (s, c) = (math::sin(theta), math::cos(theta));
    // d/dtheta of 3cs(s - c) = 3(c^2 - s^2)(s - c) + 3cs(c + s)
    let dth_dth = 3.0 * (c * c - s * s) * (s - c) + 3.0 * c * s * (c + s);
    let q = c + 3.0 * math::cos(3.0 * theta) + s - 3.0 * math::sin(3.0 * theta);
    let dq = -s - 9.0 * math::sin(3.0 * theta) + c - 9.0 * math::cos(3.0 * theta);
    [[dth_dth, 0.0], [0.25 * r * dq, 0.25 * q]]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircleEquilibrium {
    pub theta: f64,
    /// Eigenvalues of the Jacobian at `r = 0`, which is triangular.
    pub eigenvalues: [f64; 2],
    pub hyperbolic: bool,
}

/// Equilibria on the circle `r = 0`, ascending in `theta`.
pub fn circle_equilibria() -> Vec<CircleEquilibrium> {
    circle_equilibria_with(997)
}

/// Same as [`circle_equilibria`] with a chosen scan resolution.
pub fn circle_equilibria_with(cells: usize) -> Vec<CircleEquilibrium> {
    // an offset start keeps theta = 0 away from the scan ends
    let lo = -0.5 * TAU / cells as f64;
    let mut thetas: Vec<f64> =
        roots::scan_roots(|t| rescaled_blowup(t, 0.0).0, lo, lo + TAU, cells, 1e-14)
            .into_iter()
            .map(|t| {
                let w = wrap_angle(t);
                if TAU - w < 1e-12 {
                    0.0
                } else {
                    w
                }
            })
            .collect();
    thetas.sort_by(f64::total_cmp);
    thetas.dedup_by(|a, b| (*a - *b).abs() < 1e-10);
    thetas
        .into_iter()
        .map(|theta| {
            let j = blowup_jacobian(theta, 0.0);
            let eigenvalues = [j[0][0], j[1][1]];
            CircleEquilibrium {
                theta,
                eigenvalues,
                hyperbolic: eigenvalues.iter().all(|l| l.abs() > 1e-9),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlowupSample {
    pub theta: f64,
    pub r: f64,
    pub dtheta: f64,
    pub dr: f64,
}

/// Rescaled field on a uniform `(theta, r)` grid, `theta` in `[0, 2 pi)`.
pub fn blowup_grid(n_theta: usize, r_min: f64, r_max: f64, n_r: usize) -> Vec<BlowupSample> {
    let mut out = Vec::with_capacity(n_theta * n_r);
    for i in 0..n_theta {
        let theta = TAU * i as f64 / n_theta as f64;
        for k in 0..n_r {
            let r = if n_r > 1 {
                r_min + (r_max - r_min) * k as f64 / (n_r - 1) as f64
            } else {
                r_min
            };
            let (dtheta, dr) = rescaled_blowup(theta, r);
            out.push(BlowupSample {
                theta,
                r,
                dtheta,
                dr,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_samples() {
        assert_eq!(example_field(0.0, 0.0), (0.0, 0.0));
        assert_eq!(example_field(1.0, 0.0), (1.0, 0.0));
        assert_eq!(example_field(1.0, 1.0), (-1.0, -1.0));
    }

    #[test]
    fn rescaled_samples() {
        let (a, b) = rescaled_blowup(PI / 4.0, 0.0);
        assert!(a.abs() < 1e-15 && b == 0.0);
        let (a, _) = rescaled_blowup(PI / 2.0, 0.0);
        assert!(a.abs() < 1e-15);
        let (a, _) = rescaled_blowup(PI / 6.0, 0.0);
        let s3 = math::sqrt(3.0);
        assert!((a - 3.0 * (s3 / 2.0) * 0.5 * (0.5 - s3 / 2.0)).abs() < 1e-14);
    }

    #[test]
    fn six_hyperbolic_equilibria() {
        let eq = circle_equilibria();
        let expected = [0.0, PI / 4.0, PI / 2.0, PI, 5.0 * PI / 4.0, 3.0 * PI / 2.0];
        assert_eq!(eq.len(), 6);
        for (q, t) in eq.iter().zip(expected) {
            assert!((q.theta - t).abs() < 1e-10, "{} vs {}", q.theta, t);
            assert!(q.hyperbolic);
        }
        assert_eq!(circle_equilibria_with(499).len(), 6);
    }

    #[test]
    fn jacobian_matches_differences() {
        for &(t, r) in &[(0.3, 0.0), (1.1, 0.4), (4.0, 0.05)] {
            let j = blowup_jacobian(t, r);
            let h = 1e-6;
            let (a1, b1) = rescaled_blowup(t + h, r);
            let (a0, b0) = rescaled_blowup(t - h, r);
            assert!((j[0][0] - (a1 - a0) / (2.0 * h)).abs() < 1e-7);
            assert!((j[1][0] - (b1 - b0) / (2.0 * h)).abs() < 1e-7);
            let (_, b1) = rescaled_blowup(t, r + h);
            let (_, b0) = rescaled_blowup(t, r - h);
            assert!((j[1][1] - (b1 - b0) / (2.0 * h)).abs() < 1e-7);
        }
    }

    #[test]
    fn polar_round_trip() {
        let p = PolarPoint::new(-0.5, 2.0);
        assert!((p.theta - (TAU - 0.5)).abs() < 1e-15);
        let (x, y) = p.to_cartesian();
        let q = PolarPoint::from_cartesian(x, y);
        assert!((q.theta - p.theta).abs() < 1e-12 && (q.r - 2.0).abs() < 1e-12);
        assert_eq!(wrap_angle(TAU), 0.0);
    }
}
