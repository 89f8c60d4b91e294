//! Laboratory-frame tip path rebuilt from a velocity series.
//!
//! The comoving-frame solver never stores where the tip went; it stores how
//! fast the frame moved. Undoing that is a cumulative rotation-and-sum: the
//! frame angle integrates the angular velocity, and each translation
//! increment is the frame velocity rotated into the laboratory.
//!
//! Positions accumulate from zero internally and the caller's starting point
//! is added only when a point is emitted, so changing `(x0, y0)` translates
//! every emitted point by exactly one floating-point addition and nothing
//! else changes, bit for bit.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;
use crate::quotient::QuotientSeries;

/// Reconstructed tip trajectory, columnar like the series it came from.
///
/// Point 0 is the starting pose one sample interval before the first
/// velocity sample; point `k >= 1` is the pose after applying sample `k - 1`,
/// timestamped to match it.
#[derive(Debug, Clone, PartialEq)]
pub struct TipPath {
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub theta: Vec<f64>,
}

impl TipPath {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn point(&self, k: usize) -> (f64, f64, f64, f64) {
        (self.t[k], self.x[k], self.y[k], self.theta[k])
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::with_capacity(96 * self.len() + 16);
        out.push_str("t,x,y,theta\n");
        for k in 0..self.len() {
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e}",
                self.t[k], self.x[k], self.y[k], self.theta[k]
            )
            .unwrap();
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path.as_ref(), self.to_csv_string())?;
        Ok(())
    }
}

/// Integrates the frame velocities into a tip path.
///
/// Per sample, with `theta_k` the angle before the sample is applied:
///
/// ```text
/// x     += dt * (cx * cos(theta_k) - cy * sin(theta_k))
/// y     += dt * (cx * sin(theta_k) + cy * cos(theta_k))
/// theta += dt * omega
/// ```
///
/// The position update reads the pre-update angle.
pub fn reconstruct_tip(qs: &QuotientSeries, theta0: f64, x0: f64, y0: f64) -> TipPath {
    let m = qs.len();
    let dt = qs.dt();
    let mut path = TipPath {
        t: Vec::with_capacity(m + 1),
        x: Vec::with_capacity(m + 1),
        y: Vec::with_capacity(m + 1),
        theta: Vec::with_capacity(m + 1),
    };
    let (mut px, mut py, mut theta) = (0.0f64, 0.0f64, theta0);
    path.t.push(qs.t0() - dt);
    path.x.push(px + x0);
    path.y.push(py + y0);
    path.theta.push(theta);
    for k in 0..m {
        let (cx, cy, omega) = (qs.cx()[k], qs.cy()[k], qs.omega()[k]);
        let (sin, cos) = theta.sin_cos();
        px += dt * (cx * cos - cy * sin);
        py += dt * (cx * sin + cy * cos);
        theta += dt * omega;
        path.t.push(qs.t(k));
        path.x.push(px + x0);
        path.y.push(py + y0);
        path.theta.push(theta);
    }
    path
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(dt: f64, samples: &[(f64, f64, f64)]) -> QuotientSeries {
        let mut qs = QuotientSeries::new(dt);
        for &(cx, cy, omega) in samples {
            qs.push(cx, cy, omega);
        }
        qs
    }

    fn constant_series(dt: f64, cx: f64, cy: f64, omega: f64, m: usize) -> QuotientSeries {
        let mut qs = QuotientSeries::new(dt);
        for _ in 0..m {
            qs.push(cx, cy, omega);
        }
        qs
    }

    #[test]
    fn zero_velocities_hold_position_while_theta_winds() {
        let qs = constant_series(0.01, 0.0, 0.0, 2.0, 500);
        let path = reconstruct_tip(&qs, 0.25, 3.0, -4.0);
        assert_eq!(path.len(), 501);
        for k in 0..path.len() {
            assert_eq!(path.x[k].to_bits(), 3.0f64.to_bits());
            assert_eq!(path.y[k].to_bits(), (-4.0f64).to_bits());
            let expect = 0.25 + k as f64 * 0.01 * 2.0;
            assert!((path.theta[k] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn unit_velocity_along_x_traces_a_straight_line() {
        let qs = constant_series(0.001, 1.0, 0.0, 0.0, 1000);
        let path = reconstruct_tip(&qs, 0.0, 5.0, 1.0);
        for k in 0..path.len() {
            let t_from_start = path.t[k] - path.t[0];
            assert!((path.x[k] - (5.0 + t_from_start)).abs() < 1e-12);
            assert_eq!(path.y[k].to_bits(), 1.0f64.to_bits());
            assert_eq!(path.theta[k].to_bits(), 0.0f64.to_bits());
        }
    }

    #[test]
    fn constant_rotation_closes_a_circle_of_radius_c_over_omega() {
        // Continuous limit: centre (x0, y0 + c/w), radius c/w. Step keeps
        // dt at 1e-3 of a revolution, run two revolutions.
        let (c, w) = (0.6, 1.7);
        let dt = 1e-3 * std::f64::consts::TAU / w;
        let steps = 2000;
        let qs = constant_series(dt, c, 0.0, w, steps);
        let path = reconstruct_tip(&qs, 0.0, 2.0, -1.0);
        let r = c / w;
        let (cx0, cy0) = (2.0, -1.0 + r);
        let mut worst = 0.0f64;
        for k in 0..path.len() {
            let d = ((path.x[k] - cx0).powi(2) + (path.y[k] - cy0).powi(2)).sqrt();
            worst = worst.max((d - r).abs());
        }
        assert!(worst < 0.01 * r, "radial deviation {worst:.3e} vs radius {r:.3}");
        // The sweep really covers the whole circle.
        let xmax = path.x.iter().cloned().fold(f64::MIN, f64::max);
        let xmin = path.x.iter().cloned().fold(f64::MAX, f64::min);
        assert!((xmax - (2.0 + r)).abs() < 0.02 * r);
        assert!((xmin - (2.0 - r)).abs() < 0.02 * r);
    }

    #[test]
    fn moving_the_start_point_translates_every_point_exactly() {
        let qs =
            series(0.02, &[(0.4, -0.3, 1.2), (0.1, 0.9, -0.7), (-0.5, 0.2, 0.3), (0.8, 0.8, 2.0)]);
        let base = reconstruct_tip(&qs, 0.6, 0.0, 0.0);
        let moved = reconstruct_tip(&qs, 0.6, 12.25, -3.5);
        for k in 0..base.len() {
            assert_eq!(moved.x[k].to_bits(), (base.x[k] + 12.25).to_bits());
            assert_eq!(moved.y[k].to_bits(), (base.y[k] + -3.5).to_bits());
            assert_eq!(moved.theta[k].to_bits(), base.theta[k].to_bits());
            assert_eq!(moved.t[k].to_bits(), base.t[k].to_bits());
        }
    }

    #[test]
    fn rotating_the_initial_angle_rotates_the_path() {
        let qs = constant_series(0.005, 0.7, 0.2, 1.1, 800);
        let phi = 0.9f64;
        let base = reconstruct_tip(&qs, 0.3, 0.0, 0.0);
        let turned = reconstruct_tip(&qs, 0.3 + phi, 0.0, 0.0);
        let (s, c) = phi.sin_cos();
        for k in 0..base.len() {
            let rx = c * base.x[k] - s * base.y[k];
            let ry = s * base.x[k] + c * base.y[k];
            assert!((turned.x[k] - rx).abs() < 1e-12);
            assert!((turned.y[k] - ry).abs() < 1e-12);
            assert!((turned.theta[k] - (base.theta[k] + phi)).abs() < 1e-12);
        }
    }

    #[test]
    fn position_update_reads_the_angle_before_it_advances() {
        let dt = 0.25;
        let w0 = 1.3;
        let qs = series(dt, &[(1.0, 0.0, w0), (1.0, 0.0, 0.0)]);
        let path = reconstruct_tip(&qs, 0.0, 0.0, 0.0);
        // First increment sees theta = 0 exactly; the second sees dt * w0.
        assert_eq!(path.x[1].to_bits(), dt.to_bits());
        let second = dt + dt * (dt * w0).cos();
        assert_eq!(path.x[2].to_bits(), second.to_bits());
        assert_eq!(path.theta[1].to_bits(), (dt * w0).to_bits());
    }

    #[test]
    fn timestamps_are_copied_from_the_series() {
        let qs = constant_series(0.125, 0.1, 0.0, 0.0, 6);
        let path = reconstruct_tip(&qs, 0.0, 0.0, 0.0);
        assert_eq!(path.t[0].to_bits(), (qs.t0() - qs.dt()).to_bits());
        for k in 0..qs.len() {
            assert_eq!(path.t[k + 1].to_bits(), qs.t(k).to_bits());
        }
    }

    #[test]
    fn csv_has_header_and_full_precision() {
        let qs = series(0.02, &[(1.0 / 3.0, -0.1, 2.5)]);
        let path = reconstruct_tip(&qs, 0.7, 1.0, 2.0);
        let csv = path.to_csv_string();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("t,x,y,theta"));
        let rows: Vec<&str> = lines.collect();
        assert_eq!(rows.len(), path.len());
        for (k, row) in rows.iter().enumerate() {
            let vals: Vec<f64> = row.split(',').map(|v| v.parse().unwrap()).collect();
            assert_eq!(vals[0].to_bits(), path.t[k].to_bits());
            assert_eq!(vals[1].to_bits(), path.x[k].to_bits());
            assert_eq!(vals[2].to_bits(), path.y[k].to_bits());
            assert_eq!(vals[3].to_bits(), path.theta[k].to_bits());
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            // Finite inputs can only produce finite paths, and the emitted
            // point count is always one more than the sample count.
            #[test]
            fn finite_in_finite_out(
                samples in proptest::collection::vec(
                    (-5.0f64..5.0, -5.0f64..5.0, -20.0f64..20.0), 1..120),
                theta0 in -7.0f64..7.0,
            ) {
                let qs = series(0.01, &samples);
                let path = reconstruct_tip(&qs, theta0, 1.0, -2.0);
                prop_assert_eq!(path.len(), samples.len() + 1);
                for k in 0..path.len() {
                    prop_assert!(path.x[k].is_finite());
                    prop_assert!(path.y[k].is_finite());
                    prop_assert!(path.theta[k].is_finite());
                }
            }
        }
    }
}
