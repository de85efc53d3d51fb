//! Smooth-acceleration reference trajectories: the quintic unit profile and
//! the closed square path in the world y-z plane.

use nalgebra::{UnitQuaternion, Vector3, Vector6};

use crate::controller::TaskReference;

/// Quintic blend `s(u) = 10u^3 - 15u^4 + 6u^5` over `t in [0, t_f]` with
/// zero boundary velocity and acceleration. Returns `(s, ds/dt, d2s/dt2)`;
/// out-of-range times clamp to the endpoints.
pub fn quintic_scalar(t: f64, t_f: f64) -> (f64, f64, f64) {
    assert!(t_f > 0.0);
    if t <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    if t >= t_f {
        return (1.0, 0.0, 0.0);
    }
    let u = t / t_f;
    let s = ((6.0 * u - 15.0) * u + 10.0) * u * u * u;
    let sd = ((30.0 * u - 60.0) * u + 30.0) * u * u / t_f;
    let sdd = ((120.0 * u - 180.0) * u + 60.0) * u / (t_f * t_f);
    (s, sd, sdd)
}

/// Reference trajectory selection.
#[derive(Debug, Clone, PartialEq)]
pub enum TrajectorySpec {
    /// Constant desired pose at the start pose.
    Hold,
    /// Closed square in the y-z plane: four quintic segments of
    /// `segment_time` seconds each, then hold at the start corner.
    Square { segment_time: f64, side: f64 },
}

/// Sampled square path (or hold) anchored at the calibrated start pose,
/// with constant desired orientation.
#[derive(Debug, Clone)]
pub struct SquarePath {
    spec: TrajectorySpec,
    start: Vector3<f64>,
    orientation: UnitQuaternion<f64>,
}

impl SquarePath {
    pub fn new(spec: &TrajectorySpec, start: Vector3<f64>, orientation: UnitQuaternion<f64>) -> Self {
        Self {
            spec: spec.clone(),
            start,
            orientation,
        }
    }

    /// Corner k (0..=3) of the square, counter-clockwise in y-z.
    fn corner(&self, k: usize, side: f64) -> Vector3<f64> {
        let (dy, dz) = match k % 4 {
            0 => (0.0, 0.0),
            1 => (side, 0.0),
            2 => (side, side),
            _ => (0.0, side),
        };
        self.start + Vector3::new(0.0, dy, dz)
    }

    pub fn sample(&self, t: f64) -> TaskReference {
        match self.spec {
            TrajectorySpec::Hold => TaskReference {
                position: self.start,
                orientation: self.orientation,
                velocity: Vector6::zeros(),
            },
            TrajectorySpec::Square { segment_time, side } => {
                let total = 4.0 * segment_time;
                if t >= total {
                    return TaskReference {
                        position: self.start,
                        orientation: self.orientation,
                        velocity: Vector6::zeros(),
                    };
                }
                let seg = (t / segment_time).floor().min(3.0) as usize;
                let local = t - seg as f64 * segment_time;
                let from = self.corner(seg, side);
                let to = self.corner(seg + 1, side);
                let (s, sd, _) = quintic_scalar(local, segment_time);
                let position = from + (to - from) * s;
                let mut velocity = Vector6::zeros();
                velocity
                    .fixed_rows_mut::<3>(0)
                    .copy_from(&((to - from) * sd));
                TaskReference {
                    position,
                    orientation: self.orientation,
                    velocity,
                }
            }
        }
    }
}
