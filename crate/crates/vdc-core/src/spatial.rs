//! Frame-tagged 6D spatial vector and transform arithmetic.
//!
//! Spatial vectors stack the linear part on top of the angular part:
//! a velocity is `[v, w]` and a wrench is `[f, m]`. Every vector carries
//! the frame it is expressed in, and transforms check the tags at runtime;
//! silent frame mixing is the dominant bug class in this domain, so the
//! checks are not optional.
//!
//! The 6x6 transform between a proximal frame and a distal frame is
//!
//! ```text
//! U = | R            0 |
//!     | skew(r) R    R |
//! ```
//!
//! with `R` the rotation and `r` the offset, both expressed in the proximal
//! frame. `U^T` maps velocities proximal -> distal, `U` maps wrenches
//! distal -> proximal; the pair is dual, so instantaneous power is
//! preserved.

use nalgebra::{Matrix3, Matrix6, Quaternion, UnitQuaternion, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Result, VdcError};

/// Identifies the frame a spatial quantity is expressed in.
///
/// `Body(i)` and `Tip(i)` are the proximal/distal frames of link `i`
/// (1-based); `Ground` doubles as the inertial/task frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FrameId {
    Ground,
    Body(u8),
    Tip(u8),
}

/// 6D velocity `[linear, angular]` tagged with its frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialVelocity {
    pub linear: Vector3<f64>,
    pub angular: Vector3<f64>,
    pub frame: FrameId,
}

impl SpatialVelocity {
    pub fn zero(frame: FrameId) -> Self {
        Self {
            linear: Vector3::zeros(),
            angular: Vector3::zeros(),
            frame,
        }
    }

    pub fn from_vector(v: &Vector6<f64>, frame: FrameId) -> Self {
        Self {
            linear: v.fixed_rows::<3>(0).into(),
            angular: v.fixed_rows::<3>(3).into(),
            frame,
        }
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        let mut out = Vector6::zeros();
        out.fixed_rows_mut::<3>(0).copy_from(&self.linear);
        out.fixed_rows_mut::<3>(3).copy_from(&self.angular);
        out
    }

    pub fn is_finite(&self) -> bool {
        self.linear.iter().chain(self.angular.iter()).all(|x| x.is_finite())
    }
}

/// 6D wrench `[force, moment]` tagged with its frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialForce {
    pub force: Vector3<f64>,
    pub moment: Vector3<f64>,
    pub frame: FrameId,
}

impl SpatialForce {
    pub fn zero(frame: FrameId) -> Self {
        Self {
            force: Vector3::zeros(),
            moment: Vector3::zeros(),
            frame,
        }
    }

    pub fn from_vector(v: &Vector6<f64>, frame: FrameId) -> Self {
        Self {
            force: v.fixed_rows::<3>(0).into(),
            moment: v.fixed_rows::<3>(3).into(),
            frame,
        }
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        let mut out = Vector6::zeros();
        out.fixed_rows_mut::<3>(0).copy_from(&self.force);
        out.fixed_rows_mut::<3>(3).copy_from(&self.moment);
        out
    }

    pub fn is_finite(&self) -> bool {
        self.force.iter().chain(self.moment.iter()).all(|x| x.is_finite())
    }
}

/// Rigid transform between two named frames: rotation `R = from_R_to` and
/// offset `r` from the `from` origin to the `to` origin, expressed in `from`.
#[derive(Debug, Clone, Copy)]
pub struct FrameTransform {
    rotation: Matrix3<f64>,
    offset: Vector3<f64>,
    pub from: FrameId,
    pub to: FrameId,
}

const ORTHONORMALITY_TOL: f64 = 1e-9;

impl FrameTransform {
    /// Rejects rotations that are not orthonormal with determinant +1
    /// within 1e-9.
    pub fn new(
        rotation: Matrix3<f64>,
        offset: Vector3<f64>,
        from: FrameId,
        to: FrameId,
    ) -> Result<Self> {
        let residual = (rotation.transpose() * rotation - Matrix3::identity()).norm()
            + (rotation.determinant() - 1.0).abs();
        if !residual.is_finite() || residual > ORTHONORMALITY_TOL {
            return Err(VdcError::NonOrthonormalRotation { residual });
        }
        Ok(Self {
            rotation,
            offset,
            from,
            to,
        })
    }

    pub fn identity(from: FrameId, to: FrameId) -> Self {
        Self {
            rotation: Matrix3::identity(),
            offset: Vector3::zeros(),
            from,
            to,
        }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn offset(&self) -> &Vector3<f64> {
        &self.offset
    }

    /// Chains `self` (A -> B) with `next` (B -> C) into A -> C.
    pub fn compose(&self, next: &FrameTransform) -> Result<FrameTransform> {
        if self.to != next.from {
            return Err(VdcError::FrameMismatch {
                expected: self.to,
                found: next.from,
            });
        }
        Ok(FrameTransform {
            rotation: self.rotation * next.rotation,
            offset: self.offset + self.rotation * next.offset,
            from: self.from,
            to: next.to,
        })
    }

    /// The 6x6 force/velocity transform `[[R, 0], [skew(r) R, R]]`.
    pub fn matrix(&self) -> Matrix6<f64> {
        let mut u = Matrix6::zeros();
        let sr = skew(&self.offset) * self.rotation;
        u.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        u.fixed_view_mut::<3, 3>(3, 0).copy_from(&sr);
        u.fixed_view_mut::<3, 3>(3, 3).copy_from(&self.rotation);
        u
    }

    /// Maps a velocity expressed in `from` into `to` coordinates (uses `U^T`).
    pub fn transform_velocity(&self, v: &SpatialVelocity) -> Result<SpatialVelocity> {
        if v.frame != self.from {
            return Err(VdcError::FrameMismatch {
                expected: self.from,
                found: v.frame,
            });
        }
        // U^T [v; w] = [R^T v - R^T skew(r) w; R^T w]
        let rt = self.rotation.transpose();
        Ok(SpatialVelocity {
            linear: rt * (v.linear - self.offset.cross(&v.angular)),
            angular: rt * v.angular,
            frame: self.to,
        })
    }

    /// Maps a wrench expressed in `to` into `from` coordinates (uses `U`).
    pub fn transform_force(&self, f: &SpatialForce) -> Result<SpatialForce> {
        if f.frame != self.to {
            return Err(VdcError::FrameMismatch {
                expected: self.to,
                found: f.frame,
            });
        }
        let force = self.rotation * f.force;
        Ok(SpatialForce {
            moment: self.offset.cross(&force) + self.rotation * f.moment,
            force,
            frame: self.from,
        })
    }
}

/// Cross-product matrix: `skew(r) * x == r.cross(x)`.
pub fn skew(r: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -r.z, r.y, r.z, 0.0, -r.x, -r.y, r.x, 0.0)
}

/// Motion cross product of two spatial velocities (same frame required):
/// `(v1, w1) x (v2, w2) = (w1 x v2 + v1 x w2, w1 x w2)`.
pub fn cross_motion(a: &SpatialVelocity, b: &SpatialVelocity) -> Result<SpatialVelocity> {
    if a.frame != b.frame {
        return Err(VdcError::FrameMismatch {
            expected: a.frame,
            found: b.frame,
        });
    }
    Ok(SpatialVelocity {
        linear: a.angular.cross(&b.linear) + a.linear.cross(&b.angular),
        angular: a.angular.cross(&b.angular),
        frame: a.frame,
    })
}

/// Force cross product: `(v, w) x* (f, m) = (w x f, w x m + v x f)`.
pub fn cross_force(a: &SpatialVelocity, b: &SpatialForce) -> Result<SpatialForce> {
    if a.frame != b.frame {
        return Err(VdcError::FrameMismatch {
            expected: a.frame,
            found: b.frame,
        });
    }
    Ok(SpatialForce {
        force: a.angular.cross(&b.force),
        moment: a.angular.cross(&b.moment) + a.linear.cross(&b.force),
        frame: a.frame,
    })
}

/// Orientation error as twice the vector part of the error quaternion
/// `q_d * q_actual^-1`, sign-corrected for the shortest rotation.
///
/// Zero iff the orientations coincide; invariant under quaternion sign flip
/// on either argument; small-angle consistent (a rotation by angle `a`
/// about unit axis `n` maps to approximately `a * n`).
pub fn quaternion_error(desired: &UnitQuaternion<f64>, actual: &UnitQuaternion<f64>) -> Vector3<f64> {
    let err: Quaternion<f64> = (desired.into_inner() * actual.into_inner().conjugate()).into();
    let sign = if err.w < 0.0 { -1.0 } else { 1.0 };
    2.0 * sign * err.imag()
}
