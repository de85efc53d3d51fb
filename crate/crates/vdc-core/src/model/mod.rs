//! Kinematic and dynamic description of the joint chain.
//!
//! Each link `i` carries two frames: `B_i` at its joint and `T_i` at the
//! distal cut. The configuration-dependent transform from `T_{i-1}` to
//! `B_i` is a fixed mount transform followed by the joint rotation about
//! the link's local axis; the transform from `B_i` to `T_i` is fixed link
//! geometry. Inertial parameters are expressed about the `B_i` origin.
//!
//! The model is immutable after load; every evaluation is a pure function
//! of its inputs, so sweep workers can share one model freely.

mod description;
mod dynamics;
mod kinematics;

pub use description::{LinkDescription, RobotDescription, DEFAULT_ROBOT_TOML};
pub use dynamics::{
    actuator_regressor, body_net_wrench, cross_force_raw, rigid_body_regressor, spatial_inertia,
    ChainKinematics, InverseDynamics,
};

use nalgebra::{DVector, Matrix3, UnitQuaternion, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Result, VdcError};
use crate::nal::InertialParams;
use crate::spatial::{FrameId, FrameTransform};

/// Local rotation axis of a joint; selects which angular slot of the 6D
/// velocity the joint rate enters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JointAxis {
    X,
    Y,
    Z,
}

impl JointAxis {
    pub fn vector(&self) -> Vector3<f64> {
        match self {
            JointAxis::X => Vector3::x(),
            JointAxis::Y => Vector3::y(),
            JointAxis::Z => Vector3::z(),
        }
    }

    /// 6-vector selector with exactly one unit entry in the angular block.
    pub fn selector(&self) -> Vector6<f64> {
        let mut s = Vector6::zeros();
        s[3 + self.index()] = 1.0;
        s
    }

    pub fn index(&self) -> usize {
        match self {
            JointAxis::X => 0,
            JointAxis::Y => 1,
            JointAxis::Z => 2,
        }
    }

    /// Index into the `[Ixx, Iyy, Izz, ...]` parameter layout of the moment
    /// of inertia about this axis.
    pub fn inertia_slot(&self) -> usize {
        // phi layout: [m, hx, hy, hz, Ixx, Iyy, Izz, Ixy, Iyz, Ixz]
        4 + self.index()
    }

    pub fn rotation(&self, q: f64) -> Matrix3<f64> {
        let (s, c) = q.sin_cos();
        match self {
            JointAxis::X => Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c),
            JointAxis::Y => Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c),
            JointAxis::Z => Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0),
        }
    }
}

/// One link of the chain, fully resolved from the description file.
#[derive(Debug, Clone)]
pub struct Link {
    /// Fixed transform from `T_{i-1}` to the joint frame (pre-rotation).
    pub mount_rotation: Matrix3<f64>,
    pub mount_offset: Vector3<f64>,
    pub axis: JointAxis,
    /// Fixed transform from `B_i` to `T_i`.
    pub tip_rotation: Matrix3<f64>,
    pub tip_offset: Vector3<f64>,
    /// True rigid-body parameters about the `B_i` origin.
    pub phi: InertialParams,
    /// True rotor parameters; the moment of inertia about the joint axis is
    /// the actuator inertia that enters the joint dynamics.
    pub rotor: InertialParams,
    pub joint_limits: (f64, f64),
}

impl Link {
    pub fn actuator_inertia(&self) -> f64 {
        self.rotor.inertia[self.axis.inertia_slot() - 4]
    }
}

/// World-frame pose of a chain frame.
#[derive(Debug, Clone, Copy)]
pub struct Pose {
    pub rotation: Matrix3<f64>,
    pub position: Vector3<f64>,
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            position: Vector3::zeros(),
        }
    }

    pub fn quaternion(&self) -> UnitQuaternion<f64> {
        UnitQuaternion::from_rotation_matrix(&nalgebra::Rotation3::from_matrix_unchecked(
            self.rotation,
        ))
    }
}

/// Joint-space state plus the end-effector pose maintained by the sim.
#[derive(Debug, Clone)]
pub struct RobotState {
    pub q: DVector<f64>,
    pub qd: DVector<f64>,
    pub ee_position: Vector3<f64>,
    pub ee_orientation: UnitQuaternion<f64>,
    /// Task-space velocity `[v, w]` in world coordinates.
    pub ee_velocity: Vector6<f64>,
}

/// The immutable chain model.
#[derive(Debug, Clone)]
pub struct RobotModel {
    links: Vec<Link>,
    gravity: Vector3<f64>,
}

impl RobotModel {
    pub fn new(links: Vec<Link>, gravity: Vector3<f64>) -> Result<Self> {
        if links.is_empty() {
            return Err(VdcError::Config("model needs at least one link".into()));
        }
        for (i, link) in links.iter().enumerate() {
            if link.phi.mass <= 0.0 {
                return Err(VdcError::Config(format!("link {i}: mass must be positive")));
            }
            if !link.phi.is_physically_consistent() {
                return Err(VdcError::Config(format!(
                    "link {i}: inertial parameters are not physically consistent"
                )));
            }
            if !link.rotor.is_physically_consistent() {
                return Err(VdcError::Config(format!(
                    "link {i}: rotor parameters are not physically consistent"
                )));
            }
            if link.joint_limits.0 >= link.joint_limits.1 {
                return Err(VdcError::Config(format!("link {i}: empty joint limit range")));
            }
        }
        Ok(Self { links, gravity })
    }

    pub fn dof(&self) -> usize {
        self.links.len()
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn link(&self, i: usize) -> &Link {
        &self.links[i]
    }

    pub fn gravity(&self) -> Vector3<f64> {
        self.gravity
    }

    pub fn joint_limits(&self) -> Vec<(f64, f64)> {
        self.links.iter().map(|l| l.joint_limits).collect()
    }

    /// Frame id of the proximal frame feeding joint `i` (0-based).
    pub fn parent_frame(&self, i: usize) -> FrameId {
        if i == 0 {
            FrameId::Ground
        } else {
            FrameId::Tip(i as u8)
        }
    }

    /// Configuration-dependent transform `T_{i-1} -> B_i` (0-based `i`).
    pub fn joint_transform(&self, i: usize, q_i: f64) -> FrameTransform {
        let link = &self.links[i];
        let rotation = link.mount_rotation * link.axis.rotation(q_i);
        // Constructed from validated parts; skip the orthonormality check.
        FrameTransform::new(rotation, link.mount_offset, self.parent_frame(i), FrameId::Body(i as u8 + 1))
            .expect("mount rotation validated on load")
    }

    /// Fixed transform `B_i -> T_i` (0-based `i`).
    pub fn tip_transform(&self, i: usize) -> FrameTransform {
        let link = &self.links[i];
        FrameTransform::new(
            link.tip_rotation,
            link.tip_offset,
            FrameId::Body(i as u8 + 1),
            FrameId::Tip(i as u8 + 1),
        )
        .expect("tip rotation validated on load")
    }
}
