//! Robot description file schema (TOML) and conversion to the runtime model.
//!
//! Inertias are given about the link COM and converted to the `B_i` origin
//! with the parallel-axis shift. Physical consistency of every link is
//! validated on load (positive definiteness of the SPD parameter image).
//! Unknown keys are rejected.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Result, VdcError};
use crate::nal::InertialParams;

use super::{JointAxis, Link, RobotModel};

/// Shipped default 7-DoF arm. Link lengths and masses are plausible for an
/// upper-limb exoskeleton but are NOT measurements of any particular
/// hardware; correctness of the workbench is established by properties,
/// not by matching a specific robot.
pub const DEFAULT_ROBOT_TOML: &str = include_str!("../../assets/robot_7dof.toml");

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotDescription {
    pub name: String,
    /// World-frame gravity vector, m/s^2.
    pub gravity: [f64; 3],
    pub links: Vec<LinkDescription>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkDescription {
    pub name: String,
    pub axis: JointAxis,
    /// Fixed mount rotation from the previous tip frame, roll-pitch-yaw in
    /// degrees (`R = Rz(yaw) Ry(pitch) Rx(roll)`).
    #[serde(default)]
    pub mount_rpy_deg: [f64; 3],
    /// Fixed mount offset from the previous tip frame origin, metres,
    /// expressed in the previous tip frame.
    #[serde(default)]
    pub mount_offset: [f64; 3],
    #[serde(default)]
    pub tip_rpy_deg: [f64; 3],
    #[serde(default)]
    pub tip_offset: [f64; 3],
    /// Link mass, kg.
    pub mass: f64,
    /// COM position in the body frame, metres.
    pub com: [f64; 3],
    /// Rotational inertia about the COM, body-frame axes:
    /// `[Ixx, Iyy, Izz, Ixy, Iyz, Ixz]`, kg m^2.
    pub inertia_com: [f64; 6],
    /// Reflected actuator inertia about the joint axis, kg m^2.
    pub actuator_inertia: f64,
    /// Rotor mass used to complete the actuator parameter vector, kg.
    pub rotor_mass: f64,
    /// `[lower, upper]` joint limits, rad.
    pub joint_limits: [f64; 2],
}

fn rpy_matrix(rpy_deg: &[f64; 3]) -> Matrix3<f64> {
    let r = rpy_deg[0].to_radians();
    let p = rpy_deg[1].to_radians();
    let y = rpy_deg[2].to_radians();
    nalgebra::Rotation3::from_euler_angles(r, p, y).into_inner()
}

impl LinkDescription {
    fn to_link(&self) -> Result<Link> {
        let com = Vector3::from(self.com);
        let [ixx, iyy, izz, ixy, iyz, ixz] = self.inertia_com;
        let i_com = Matrix3::new(ixx, ixy, ixz, ixy, iyy, iyz, ixz, iyz, izz);
        // Parallel-axis shift to the body-frame origin.
        let shift = (Matrix3::identity() * com.norm_squared() - com * com.transpose()) * self.mass;
        let i_origin = i_com + shift;
        let phi = InertialParams {
            mass: self.mass,
            first_moment: (com * self.mass).into(),
            inertia: [
                i_origin[(0, 0)],
                i_origin[(1, 1)],
                i_origin[(2, 2)],
                i_origin[(0, 1)],
                i_origin[(1, 2)],
                i_origin[(0, 2)],
            ],
        };
        if self.actuator_inertia <= 0.0 || self.rotor_mass <= 0.0 {
            return Err(VdcError::Config(format!(
                "link '{}': actuator inertia and rotor mass must be positive",
                self.name
            )));
        }
        // Spherically symmetric rotor: its moment of inertia about the
        // joint axis is the reflected actuator inertia.
        let rotor = InertialParams {
            mass: self.rotor_mass,
            first_moment: [0.0; 3],
            inertia: [
                self.actuator_inertia,
                self.actuator_inertia,
                self.actuator_inertia,
                0.0,
                0.0,
                0.0,
            ],
        };
        Ok(Link {
            mount_rotation: rpy_matrix(&self.mount_rpy_deg),
            mount_offset: Vector3::from(self.mount_offset),
            axis: self.axis,
            tip_rotation: rpy_matrix(&self.tip_rpy_deg),
            tip_offset: Vector3::from(self.tip_offset),
            phi,
            rotor,
            joint_limits: (self.joint_limits[0], self.joint_limits[1]),
        })
    }
}

impl RobotDescription {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| VdcError::Config(format!("robot description: {e}")))
    }

    pub fn default_seven_dof() -> Self {
        Self::from_toml_str(DEFAULT_ROBOT_TOML).expect("embedded default robot parses")
    }

    pub fn build(&self) -> Result<RobotModel> {
        let links = self
            .links
            .iter()
            .map(|l| l.to_link())
            .collect::<Result<Vec<_>>>()?;
        RobotModel::new(links, Vector3::from(self.gravity))
    }
}

impl RobotModel {
    pub fn default_seven_dof() -> Self {
        RobotDescription::default_seven_dof()
            .build()
            .expect("embedded default robot is consistent")
    }
}
