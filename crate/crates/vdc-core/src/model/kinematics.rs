//! Forward kinematics, geometric Jacobian, and the body velocity recursion.

use nalgebra::{DMatrix, DVector, Vector3, Vector6};

use crate::spatial::{FrameId, SpatialVelocity};

use super::{Pose, RobotModel};

/// World poses of every `B_i` and `T_i` frame.
#[derive(Debug, Clone)]
pub struct ChainPoses {
    pub body: Vec<Pose>,
    pub tip: Vec<Pose>,
}

impl ChainPoses {
    pub fn end_effector(&self) -> &Pose {
        self.tip.last().expect("chain is non-empty")
    }
}

impl RobotModel {
    pub fn forward_kinematics(&self, q: &DVector<f64>) -> ChainPoses {
        assert_eq!(q.len(), self.dof());
        let n = self.dof();
        let mut body = Vec::with_capacity(n);
        let mut tip = Vec::with_capacity(n);
        let mut prev = Pose::identity();
        for i in 0..n {
            let jt = self.joint_transform(i, q[i]);
            let b = Pose {
                rotation: prev.rotation * jt.rotation(),
                position: prev.position + prev.rotation * jt.offset(),
            };
            let tt = self.tip_transform(i);
            let t = Pose {
                rotation: b.rotation * tt.rotation(),
                position: b.position + b.rotation * tt.offset(),
            };
            body.push(b);
            prev = t;
            tip.push(t);
        }
        ChainPoses { body, tip }
    }

    /// World-frame geometric Jacobian at the end-effector point, rows
    /// ordered `[linear, angular]`, so `xdot = J qdot`.
    pub fn jacobian(&self, q: &DVector<f64>) -> DMatrix<f64> {
        let poses = self.forward_kinematics(q);
        let p_ee = poses.end_effector().position;
        let n = self.dof();
        let mut j = DMatrix::zeros(6, n);
        for i in 0..n {
            let axis_world: Vector3<f64> = poses.body[i].rotation * self.link(i).axis.vector();
            let lever = axis_world.cross(&(p_ee - poses.body[i].position));
            j.view_mut((0, i), (3, 1)).copy_from(&lever);
            j.view_mut((3, i), (3, 1)).copy_from(&axis_world);
        }
        j
    }

    /// Per-body spatial velocities from the forward recursion, each in its
    /// own `B_i` frame. Ground is assumed at rest.
    pub fn body_velocity_recursion(
        &self,
        q: &DVector<f64>,
        qd: &DVector<f64>,
    ) -> Vec<SpatialVelocity> {
        assert_eq!(q.len(), self.dof());
        assert_eq!(qd.len(), self.dof());
        let mut out = Vec::with_capacity(self.dof());
        let mut parent = SpatialVelocity::zero(FrameId::Ground);
        for i in 0..self.dof() {
            let jt = self.joint_transform(i, q[i]);
            let mut v = jt
                .transform_velocity(&parent)
                .expect("recursion frames are consistent");
            v.angular += self.link(i).axis.vector() * qd[i];
            parent = self
                .tip_transform(i)
                .transform_velocity(&v)
                .expect("recursion frames are consistent");
            out.push(v);
        }
        out
    }

    /// End-effector task-space velocity `[v, w]` in world coordinates,
    /// computed from the body recursion (not the Jacobian).
    pub fn ee_velocity_from_recursion(&self, q: &DVector<f64>, qd: &DVector<f64>) -> Vector6<f64> {
        let vels = self.body_velocity_recursion(q, qd);
        let n = self.dof();
        let tip_local = self
            .tip_transform(n - 1)
            .transform_velocity(&vels[n - 1])
            .expect("recursion frames are consistent");
        let r = self.forward_kinematics(q).end_effector().rotation;
        let mut out = Vector6::zeros();
        out.fixed_rows_mut::<3>(0).copy_from(&(r * tip_local.linear));
        out.fixed_rows_mut::<3>(3).copy_from(&(r * tip_local.angular));
        out
    }
}
