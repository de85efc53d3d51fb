//! Regressors, inverse dynamics over the chain recursions, and the plant
//! forward dynamics used by the simulator.
//!
//! The net wrench on a body is linear in its 10 inertial parameters, so the
//! 6x10 regressor is built by evaluating the wrench map on the parameter
//! basis. The Coriolis operator uses the actual body velocity and applies to
//! the reference velocity; with reference = actual this reduces to plain
//! Newton-Euler, which is what the plant integrates.

use nalgebra::{DMatrix, DVector, Matrix6, SMatrix, SVector, Vector3, Vector6};

use crate::error::{Result, VdcError};
use crate::nal::InertialParams;
use crate::spatial::{skew, FrameId, SpatialVelocity};

use super::kinematics::ChainPoses;
use super::RobotModel;

/// Spatial inertia `[[m 1, skew(h)^T], [skew(h), Ibar]]` about the frame
/// origin, for `[linear, angular]` ordered vectors.
pub fn spatial_inertia(phi: &InertialParams) -> Matrix6<f64> {
    let h = skew(&phi.h());
    let mut m = Matrix6::zeros();
    m.fixed_view_mut::<3, 3>(0, 0)
        .copy_from(&(nalgebra::Matrix3::identity() * phi.mass));
    m.fixed_view_mut::<3, 3>(0, 3).copy_from(&h.transpose());
    m.fixed_view_mut::<3, 3>(3, 0).copy_from(&h);
    m.fixed_view_mut::<3, 3>(3, 3).copy_from(&phi.inertia_matrix());
    m
}

/// Force cross product on raw 6-vectors: `(v, w) x* (f, m)`.
pub fn cross_force_raw(motion: &Vector6<f64>, wrench: &Vector6<f64>) -> Vector6<f64> {
    let v: Vector3<f64> = motion.fixed_rows::<3>(0).into();
    let w: Vector3<f64> = motion.fixed_rows::<3>(3).into();
    let f: Vector3<f64> = wrench.fixed_rows::<3>(0).into();
    let m: Vector3<f64> = wrench.fixed_rows::<3>(3).into();
    let mut out = Vector6::zeros();
    out.fixed_rows_mut::<3>(0).copy_from(&w.cross(&f));
    out.fixed_rows_mut::<3>(3).copy_from(&(w.cross(&m) + v.cross(&f)));
    out
}

/// Motion cross product on raw 6-vectors: `(v1, w1) x (v2, w2)`.
fn cross_motion_raw(a: &Vector6<f64>, b: &Vector6<f64>) -> Vector6<f64> {
    let v1: Vector3<f64> = a.fixed_rows::<3>(0).into();
    let w1: Vector3<f64> = a.fixed_rows::<3>(3).into();
    let v2: Vector3<f64> = b.fixed_rows::<3>(0).into();
    let w2: Vector3<f64> = b.fixed_rows::<3>(3).into();
    let mut out = Vector6::zeros();
    out.fixed_rows_mut::<3>(0)
        .copy_from(&(w1.cross(&v2) + v1.cross(&w2)));
    out.fixed_rows_mut::<3>(3).copy_from(&(w1.cross(&w2)));
    out
}

/// Gravity wrench term: with gravity `g` expressed in the body frame, the
/// body must supply `-[m g, h x g]` on top of its motion terms.
fn gravity_wrench(phi: &InertialParams, g_body: &Vector3<f64>) -> Vector6<f64> {
    let mut out = Vector6::zeros();
    out.fixed_rows_mut::<3>(0).copy_from(&(-g_body * phi.mass));
    out.fixed_rows_mut::<3>(3).copy_from(&(-phi.h().cross(g_body)));
    out
}

/// Skew-symmetric Coriolis operator `C(omega)` applied to `v_ref`:
///
/// ```text
/// C(w) = [ m S(w)      -S(w) S(h) ]
///        [ S(h) S(w)   -S(Ibar w) ]
/// ```
///
/// `C(w)` is antisymmetric (so `x^T C(w) x = 0` for every `x`) and satisfies
/// `C(w) V = V x* (M V)` on the actual velocity, so the plant equations are
/// the plain Newton-Euler ones while tracking-error quadratics see no
/// spurious Coriolis power.
fn coriolis_wrench(phi: &InertialParams, omega: &Vector3<f64>, v_ref: &Vector6<f64>) -> Vector6<f64> {
    let h = phi.h();
    let vr: Vector3<f64> = v_ref.fixed_rows::<3>(0).into();
    let wr: Vector3<f64> = v_ref.fixed_rows::<3>(3).into();
    let mut out = Vector6::zeros();
    out.fixed_rows_mut::<3>(0)
        .copy_from(&(omega.cross(&vr) * phi.mass - omega.cross(&h.cross(&wr))));
    out.fixed_rows_mut::<3>(3)
        .copy_from(&(h.cross(&omega.cross(&vr)) - (phi.inertia_matrix() * omega).cross(&wr)));
    out
}

/// Net wrench map: `M(phi) a_ref + C(omega) v_ref + G(phi)`, with `omega`
/// the angular part of the actual velocity `v`. Linear in `phi` by
/// construction; reduces to Newton-Euler when `v_ref == v`.
pub fn body_net_wrench(
    phi: &InertialParams,
    v: &Vector6<f64>,
    v_ref: &Vector6<f64>,
    a_ref: &Vector6<f64>,
    g_body: &Vector3<f64>,
) -> Vector6<f64> {
    let omega: Vector3<f64> = v.fixed_rows::<3>(3).into();
    spatial_inertia(phi) * a_ref + coriolis_wrench(phi, &omega, v_ref) + gravity_wrench(phi, g_body)
}

/// 6x10 rigid-body regressor: `W(v, v_ref, a_ref, g) phi = body_net_wrench`
/// for every `phi`, built column-wise over the parameter basis.
pub fn rigid_body_regressor(
    v: &Vector6<f64>,
    v_ref: &Vector6<f64>,
    a_ref: &Vector6<f64>,
    g_body: &Vector3<f64>,
) -> SMatrix<f64, 6, 10> {
    let mut w = SMatrix::<f64, 6, 10>::zeros();
    for k in 0..10 {
        let mut e = SVector::<f64, 10>::zeros();
        e[k] = 1.0;
        let col = body_net_wrench(&InertialParams::from_vector(&e), v, v_ref, a_ref, g_body);
        w.set_column(k, &col);
    }
    w
}

/// 1x10 actuator regressor: a single entry `qdd_ref` at the slot of the
/// moment of inertia about the joint axis, so `W_a phi_a = I_m qdd_ref`.
pub fn actuator_regressor(qdd_ref: f64, inertia_slot: usize) -> SVector<f64, 10> {
    let mut w = SVector::<f64, 10>::zeros();
    w[inertia_slot] = qdd_ref;
    w
}

/// Forward-pass kinematic state of the chain at one instant: per-body
/// velocities, coordinate accelerations, body-frame gravity, and poses.
#[derive(Debug, Clone)]
pub struct ChainKinematics {
    pub poses: ChainPoses,
    /// `B_i`-frame spatial velocities.
    pub vel: Vec<Vector6<f64>>,
    /// `B_i`-frame coordinate accelerations `d/dt vel`.
    pub acc: Vec<Vector6<f64>>,
    /// Gravity expressed in each `B_i` frame (already scaled).
    pub g_body: Vec<Vector3<f64>>,
}

/// Output of an inverse-dynamics pass.
#[derive(Debug, Clone)]
pub struct InverseDynamics {
    pub tau: DVector<f64>,
    /// Net body wrenches `F*` in each `B_i` frame.
    pub net: Vec<Vector6<f64>>,
    /// Transmitted wrenches `F` in each `B_i` frame.
    pub transmitted: Vec<Vector6<f64>>,
}

impl RobotModel {
    /// Velocity and acceleration recursion down the chain.
    ///
    /// `gravity_scale` lets callers switch gravity off for the
    /// unit-acceleration inertia passes.
    pub fn chain_kinematics(
        &self,
        q: &DVector<f64>,
        qd: &DVector<f64>,
        qdd: &DVector<f64>,
        gravity_scale: f64,
    ) -> ChainKinematics {
        self.chain_kinematics_hybrid(q, qd, qd, qdd, gravity_scale)
    }

    /// Hybrid recursion: propagates the *reference* joint rates `qd_ref`
    /// and accelerations `qdd_ref` through transforms that evolve with the
    /// *actual* rates `qd`. With `qd_ref == qd` this is the plain recursion;
    /// with the controller's required rates it yields the required
    /// velocities and their exact coordinate time derivatives.
    pub fn chain_kinematics_hybrid(
        &self,
        q: &DVector<f64>,
        qd: &DVector<f64>,
        qd_ref: &DVector<f64>,
        qdd_ref: &DVector<f64>,
        gravity_scale: f64,
    ) -> ChainKinematics {
        let n = self.dof();
        let poses = self.forward_kinematics(q);
        let g_world = self.gravity() * gravity_scale;
        let mut vel = Vec::with_capacity(n);
        let mut acc = Vec::with_capacity(n);
        let mut g_body = Vec::with_capacity(n);
        let mut v_parent = SpatialVelocity::zero(FrameId::Ground);
        let mut a_parent = Vector6::zeros();
        for i in 0..n {
            let jt = self.joint_transform(i, q[i]);
            let axis6 = self.link(i).axis.selector();

            let v_prop = jt
                .transform_velocity(&v_parent)
                .expect("recursion frames are consistent");
            let v_prop6 = v_prop.to_vector();
            let v_i = v_prop6 + axis6 * qd_ref[i];

            // Coordinate derivative: the joint transform changes with the
            // actual joint rate, hence the cross term against qd (not
            // qd_ref).
            let a_prop = transform_velocity_raw(&jt, &a_parent);
            let a_i = a_prop + axis6 * qdd_ref[i] + cross_motion_raw(&v_prop6, &(axis6 * qd[i]));

            let g_i = poses.body[i].rotation.transpose() * g_world;

            // Propagate to the tip frame for the next joint.
            let tt = self.tip_transform(i);
            v_parent = tt
                .transform_velocity(&SpatialVelocity::from_vector(&v_i, FrameId::Body(i as u8 + 1)))
                .expect("recursion frames are consistent");
            a_parent = transform_velocity_raw(&tt, &a_i);

            vel.push(v_i);
            acc.push(a_i);
            g_body.push(g_i);
        }
        ChainKinematics {
            poses,
            vel,
            acc,
            g_body,
        }
    }

    /// Inverse dynamics: torques that realize `qdd` at state `(q, qd)` while
    /// the end-effector applies `f_tip_world` (world coordinates, about the
    /// end-effector point) to its surroundings.
    pub fn inverse_dynamics(
        &self,
        q: &DVector<f64>,
        qd: &DVector<f64>,
        qdd: &DVector<f64>,
        f_tip_world: &Vector6<f64>,
        gravity_scale: f64,
    ) -> InverseDynamics {
        let kin = self.chain_kinematics(q, qd, qdd, gravity_scale);
        self.backward_force_pass(&kin, f_tip_world, qdd)
    }

    fn backward_force_pass(
        &self,
        kin: &ChainKinematics,
        f_tip_world: &Vector6<f64>,
        qdd: &DVector<f64>,
    ) -> InverseDynamics {
        let n = self.dof();
        let mut net = vec![Vector6::zeros(); n];
        let mut transmitted = vec![Vector6::zeros(); n];
        let mut tau = DVector::zeros(n);

        for i in 0..n {
            net[i] = body_net_wrench(
                &self.link(i).phi,
                &kin.vel[i],
                &kin.vel[i],
                &kin.acc[i],
                &kin.g_body[i],
            );
        }

        // Tip boundary: rotate the world wrench into the last tip frame.
        let r_ee = kin.poses.end_effector().rotation;
        let mut f_distal = rotate_wrench_raw(&r_ee.transpose(), f_tip_world);

        for i in (0..n).rev() {
            let tt = self.tip_transform(i);
            transmitted[i] = net[i] + transform_force_raw(&tt, &f_distal);
            tau[i] = self.link(i).axis.selector().dot(&transmitted[i])
                + self.link(i).actuator_inertia() * qdd[i];
            // Pass through the joint transform to the parent's tip frame.
            // The relative rotation is recovered from the already-computed
            // poses so the pass does not need q.
            let r_rel = if i == 0 {
                kin.poses.body[i].rotation
            } else {
                kin.poses.tip[i - 1].rotation.transpose() * kin.poses.body[i].rotation
            };
            let offset = self.link(i).mount_offset;
            f_distal = {
                let f: Vector3<f64> = r_rel * Vector3::from(transmitted[i].fixed_rows::<3>(0));
                let m: Vector3<f64> = r_rel * Vector3::from(transmitted[i].fixed_rows::<3>(3));
                let mut out = Vector6::zeros();
                out.fixed_rows_mut::<3>(0).copy_from(&f);
                out.fixed_rows_mut::<3>(3).copy_from(&(offset.cross(&f) + m));
                out
            };
        }

        InverseDynamics {
            tau,
            net,
            transmitted,
        }
    }

    /// Joint-space inertia matrix including actuator inertias, assembled by
    /// unit-acceleration inverse-dynamics passes with gravity off.
    pub fn joint_space_inertia(&self, q: &DVector<f64>) -> DMatrix<f64> {
        let n = self.dof();
        let zero = DVector::zeros(n);
        let f0 = Vector6::zeros();
        let mut m = DMatrix::zeros(n, n);
        for j in 0..n {
            let mut e = DVector::zeros(n);
            e[j] = 1.0;
            let col = self.inverse_dynamics(q, &zero, &e, &f0, 0.0).tau;
            m.set_column(j, &col);
        }
        m
    }

    /// Plant forward dynamics: solves
    /// `(M(q) + diag(I_m)) qdd = tau - bias(q, qd) + J^T f_ext`
    /// with `f_ext` the external wrench applied TO the robot at the
    /// end-effector, world coordinates.
    pub fn forward_dynamics(
        &self,
        q: &DVector<f64>,
        qd: &DVector<f64>,
        tau: &DVector<f64>,
        f_ext_world: &Vector6<f64>,
    ) -> Result<DVector<f64>> {
        let n = self.dof();
        let zero = DVector::zeros(n);
        // The robot applies -f_ext to the surroundings.
        let bias = self
            .inverse_dynamics(q, qd, &zero, &(-f_ext_world), 1.0)
            .tau;
        let m = self.joint_space_inertia(q);
        let rhs = tau - bias;
        m.cholesky()
            .map(|c| c.solve(&rhs))
            .ok_or(VdcError::SingularInertia)
    }

    /// Total mechanical energy (kinetic + gravitational potential),
    /// including rotor kinetic energy about the joint axes.
    pub fn mechanical_energy(&self, q: &DVector<f64>, qd: &DVector<f64>) -> f64 {
        let n = self.dof();
        let kin = self.chain_kinematics(q, qd, &DVector::zeros(n), 1.0);
        let mut e = 0.0;
        for i in 0..n {
            let inertia = spatial_inertia(&self.link(i).phi);
            e += 0.5 * kin.vel[i].dot(&(inertia * kin.vel[i]));
            e += 0.5 * self.link(i).actuator_inertia() * qd[i] * qd[i];
            // PE: -m g . p_com
            let phi = &self.link(i).phi;
            let com_world =
                kin.poses.body[i].position + kin.poses.body[i].rotation * (phi.h() / phi.mass);
            e -= phi.mass * self.gravity().dot(&com_world);
        }
        e
    }

    /// Gravity-compensation torques at rest.
    pub fn gravity_torques(&self, q: &DVector<f64>) -> DVector<f64> {
        let n = self.dof();
        let zero = DVector::zeros(n);
        self.inverse_dynamics(q, &zero, &zero, &Vector6::zeros(), 1.0).tau
    }
}

/// Applies `U^T` of a transform to a raw 6-vector (motion convention).
fn transform_velocity_raw(t: &crate::spatial::FrameTransform, v: &Vector6<f64>) -> Vector6<f64> {
    let rt = t.rotation().transpose();
    let lin: Vector3<f64> = v.fixed_rows::<3>(0).into();
    let ang: Vector3<f64> = v.fixed_rows::<3>(3).into();
    let mut out = Vector6::zeros();
    out.fixed_rows_mut::<3>(0)
        .copy_from(&(rt * (lin - t.offset().cross(&ang))));
    out.fixed_rows_mut::<3>(3).copy_from(&(rt * ang));
    out
}

/// Applies `U` of a transform to a raw 6-vector (wrench convention,
/// distal -> proximal).
fn transform_force_raw(t: &crate::spatial::FrameTransform, f: &Vector6<f64>) -> Vector6<f64> {
    let force: Vector3<f64> = t.rotation() * Vector3::from(f.fixed_rows::<3>(0));
    let moment: Vector3<f64> = t.rotation() * Vector3::from(f.fixed_rows::<3>(3));
    let mut out = Vector6::zeros();
    out.fixed_rows_mut::<3>(0).copy_from(&force);
    out.fixed_rows_mut::<3>(3)
        .copy_from(&(t.offset().cross(&force) + moment));
    out
}

/// Rotates both blocks of a wrench by `r`.
fn rotate_wrench_raw(r: &nalgebra::Matrix3<f64>, f: &Vector6<f64>) -> Vector6<f64> {
    let mut out = Vector6::zeros();
    out.fixed_rows_mut::<3>(0)
        .copy_from(&(r * Vector3::from(f.fixed_rows::<3>(0))));
    out.fixed_rows_mut::<3>(3)
        .copy_from(&(r * Vector3::from(f.fixed_rows::<3>(3))));
    out
}
