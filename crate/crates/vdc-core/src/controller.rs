//! Per-tick control pipeline: impedance design variable, task-to-joint
//! mapping, forward required-velocity recursion, backward required-force
//! recursion, and the joint torque law, with per-subsystem adaptation.
//!
//! Data flow of one tick:
//!
//! ```text
//! (X_d, Xdot_d, f_d, f, X) --impedance--> Xdot_r --J^+--> qd_r --diff/LP--> qdd_r
//! (q, qd, qd_r, qdd_r) --forward recursion--> {V_i, V_ri, d/dt V_ri}
//! {regressor, adaptation, errors} --backward recursion--> {F_ri}
//! {F_ri, e_a, adaptation} --torque law--> tau
//! ```
//!
//! The controller is deterministic: identical inputs and state produce
//! identical torques bit-for-bit.

use nalgebra::{DMatrix, DVector, UnitQuaternion, Vector3, Vector6};

use crate::error::{Result, VdcError};
use crate::model::{actuator_regressor, rigid_body_regressor, RobotModel, RobotState};
use crate::nal::{dual_s_matrix, nal_update, AdaptationState};
use crate::spatial::quaternion_error;

/// Target interaction behavior: diagonal stiffness/damping of the desired
/// impedance and the desired contact force (robot-on-environment, world
/// coordinates). The derived gains satisfy `G_f = B_d^-1` and
/// `G_x = K_d B_d^-1` exactly.
#[derive(Debug, Clone)]
pub struct ImpedanceTarget {
    /// Diagonal of `K_d` (N/m, N*m/rad).
    pub stiffness: Vector6<f64>,
    /// Diagonal of `B_d` (N*s/m, N*m*s/rad).
    pub damping: Vector6<f64>,
    /// Desired force `f_d` the robot should apply to its surroundings.
    pub desired_force: Vector6<f64>,
}

impl ImpedanceTarget {
    pub fn validate(&self) -> Result<()> {
        if self.stiffness.iter().any(|&k| k <= 0.0) || self.damping.iter().any(|&b| b <= 0.0) {
            return Err(VdcError::Config(
                "impedance stiffness and damping diagonals must be strictly positive".into(),
            ));
        }
        Ok(())
    }

    /// Force-error gain `G_f = B_d^-1` (diagonal).
    pub fn gamma_force(&self) -> Vector6<f64> {
        self.damping.map(|b| 1.0 / b)
    }

    /// Pose-error gain `G_x = K_d B_d^-1` (diagonal).
    pub fn gamma_pose(&self) -> Vector6<f64> {
        self.stiffness.component_div(&self.damping)
    }
}

/// Feedback gains of the subsystem control laws.
#[derive(Debug, Clone)]
pub struct ControllerGains {
    /// Diagonal value of the per-body velocity-error gain `K_D`.
    pub body_p: f64,
    /// Diagonal value of the per-body integral gain `K_I`.
    pub body_i: f64,
    /// Per-joint rate-error gain `k_d`.
    pub joint_p: f64,
    /// Per-joint integral gain `k_I`.
    pub joint_i: f64,
    /// Anti-windup clamp on every integral channel (SI units).
    pub integral_limit: f64,
    /// Cutoff of the first-order low-pass applied to the differentiated
    /// required joint accelerations, Hz.
    pub accel_cutoff_hz: f64,
    /// Smallest Jacobian singular value treated as full-rank.
    pub singular_threshold: f64,
    /// Damping of the least-squares fallback near singularities.
    pub dls_lambda: f64,
}

impl Default for ControllerGains {
    fn default() -> Self {
        Self {
            body_p: 0.5,
            body_i: 7.0,
            joint_p: 0.05,
            joint_i: 7.0,
            integral_limit: 50.0,
            accel_cutoff_hz: 50.0,
            singular_threshold: 1e-4,
            dls_lambda: 1e-3,
        }
    }
}

/// Desired task-space motion at one instant.
#[derive(Debug, Clone)]
pub struct TaskReference {
    pub position: Vector3<f64>,
    pub orientation: UnitQuaternion<f64>,
    /// Desired task velocity `[v, w]`, world coordinates.
    pub velocity: Vector6<f64>,
}

/// What the controller is asked to do this tick.
#[derive(Debug, Clone)]
pub enum ControlObjective<'a> {
    /// Impedance-controlled task tracking with a measured interaction force
    /// (robot-on-environment, world coordinates).
    Task {
        reference: &'a TaskReference,
        measured_force: Vector6<f64>,
    },
    /// Joint-space regulation to a fixed configuration (start-up phase).
    JointRegulation {
        target: &'a DVector<f64>,
        rate_gain: f64,
    },
}

/// Mutable controller memory between ticks.
#[derive(Debug, Clone)]
pub struct ControllerState {
    /// Integral of the per-body velocity error, body frames.
    pub body_integral: Vec<Vector6<f64>>,
    /// Integral of the per-joint rate error.
    pub joint_integral: DVector<f64>,
    pub adaptation: AdaptationState,
    prev_qd_r: Option<DVector<f64>>,
    qdd_r_stage1: DVector<f64>,
    qdd_r_filtered: DVector<f64>,
}

impl ControllerState {
    pub fn new(dof: usize, adaptation: AdaptationState) -> Self {
        Self {
            body_integral: vec![Vector6::zeros(); dof],
            joint_integral: DVector::zeros(dof),
            adaptation,
            prev_qd_r: None,
            qdd_r_stage1: DVector::zeros(dof),
            qdd_r_filtered: DVector::zeros(dof),
        }
    }
}

/// Everything the tick computed, for logging and diagnostics.
#[derive(Debug, Clone)]
pub struct TickReport {
    pub tau: DVector<f64>,
    pub qd_r: DVector<f64>,
    pub qdd_r: DVector<f64>,
    /// Required task velocity (task mode only).
    pub xdot_r: Option<Vector6<f64>>,
    /// `[e_p, e_o]` task error (task mode only).
    pub task_error: Option<Vector6<f64>>,
    /// Actual body velocities, `B_i` frames.
    pub v_body: Vec<Vector6<f64>>,
    /// Required body velocities, `B_i` frames.
    pub v_required: Vec<Vector6<f64>>,
    /// Coordinate derivatives of the required body velocities.
    pub a_required: Vec<Vector6<f64>>,
    /// Velocity errors `V_r - V` per body.
    pub e_v: Vec<Vector6<f64>>,
    /// Net required wrenches `F_r*` per body.
    pub net_required: Vec<Vector6<f64>>,
    /// Transmitted required wrenches `F_r` per body.
    pub transmitted_required: Vec<Vector6<f64>>,
    /// Joint rate errors `qd_r - qd`.
    pub e_a: DVector<f64>,
    /// Load pass-through `kappa_i^T F_ri` per joint.
    pub tau_load: DVector<f64>,
    /// Measured and desired tip forces this tick (world, robot-on-env).
    pub measured_force: Vector6<f64>,
    pub desired_force: Vector6<f64>,
    /// True when the damped least-squares fallback was active.
    pub dls_active: bool,
}

/// `Xdot_r = Xdot_d + G_x [e_p, e_o] + G_f (f_d - f)` with the derived
/// diagonal gains.
pub fn impedance_design_variable(
    target: &ImpedanceTarget,
    reference: &TaskReference,
    position: &Vector3<f64>,
    orientation: &UnitQuaternion<f64>,
    measured_force: &Vector6<f64>,
) -> (Vector6<f64>, Vector6<f64>) {
    let mut e = Vector6::zeros();
    e.fixed_rows_mut::<3>(0)
        .copy_from(&(reference.position - position));
    e.fixed_rows_mut::<3>(3)
        .copy_from(&quaternion_error(&reference.orientation, orientation));
    let xdot_r = reference.velocity
        + target.gamma_pose().component_mul(&e)
        + target
            .gamma_force()
            .component_mul(&(target.desired_force - measured_force));
    (xdot_r, e)
}

/// Minimum-norm task-to-joint mapping `qd_r = J^T (J J^T)^-1 Xdot_r`, with a
/// damped fallback near singularities. Returns the solution and whether the
/// fallback was used.
pub fn task_to_joint(
    jacobian: &DMatrix<f64>,
    xdot_r: &Vector6<f64>,
    singular_threshold: f64,
    dls_lambda: f64,
) -> (DVector<f64>, bool) {
    let jjt = jacobian * jacobian.transpose();
    let sigma_min = jjt
        .clone()
        .symmetric_eigenvalues()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
        .max(0.0)
        .sqrt();
    let rhs = DVector::from_column_slice(xdot_r.as_slice());
    if sigma_min >= singular_threshold {
        let sol = jjt.cholesky().expect("JJ^T is PD above threshold").solve(&rhs);
        (jacobian.transpose() * sol, false)
    } else {
        log::warn!(
            "Jacobian near singular (sigma_min = {sigma_min:.3e}); damped least squares active"
        );
        let damped = jjt + DMatrix::identity(6, 6) * (dls_lambda * dls_lambda);
        let sol = damped.cholesky().expect("damped JJ^T is PD").solve(&rhs);
        (jacobian.transpose() * sol, true)
    }
}

fn clamp_vec6(v: &mut Vector6<f64>, limit: f64) {
    for x in v.iter_mut() {
        *x = x.clamp(-limit, limit);
    }
}

/// The controller: immutable model, gains, and impedance target.
#[derive(Debug, Clone)]
pub struct Controller {
    pub model: std::sync::Arc<RobotModel>,
    pub gains: ControllerGains,
    pub impedance: ImpedanceTarget,
}

impl Controller {
    pub fn new(
        model: std::sync::Arc<RobotModel>,
        gains: ControllerGains,
        impedance: ImpedanceTarget,
    ) -> Result<Self> {
        impedance.validate()?;
        Ok(Self {
            model,
            gains,
            impedance,
        })
    }

    /// Runs one control period: computes the torque command, updates the
    /// integral accumulators and the adaptation state.
    pub fn control_tick(
        &self,
        state: &RobotState,
        objective: &ControlObjective,
        mem: &mut ControllerState,
        dt: f64,
    ) -> Result<TickReport> {
        let n = self.model.dof();
        if !(state.q.iter().all(|x| x.is_finite()) && state.qd.iter().all(|x| x.is_finite())) {
            return Err(VdcError::NonFinite {
                context: "controller input state".into(),
            });
        }

        // --- Task-space design variable and joint-space required rates ----
        let (qd_r, xdot_r, task_error, measured_force, desired_force, dls_active) = match objective
        {
            ControlObjective::Task {
                reference,
                measured_force,
            } => {
                if !measured_force.iter().all(|x| x.is_finite()) {
                    return Err(VdcError::NonFinite {
                        context: "measured interaction force".into(),
                    });
                }
                let (xdot_r, e) = impedance_design_variable(
                    &self.impedance,
                    reference,
                    &state.ee_position,
                    &state.ee_orientation,
                    measured_force,
                );
                let j = self.model.jacobian(&state.q);
                let (qd_r, dls) = task_to_joint(
                    &j,
                    &xdot_r,
                    self.gains.singular_threshold,
                    self.gains.dls_lambda,
                );
                (
                    qd_r,
                    Some(xdot_r),
                    Some(e),
                    *measured_force,
                    self.impedance.desired_force,
                    dls,
                )
            }
            ControlObjective::JointRegulation { target, rate_gain } => {
                let qd_r = (*target - &state.q) * *rate_gain;
                (qd_r, None, None, Vector6::zeros(), Vector6::zeros(), false)
            }
        };

        // --- Required accelerations: backward difference + low-pass -------
        let raw = match &mem.prev_qd_r {
            Some(prev) => (&qd_r - prev) / dt,
            None => DVector::zeros(n),
        };
        let alpha = {
            let tau_f = 1.0 / (2.0 * std::f64::consts::PI * self.gains.accel_cutoff_hz);
            dt / (dt + tau_f)
        };
        // Two cascaded first-order stages (second-order roll-off): the
        // differentiator's gain grows with frequency right up to the sample
        // rate, and a single pole leaves enough of that band to close an
        // unstable loop through the rendered-force feedback.
        mem.qdd_r_stage1 = &mem.qdd_r_stage1 + (raw - &mem.qdd_r_stage1) * alpha;
        mem.qdd_r_filtered =
            &mem.qdd_r_filtered + (&mem.qdd_r_stage1 - &mem.qdd_r_filtered) * alpha;
        let qdd_r = mem.qdd_r_filtered.clone();
        mem.prev_qd_r = Some(qd_r.clone());

        // --- Forward recursions ------------------------------------------
        let required = self
            .model
            .chain_kinematics_hybrid(&state.q, &state.qd, &qd_r, &qdd_r, 1.0);
        let actual = self
            .model
            .chain_kinematics(&state.q, &state.qd, &DVector::zeros(n), 1.0);

        // --- Per-body required net wrenches ------------------------------
        let mut e_v = Vec::with_capacity(n);
        let mut regressors = Vec::with_capacity(n);
        let mut net_required = Vec::with_capacity(n);
        for i in 0..n {
            let err: Vector6<f64> = required.vel[i] - actual.vel[i];
            let w = rigid_body_regressor(
                &actual.vel[i],
                &required.vel[i],
                &required.acc[i],
                &required.g_body[i],
            );
            mem.body_integral[i] += err * dt;
            clamp_vec6(&mut mem.body_integral[i], self.gains.integral_limit);
            let phi_hat = mem.adaptation.body_params(i).to_vector();
            let f_star =
                w * phi_hat + err * self.gains.body_p + mem.body_integral[i] * self.gains.body_i;
            e_v.push(err);
            regressors.push(w);
            net_required.push(f_star);
        }

        // --- Backward required-force recursion ---------------------------
        // Tip boundary: desired force rotated into the last tip frame.
        let r_ee = required.poses.end_effector().rotation;
        let mut distal = rotate6(&r_ee.transpose(), &desired_force);
        let mut transmitted_required = vec![Vector6::zeros(); n];
        let mut tau_load = DVector::zeros(n);
        for i in (0..n).rev() {
            let tt = self.model.tip_transform(i);
            transmitted_required[i] = net_required[i] + wrench_to_parent(&tt, &distal);
            tau_load[i] = self.model.link(i).axis.selector().dot(&transmitted_required[i]);
            let jt = self.model.joint_transform(i, state.q[i]);
            distal = wrench_to_parent(&jt, &transmitted_required[i]);
        }

        // --- Joint torque law --------------------------------------------
        let e_a = &qd_r - &state.qd;
        let mut tau = DVector::zeros(n);
        for i in 0..n {
            mem.joint_integral[i] = (mem.joint_integral[i] + e_a[i] * dt)
                .clamp(-self.gains.integral_limit, self.gains.integral_limit);
            let slot = self.model.link(i).axis.inertia_slot();
            let w_a = actuator_regressor(qdd_r[i], slot);
            let phi_a_hat = mem.adaptation.actuator_params(i).to_vector();
            tau[i] = w_a.dot(&phi_a_hat)
                + self.gains.joint_p * e_a[i]
                + self.gains.joint_i * mem.joint_integral[i]
                + tau_load[i];
        }
        if !tau.iter().all(|x| x.is_finite()) {
            return Err(VdcError::NonFinite {
                context: "torque command".into(),
            });
        }

        // --- Natural adaptation updates ----------------------------------
        for i in 0..n {
            let s_body = regressors[i].transpose() * e_v[i];
            mem.adaptation.body[i] = nal_update(
                &mem.adaptation.body[i],
                &dual_s_matrix(&s_body),
                mem.adaptation.gain,
                dt,
            )?;
            let slot = self.model.link(i).axis.inertia_slot();
            let s_act = actuator_regressor(qdd_r[i], slot) * e_a[i];
            mem.adaptation.actuator[i] = nal_update(
                &mem.adaptation.actuator[i],
                &dual_s_matrix(&s_act),
                mem.adaptation.gain,
                dt,
            )?;
        }

        Ok(TickReport {
            tau,
            qd_r,
            qdd_r,
            xdot_r,
            task_error,
            v_body: actual.vel,
            v_required: required.vel,
            a_required: required.acc,
            e_v,
            net_required,
            transmitted_required,
            e_a,
            tau_load,
            measured_force,
            desired_force,
            dls_active,
        })
    }
}

/// Rotates both blocks of a raw wrench.
fn rotate6(r: &nalgebra::Matrix3<f64>, f: &Vector6<f64>) -> Vector6<f64> {
    let mut out = Vector6::zeros();
    out.fixed_rows_mut::<3>(0)
        .copy_from(&(r * Vector3::from(f.fixed_rows::<3>(0))));
    out.fixed_rows_mut::<3>(3)
        .copy_from(&(r * Vector3::from(f.fixed_rows::<3>(3))));
    out
}

/// Maps a wrench in a transform's distal frame to its proximal frame
/// (rotation plus moment-arm term).
fn wrench_to_parent(t: &crate::spatial::FrameTransform, f: &Vector6<f64>) -> Vector6<f64> {
    let force: Vector3<f64> = t.rotation() * Vector3::from(f.fixed_rows::<3>(0));
    let moment: Vector3<f64> = t.rotation() * Vector3::from(f.fixed_rows::<3>(3));
    let mut out = Vector6::zeros();
    out.fixed_rows_mut::<3>(0).copy_from(&force);
    out.fixed_rows_mut::<3>(3)
        .copy_from(&(t.offset().cross(&force) + moment));
    out
}
