//! Numerical verification of the stability machinery: virtual power flows,
//! the nonnegative accompanying function and its per-tick decrease bound,
//! and the telescoping cancellation of internal power flows.

use nalgebra::{DVector, Vector6};

use crate::controller::{ControllerGains, ControllerState, TickReport};
use crate::error::{Result, VdcError};
use crate::model::{spatial_inertia, RobotModel};
use crate::nal::{bregman_divergence, nal_map};
use crate::spatial::{SpatialForce, SpatialVelocity};

/// Virtual power flow `(V_r - V)^T (F_r - F)` at one frame.
pub fn vpf(
    v_r: &SpatialVelocity,
    v: &SpatialVelocity,
    f_r: &SpatialForce,
    f: &SpatialForce,
) -> Result<f64> {
    if v_r.frame != v.frame || f_r.frame != f.frame || v.frame != f.frame {
        return Err(VdcError::FrameMismatch {
            expected: v_r.frame,
            found: f.frame,
        });
    }
    Ok(vpf_raw(
        &v_r.to_vector(),
        &v.to_vector(),
        &f_r.to_vector(),
        &f.to_vector(),
    ))
}

/// Same inner product on raw coordinate vectors (callers guarantee a shared
/// frame).
pub fn vpf_raw(
    v_r: &Vector6<f64>,
    v: &Vector6<f64>,
    f_r: &Vector6<f64>,
    f: &Vector6<f64>,
) -> f64 {
    (v_r - v).dot(&(f_r - f))
}

/// Tip-port virtual power flow in world coordinates:
/// `(Xdot_r - Xdot)^T (f_d - f)`. Vanishes identically when the desired
/// impedance relation is satisfied exactly.
pub fn tip_vpf(
    xdot_r: &Vector6<f64>,
    xdot: &Vector6<f64>,
    f_d: &Vector6<f64>,
    f: &Vector6<f64>,
) -> f64 {
    (xdot_r - xdot).dot(&(f_d - f))
}

/// One evaluation of the accompanying function.
#[derive(Debug, Clone, Copy)]
pub struct NuRecord {
    /// Accompanying function with the adaptation gain weighting BOTH
    /// Bregman terms (the variant whose decrease the update law cancels
    /// exactly; used for the monotonicity check).
    pub nu: f64,
    /// Alternate weighting with the gain on the body term only (reported,
    /// not checked).
    pub nu_alt: f64,
    /// Instantaneous decrease bound `sum(-e_V^T K_D e_V - k_d e_a^2)` (W).
    pub bound: f64,
    /// Quadratic (tracking/integral) part of `nu`.
    pub quadratic: f64,
    /// Gain-weighted Bregman (estimation) part of `nu`.
    pub bregman: f64,
}

/// Evaluates the accompanying function from the true model parameters
/// (simulation privilege), the controller memory, and the tick report.
///
/// `nu = sum_i [ 1/2 (int e_V)^T K_I (int e_V) + 1/2 e_V^T M_i e_V
///             + 1/2 I_mi e_ai^2 + 1/2 k_I (int e_a)^2
///             + gamma D(L_i || L_hat_i) + gamma D(L_ai || L_hat_ai) ]`
pub fn accompanying_function(
    model: &RobotModel,
    gains: &ControllerGains,
    mem: &ControllerState,
    report: &TickReport,
) -> Result<NuRecord> {
    let n = model.dof();
    let mut quad = 0.0;
    let mut breg_body = 0.0;
    let mut breg_act = 0.0;
    let mut bound = 0.0;
    for i in 0..n {
        let link = model.link(i);
        let m_i = spatial_inertia(&link.phi);
        let e_v = &report.e_v[i];
        quad += 0.5 * gains.body_i * mem.body_integral[i].norm_squared();
        quad += 0.5 * e_v.dot(&(m_i * e_v));
        quad += 0.5 * link.actuator_inertia() * report.e_a[i] * report.e_a[i];
        quad += 0.5 * gains.joint_i * mem.joint_integral[i] * mem.joint_integral[i];
        breg_body += bregman_divergence(&nal_map(&link.phi), &mem.adaptation.body[i])?;
        breg_act += bregman_divergence(&nal_map(&link.rotor), &mem.adaptation.actuator[i])?;
        bound -= gains.body_p * e_v.norm_squared();
        bound -= gains.joint_p * report.e_a[i] * report.e_a[i];
    }
    let gamma = mem.adaptation.gain;
    Ok(NuRecord {
        nu: quad + gamma * (breg_body + breg_act),
        nu_alt: quad + gamma * breg_body + breg_act,
        bound,
        quadratic: quad,
        bregman: gamma * (breg_body + breg_act),
    })
}

/// Power flowing into the estimation error, `sum_i phi_tilde_i^T s_i` with
/// `phi_tilde = phi_hat - phi_true` and `s = W^T e` per subsystem
/// (simulation privilege: requires the true parameters). In the decrease
/// budget the quadratic part of `nu` changes at `bound - flow` while the
/// Bregman part changes at `+flow`; the flow cancels in the sum.
pub fn adaptation_flow(
    model: &RobotModel,
    q: &DVector<f64>,
    mem: &ControllerState,
    report: &TickReport,
) -> f64 {
    use crate::model::{actuator_regressor, rigid_body_regressor};
    let poses = model.forward_kinematics(q);
    let g = model.gravity();
    let mut flow = 0.0;
    for i in 0..model.dof() {
        let link = model.link(i);
        let g_i = poses.body[i].rotation.transpose() * g;
        let w = rigid_body_regressor(
            &report.v_body[i],
            &report.v_required[i],
            &report.a_required[i],
            &g_i,
        );
        let s = w.transpose() * report.e_v[i];
        let tilde = mem.adaptation.body_params(i).to_vector() - link.phi.to_vector();
        flow += tilde.dot(&s);
        let w_a = actuator_regressor(report.qdd_r[i], link.axis.inertia_slot());
        let s_a = w_a * report.e_a[i];
        let tilde_a = mem.adaptation.actuator_params(i).to_vector() - link.rotor.to_vector();
        flow += tilde_a.dot(&s_a);
    }
    flow
}

/// Result of the per-tick internal-cancellation check.
#[derive(Debug, Clone)]
pub struct TelescopingRecord {
    /// Signed residual of the cancellation identity (W).
    pub residual: f64,
    /// Residual divided by the sum of absolute term magnitudes.
    pub relative_residual: f64,
    /// Tip-port VPF used as the boundary term (W).
    pub tip: f64,
    /// Per-body internal VPF contributions `e_V^T (F_r* - F*)` (W).
    pub per_body: Vec<f64>,
}

/// Verifies that all internal virtual power flows cancel, leaving only the
/// tip port:
///
/// `sum_i [ e_Vi^T (F_ri* - F_i*) - e_ai (tau*_ri - tau*_i) ] + p_tip = 0`
///
/// where starred quantities are net wrenches, `tau*_ri = kappa^T F_ri`,
/// `tau*_i = kappa^T F_i = tau_i - I_mi qdd_i`, and the actual-side wrenches
/// come from inverse dynamics at the realized accelerations. This is a pure
/// algebraic identity of the two recursions, independent of model accuracy.
pub fn telescoping_check(
    model: &RobotModel,
    q: &DVector<f64>,
    qd: &DVector<f64>,
    qdd: &DVector<f64>,
    report: &TickReport,
) -> TelescopingRecord {
    let n = model.dof();
    let id = model.inverse_dynamics(q, qd, qdd, &report.measured_force, 1.0);
    let j = model.jacobian(q);
    let xdot_r = Vector6::from_iterator((&j * &report.qd_r).iter().cloned());
    let xdot = Vector6::from_iterator((&j * qd).iter().cloned());
    let tip = tip_vpf(&xdot_r, &xdot, &report.desired_force, &report.measured_force);
    let mut residual = tip;
    let mut scale = tip.abs();
    let mut per_body = Vec::with_capacity(n);
    for i in 0..n {
        let body = report.e_v[i].dot(&(report.net_required[i] - id.net[i]));
        let tau_star_r = report.tau_load[i];
        let tau_star = model.link(i).axis.selector().dot(&id.transmitted[i]);
        let joint = report.e_a[i] * (tau_star_r - tau_star);
        residual += body - joint;
        scale += body.abs() + joint.abs();
        per_body.push(body);
    }
    TelescopingRecord {
        residual,
        relative_residual: residual / scale.max(1e-12),
        tip,
        per_body,
    }
}

/// Violations of the per-tick decrease condition
/// `(nu[k+1] - nu[k]) / dt <= bound[k] + tol`, with
/// `tol = max(abs_tol, rel_tol * |bound[k]|)`. Returns the violating tick
/// indices, ignoring the first `transient_ticks`.
pub fn lyapunov_decrease_check(
    nu: &[f64],
    bound: &[f64],
    dt: f64,
    transient_ticks: usize,
    abs_tol: f64,
    rel_tol: f64,
) -> Vec<usize> {
    let mut violations = Vec::new();
    for k in transient_ticks..nu.len().saturating_sub(1) {
        let rate = (nu[k + 1] - nu[k]) / dt;
        let tol = abs_tol.max(rel_tol * bound[k].abs());
        if rate > bound[k] + tol {
            violations.push(k);
        }
    }
    violations
}
