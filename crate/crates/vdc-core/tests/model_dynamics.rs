//! Oracle tests for the chain model: kinematics against finite differences,
//! dynamics against a closed-form two-link Lagrangian model, regressor
//! linearity, energy conservation, and forward/inverse consistency.

use nalgebra::{DVector, Matrix3, SVector, Vector3, Vector6};
use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vdc_core::model::{
    rigid_body_regressor, spatial_inertia, JointAxis, LinkDescription, RobotDescription,
    RobotModel,
};
use vdc_core::nal::InertialParams;
use vdc_core::spatial::skew;

fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_q(model: &RobotModel, rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_iterator(
        model.dof(),
        model
            .joint_limits()
            .iter()
            .map(|&(lo, hi)| lo + (hi - lo) * rng.gen::<f64>()),
    )
}

fn random_qd(n: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_iterator(n, (0..n).map(|_| rng.gen::<f64>() * 4.0 - 2.0))
}

fn random_consistent_params(rng: &mut ChaCha8Rng) -> InertialParams {
    // Point-ish mass plus a spherical core keeps the SPD image well inside
    // the consistent cone.
    let mass = 0.2 + rng.gen::<f64>() * 3.0;
    let c = Vector3::new(
        rng.gen::<f64>() * 0.2 - 0.1,
        rng.gen::<f64>() * 0.2 - 0.1,
        rng.gen::<f64>() * 0.2 - 0.1,
    );
    let j = 0.002 + rng.gen::<f64>() * 0.01;
    let shift = (Matrix3::identity() * c.norm_squared() - c * c.transpose()) * mass;
    let i = Matrix3::identity() * j + shift;
    InertialParams {
        mass,
        first_moment: (c * mass).into(),
        inertia: [
            i[(0, 0)],
            i[(1, 1)],
            i[(2, 2)],
            i[(0, 1)],
            i[(1, 2)],
            i[(0, 2)],
        ],
    }
}

fn random_vec6(rng: &mut ChaCha8Rng, scale: f64) -> Vector6<f64> {
    Vector6::from_iterator((0..6).map(|_| (rng.gen::<f64>() * 2.0 - 1.0) * scale))
}

// ---------------------------------------------------------------------------
// Regressor linearity
// ---------------------------------------------------------------------------

/// `W phi` must reproduce the net wrench map for arbitrary states and
/// parameters; the regressor is built from the same map evaluated on basis
/// vectors, so the identity holds to rounding error by linearity.
#[test]
fn regressor_matches_net_wrench_on_random_states() {
    let mut rng = seeded(41);
    for _ in 0..1000 {
        let phi = random_consistent_params(&mut rng);
        let v = random_vec6(&mut rng, 2.0);
        let v_ref = random_vec6(&mut rng, 2.0);
        let a_ref = random_vec6(&mut rng, 5.0);
        let g = Vector3::new(
            rng.gen::<f64>() * 4.0 - 2.0,
            rng.gen::<f64>() * 4.0 - 2.0,
            -9.81,
        );
        let direct = vdc_core::model::body_net_wrench(&phi, &v, &v_ref, &a_ref, &g);
        let via_regressor =
            rigid_body_regressor(&v, &v_ref, &a_ref, &g) * SVector::<f64, 10>::from(phi.to_vector());
        let err = (direct - via_regressor).norm();
        let scale = direct.norm().max(1.0);
        assert!(
            err / scale < 1e-12,
            "regressor mismatch: rel err {:.3e}",
            err / scale
        );
    }
}

// ---------------------------------------------------------------------------
// Kinematics against finite differences
// ---------------------------------------------------------------------------

/// Linear rows of the Jacobian against central differences of the
/// end-effector position; angular rows against `dR/dq R^T = skew(axis)`.
#[test]
fn jacobian_matches_finite_differences() {
    let model = RobotModel::default_seven_dof();
    let mut rng = seeded(7);
    let h = 1e-6;
    for _ in 0..25 {
        let q = random_q(&model, &mut rng);
        let j = model.jacobian(&q);
        for i in 0..model.dof() {
            let mut qp = q.clone();
            let mut qm = q.clone();
            qp[i] += h;
            qm[i] -= h;
            let fp = model.forward_kinematics(&qp);
            let fm = model.forward_kinematics(&qm);
            let dp = (fp.end_effector().position - fm.end_effector().position) / (2.0 * h);
            let lin: Vector3<f64> = j.fixed_view::<3, 1>(0, i).into();
            assert!(
                (dp - lin).norm() < 1e-6,
                "linear column {i} off by {:.3e}",
                (dp - lin).norm()
            );
            let dr = (fp.end_effector().rotation - fm.end_effector().rotation) / (2.0 * h);
            let omega_hat = dr * model.forward_kinematics(&q).end_effector().rotation.transpose();
            let ang: Vector3<f64> = j.fixed_view::<3, 1>(3, i).into();
            assert!(
                (omega_hat - skew(&ang)).norm() < 1e-6,
                "angular column {i} off by {:.3e}",
                (omega_hat - skew(&ang)).norm()
            );
        }
    }
}

/// The body velocity recursion and the world-frame Jacobian are two
/// independent routes to the end-effector twist.
#[test]
fn recursion_velocity_matches_jacobian() {
    let model = RobotModel::default_seven_dof();
    let mut rng = seeded(11);
    for _ in 0..200 {
        let q = random_q(&model, &mut rng);
        let qd = random_qd(model.dof(), &mut rng);
        let via_recursion = model.ee_velocity_from_recursion(&q, &qd);
        let via_jacobian = model.jacobian(&q) * &qd;
        let err = (via_recursion - via_jacobian).norm();
        assert!(err < 1e-10, "twist mismatch {err:.3e}");
    }
}

// ---------------------------------------------------------------------------
// Closed-form two-link oracle
// ---------------------------------------------------------------------------

struct TwoLink {
    m: [f64; 2],
    lc: [f64; 2],
    l1: f64,
    jc: [f64; 2],
    im: [f64; 2],
    g: f64,
}

impl TwoLink {
    fn build(&self) -> RobotModel {
        let link = |mass: f64, lc: f64, jc: f64, tip: f64, im: f64| LinkDescription {
            name: "planar".into(),
            axis: JointAxis::Z,
            mount_rpy_deg: [0.0; 3],
            mount_offset: [0.0; 3],
            tip_rpy_deg: [0.0; 3],
            tip_offset: [tip, 0.0, 0.0],
            mass,
            com: [lc, 0.0, 0.0],
            inertia_com: [jc, jc, jc, 0.0, 0.0, 0.0],
            actuator_inertia: im,
            rotor_mass: 0.1,
            joint_limits: [-6.0, 6.0],
        };
        RobotDescription {
            name: "two-link-planar".into(),
            gravity: [0.0, -self.g, 0.0],
            links: vec![
                link(self.m[0], self.lc[0], self.jc[0], self.l1, self.im[0]),
                link(self.m[1], self.lc[1], self.jc[1], 0.25, self.im[1]),
            ],
        }
        .build()
        .expect("two-link model is consistent")
    }

    /// Standard double-pendulum equations with COM rotational inertias and
    /// reflected actuator inertia on the diagonal; angles from the +x axis,
    /// gravity along -y.
    fn torques(&self, q: &[f64; 2], qd: &[f64; 2], qdd: &[f64; 2]) -> [f64; 2] {
        let (m1, m2) = (self.m[0], self.m[1]);
        let (lc1, lc2) = (self.lc[0], self.lc[1]);
        let l1 = self.l1;
        let (i1, i2) = (self.jc[0], self.jc[1]);
        let c2 = q[1].cos();
        let s2 = q[1].sin();
        let m11 = i1 + i2 + m1 * lc1 * lc1 + m2 * (l1 * l1 + lc2 * lc2 + 2.0 * l1 * lc2 * c2);
        let m12 = i2 + m2 * (lc2 * lc2 + l1 * lc2 * c2);
        let m22 = i2 + m2 * lc2 * lc2;
        let hh = m2 * l1 * lc2 * s2;
        let g1 = self.g * ((m1 * lc1 + m2 * l1) * q[0].cos() + m2 * lc2 * (q[0] + q[1]).cos());
        let g2 = self.g * m2 * lc2 * (q[0] + q[1]).cos();
        [
            (m11 + self.im[0]) * qdd[0] + m12 * qdd[1]
                - hh * (2.0 * qd[0] * qd[1] + qd[1] * qd[1])
                + g1,
            m12 * qdd[0] + (m22 + self.im[1]) * qdd[1] + hh * qd[0] * qd[0] + g2,
        ]
    }
}

#[test]
fn inverse_dynamics_matches_two_link_lagrangian() {
    let oracle = TwoLink {
        m: [1.7, 0.9],
        lc: [0.13, 0.16],
        l1: 0.31,
        jc: [0.011, 0.006],
        im: [0.012, 0.007],
        g: 9.81,
    };
    let model = oracle.build();
    let mut rng = seeded(23);
    for _ in 0..300 {
        let q = [rng.gen::<f64>() * 6.0 - 3.0, rng.gen::<f64>() * 6.0 - 3.0];
        let qd = [rng.gen::<f64>() * 4.0 - 2.0, rng.gen::<f64>() * 4.0 - 2.0];
        let qdd = [rng.gen::<f64>() * 8.0 - 4.0, rng.gen::<f64>() * 8.0 - 4.0];
        let expected = oracle.torques(&q, &qd, &qdd);
        let got = model
            .inverse_dynamics(
                &DVector::from_row_slice(&q),
                &DVector::from_row_slice(&qd),
                &DVector::from_row_slice(&qdd),
                &Vector6::zeros(),
                1.0,
            )
            .tau;
        for i in 0..2 {
            assert!(
                (got[i] - expected[i]).abs() < 1e-8,
                "joint {i}: got {} expected {}",
                got[i],
                expected[i]
            );
        }
    }
}

// ---------------------------------------------------------------------------
// Joint-space inertia and consistency
// ---------------------------------------------------------------------------

#[test]
fn joint_inertia_is_symmetric_positive_definite() {
    let model = RobotModel::default_seven_dof();
    let mut rng = seeded(31);
    for _ in 0..50 {
        let q = random_q(&model, &mut rng);
        let m = model.joint_space_inertia(&q);
        let asym = (&m - m.transpose()).norm() / m.norm();
        assert!(asym < 1e-10, "inertia asymmetry {asym:.3e}");
        assert!(m.cholesky().is_some(), "inertia not positive definite");
    }
}

/// Forward dynamics must invert inverse dynamics exactly (same recursions,
/// one Cholesky solve apart).
#[test]
fn forward_inverts_inverse_dynamics() {
    let model = RobotModel::default_seven_dof();
    let mut rng = seeded(37);
    for _ in 0..100 {
        let q = random_q(&model, &mut rng);
        let qd = random_qd(model.dof(), &mut rng);
        let qdd = random_qd(model.dof(), &mut rng) * 3.0;
        let f_ext = random_vec6(&mut rng, 10.0);
        // Environment applies f_ext to the robot; the robot applies -f_ext.
        let tau = model.inverse_dynamics(&q, &qd, &qdd, &(-f_ext), 1.0).tau;
        let qdd_back = model
            .forward_dynamics(&q, &qd, &tau, &f_ext)
            .expect("inertia is SPD");
        assert!(
            (&qdd_back - &qdd).norm() < 1e-8,
            "round trip error {:.3e}",
            (&qdd_back - &qdd).norm()
        );
    }
}

#[test]
fn static_equilibrium_under_gravity_compensation() {
    let model = RobotModel::default_seven_dof();
    let mut rng = seeded(43);
    for _ in 0..20 {
        let q = random_q(&model, &mut rng);
        let tau = model.gravity_torques(&q);
        let qdd = model
            .forward_dynamics(&q, &DVector::zeros(model.dof()), &tau, &Vector6::zeros())
            .expect("inertia is SPD");
        assert!(qdd.norm() < 1e-9, "residual acceleration {:.3e}", qdd.norm());
    }
}

// ---------------------------------------------------------------------------
// Energy
// ---------------------------------------------------------------------------

fn rk4_passive_step(model: &RobotModel, q: &DVector<f64>, qd: &DVector<f64>, dt: f64)
    -> (DVector<f64>, DVector<f64>)
{
    let n = model.dof();
    let tau = DVector::zeros(n);
    let f0 = Vector6::zeros();
    let acc = |q: &DVector<f64>, qd: &DVector<f64>| {
        model.forward_dynamics(q, qd, &tau, &f0).expect("SPD inertia")
    };
    let k1q = qd.clone();
    let k1v = acc(q, qd);
    let k2q = qd + &k1v * (dt / 2.0);
    let k2v = acc(&(q + &k1q * (dt / 2.0)), &k2q);
    let k3q = qd + &k2v * (dt / 2.0);
    let k3v = acc(&(q + &k2q * (dt / 2.0)), &k3q);
    let k4q = qd + &k3v * dt;
    let k4v = acc(&(q + &k3q * dt), &k4q);
    (
        q + (&k1q + &k2q * 2.0 + &k3q * 2.0 + &k4q) * (dt / 6.0),
        qd + (&k1v + &k2v * 2.0 + &k3v * 2.0 + &k4v) * (dt / 6.0),
    )
}

/// A passive unforced swing conserves total mechanical energy. This couples
/// the plant dynamics to the independent energy bookkeeping: an error in
/// either shows up as drift.
#[test]
fn passive_swing_conserves_energy() {
    let model = RobotModel::default_seven_dof();
    let mut q = DVector::from_row_slice(&[0.3, 0.6, 0.2, 1.0, 0.3, 0.5, 0.4]);
    let mut qd = DVector::zeros(model.dof());
    let e0 = model.mechanical_energy(&q, &qd);
    let dt = 1e-3;
    let steps = 2000; // 2 s
    let mut worst: f64 = 0.0;
    for _ in 0..steps {
        let (q2, qd2) = rk4_passive_step(&model, &q, &qd, dt);
        q = q2;
        qd = qd2;
        let e = model.mechanical_energy(&q, &qd);
        worst = worst.max((e - e0).abs());
    }
    let scale = e0.abs().max(1.0);
    assert!(
        worst / scale < 1e-3,
        "energy drift {:.4e} over {} s (scale {scale:.3})",
        worst / scale,
        steps as f64 * dt
    );
}

/// Instantaneous power balance: with torque and an external tip wrench, the
/// rate of change of mechanical energy equals the injected power.
#[test]
fn power_balance_with_external_wrench() {
    let model = RobotModel::default_seven_dof();
    let mut rng = seeded(53);
    for _ in 0..20 {
        let q = random_q(&model, &mut rng);
        let qd = random_qd(model.dof(), &mut rng);
        let tau = DVector::from_iterator(
            model.dof(),
            (0..model.dof()).map(|_| rng.gen::<f64>() * 10.0 - 5.0),
        );
        let f_ext = random_vec6(&mut rng, 8.0);
        let qdd = model
            .forward_dynamics(&q, &qd, &tau, &f_ext)
            .expect("SPD inertia");
        // Finite-difference dE/dt along the true trajectory.
        let h = 1e-6;
        let qp = &q + &qd * h + &qdd * (h * h / 2.0);
        let vp = &qd + &qdd * h;
        let qm = &q - &qd * h + &qdd * (h * h / 2.0);
        let vm = &qd - &qdd * h;
        let de = (model.mechanical_energy(&qp, &vp) - model.mechanical_energy(&qm, &vm))
            / (2.0 * h);
        let xdot = model.jacobian(&q) * &qd;
        let p_in = tau.dot(&qd) + f_ext.dot(&xdot);
        assert!(
            (de - p_in).abs() < 1e-4 * p_in.abs().max(1.0),
            "power mismatch: dE/dt {de:.6} vs input {p_in:.6}"
        );
    }
}

// ---------------------------------------------------------------------------
// Hybrid recursion and the spatial inertia
// ---------------------------------------------------------------------------

/// The hybrid recursion with reference rates equal to actual rates must
/// coincide with the plain recursion, and its accelerations must match
/// finite differences of the velocity recursion along the trajectory.
#[test]
fn hybrid_acceleration_matches_velocity_finite_difference() {
    let model = RobotModel::default_seven_dof();
    let mut rng = seeded(59);
    for _ in 0..20 {
        let q = random_q(&model, &mut rng);
        let qd = random_qd(model.dof(), &mut rng);
        let qd_ref = random_qd(model.dof(), &mut rng);
        let qdd_ref = random_qd(model.dof(), &mut rng) * 2.0;
        let h = 1e-6;
        // Advance actual and reference rates consistently: q moves with qd,
        // qd_ref moves with qdd_ref.
        let kp = model.chain_kinematics_hybrid(
            &(&q + &qd * h),
            &qd,
            &(&qd_ref + &qdd_ref * h),
            &qdd_ref,
            1.0,
        );
        let km = model.chain_kinematics_hybrid(
            &(&q - &qd * h),
            &qd,
            &(&qd_ref - &qdd_ref * h),
            &qdd_ref,
            1.0,
        );
        let k0 = model.chain_kinematics_hybrid(&q, &qd, &qd_ref, &qdd_ref, 1.0);
        for i in 0..model.dof() {
            let fd = (kp.vel[i] - km.vel[i]) / (2.0 * h);
            assert!(
                (fd - k0.acc[i]).norm() < 1e-5,
                "body {i}: coordinate acceleration off by {:.3e}",
                (fd - k0.acc[i]).norm()
            );
        }
    }
}

/// The Coriolis operator must reproduce the Newton-Euler bias on the actual
/// velocity and do zero work along any error direction (antisymmetry).
#[test]
fn coriolis_operator_properties() {
    let mut rng = seeded(61);
    let zero_a = Vector6::zeros();
    let zero_g = Vector3::zeros();
    for _ in 0..300 {
        let phi = random_consistent_params(&mut rng);
        let v = random_vec6(&mut rng, 2.0);
        // On the diagonal it is the classical bias v x* (M v).
        let bias = vdc_core::model::body_net_wrench(&phi, &v, &v, &zero_a, &zero_g);
        let classical =
            vdc_core::model::cross_force_raw(&v, &(spatial_inertia(&phi) * v));
        assert!(
            (bias - classical).norm() < 1e-12 * classical.norm().max(1.0),
            "C(w)v != v x* (Mv): {:.3e}",
            (bias - classical).norm()
        );
        // Antisymmetry: e^T C(w) e = 0 for arbitrary e.
        let e = random_vec6(&mut rng, 3.0);
        let ce = vdc_core::model::body_net_wrench(&phi, &v, &e, &zero_a, &zero_g);
        assert!(
            e.dot(&ce).abs() < 1e-12 * (e.norm() * ce.norm()).max(1.0),
            "Coriolis power along error direction: {:.3e}",
            e.dot(&ce)
        );
    }
}

#[test]
fn spatial_inertia_blocks() {
    let phi = InertialParams {
        mass: 2.0,
        first_moment: [0.2, -0.1, 0.3],
        inertia: [0.05, 0.06, 0.07, 0.001, -0.002, 0.003],
    };
    let m = spatial_inertia(&phi);
    // Upper-left: mass identity; symmetry of the whole matrix.
    assert!((m.fixed_view::<3, 3>(0, 0) - Matrix3::identity() * 2.0).norm() < 1e-15);
    assert!((m - m.transpose()).norm() < 1e-15);
    // Kinetic energy of a pure translation: 1/2 m |v|^2.
    let mut v = Vector6::zeros();
    v.fixed_rows_mut::<3>(0).copy_from(&Vector3::new(1.0, 2.0, 2.0));
    assert!((0.5 * v.dot(&(m * v)) - 0.5 * 2.0 * 9.0).abs() < 1e-12);
}
