//! Deterministic fixed-step closed-loop execution.
//!
//! A run has two phases: a joint-space regulation phase that brings the arm
//! from its randomized initial configuration to the calibrated start
//! configuration, then the impedance-controlled tracking phase with
//! interaction. The plant integrates semi-implicit Euler at `dt / substeps`
//! while controller and interaction are held at the control period (zero
//! order hold). Identical scenarios (including the seed) produce identical
//! logs bit for bit.

mod trajectory;

pub use trajectory::{quintic_scalar, SquarePath, TrajectorySpec};

use nalgebra::{DVector, UnitQuaternion, Vector3, Vector6};
use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::sync::Arc;

use crate::controller::{
    ControlObjective, Controller, ControllerGains, ControllerState, ImpedanceTarget,
};
use crate::diagnostics::{accompanying_function, adaptation_flow, telescoping_check, tip_vpf};
use crate::error::{Result, VdcError};
use crate::interaction::{
    compose_external_force, ContactState, DissipativeElement, HumanArm, InteractionMode,
    VirtualWall,
};
use crate::model::{RobotModel, RobotState};
use crate::nal::{perturbed_consistent, AdaptationState};

/// Wall description relative to the start pose (the plane offset is
/// resolved once the calibrated start position is known).
#[derive(Debug, Clone)]
pub struct WallSpec {
    pub stiffness: f64,
    /// Unit pressing direction in world coordinates.
    pub axis: Vector3<f64>,
    /// Plane offset along the axis, measured from the start position (m).
    pub offset_from_start: f64,
    pub element: DissipativeElement,
    pub trapezoidal: bool,
}

/// Human arm parameter block (diagonals).
#[derive(Debug, Clone)]
pub struct HumanArmSpec {
    pub mass: Vector6<f64>,
    pub damping: Vector6<f64>,
    pub stiffness: Vector6<f64>,
}

impl Default for HumanArmSpec {
    fn default() -> Self {
        // Matches `HumanArm::default_at`: translational 1.5 / 15 / 150,
        // rotational 0.05 / 0.5 / 5 (SI units per channel).
        Self {
            mass: Vector6::new(1.5, 1.5, 1.5, 0.05, 0.05, 0.05),
            damping: Vector6::new(15.0, 15.0, 15.0, 0.5, 0.5, 0.5),
            stiffness: Vector6::new(150.0, 150.0, 150.0, 5.0, 5.0, 5.0),
        }
    }
}

/// Start-up regulation phase parameters.
#[derive(Debug, Clone)]
pub struct RegulationSpec {
    /// Maximum regulation time (s).
    pub duration: f64,
    /// Required-rate gain `qd_r = gain (q* - q)`.
    pub rate_gain: f64,
    /// Joint tolerance declaring the start configuration reached (rad).
    pub tolerance: f64,
    /// Joint-rate tolerance for the handoff to the tracking phase (rad/s).
    pub rate_tolerance: f64,
}

impl Default for RegulationSpec {
    fn default() -> Self {
        Self {
            duration: 12.0,
            rate_gain: 4.0,
            tolerance: 1e-4,
            rate_tolerance: 5e-4,
        }
    }
}

/// A complete, self-contained run description.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub model: Arc<RobotModel>,
    pub gains: ControllerGains,
    pub impedance: ImpedanceTarget,
    pub trajectory: TrajectorySpec,
    pub wall: Option<WallSpec>,
    pub human: Option<HumanArmSpec>,
    pub mode: InteractionMode,
    /// Tracking-phase duration (s).
    pub duration: f64,
    /// Control period (s).
    pub dt: f64,
    /// Plant sub-steps per control period.
    pub substeps: usize,
    pub seed: u64,
    /// Calibrated start configuration (rad).
    pub start_q: DVector<f64>,
    /// Half-width of the uniform randomization of the initial configuration
    /// around the start configuration (rad).
    pub initial_q_window: f64,
    pub regulation: RegulationSpec,
    /// Adaptation gain (shared by all subsystems).
    pub adaptation_gain: f64,
    /// Multiplicative parameter error seeding the estimates (fraction).
    pub parameter_error: f64,
    /// Standard deviation of optional force-sensor noise (N); 0 disables.
    pub force_noise_sigma: f64,
}

impl Scenario {
    /// Default impedance parameters: `K_d = 100 diag(2,2,1,1,1,1)`,
    /// `B_d = 40 I`, zero desired force.
    pub fn default_impedance() -> ImpedanceTarget {
        ImpedanceTarget {
            stiffness: Vector6::new(200.0, 200.0, 100.0, 100.0, 100.0, 100.0),
            damping: Vector6::repeat(40.0),
            desired_force: Vector6::zeros(),
        }
    }

    /// Default calibrated start configuration for the shipped arm: bent
    /// mid-workspace pose, well away from singularities.
    pub fn default_start_q() -> DVector<f64> {
        DVector::from_row_slice(&[0.3, 0.6, 0.2, 1.0, 0.3, 0.5, 0.4])
    }

    /// Free-motion template: no wall, no human, constant desired pose.
    pub fn free_motion(duration: f64) -> Self {
        Self {
            model: Arc::new(RobotModel::default_seven_dof()),
            gains: ControllerGains::default(),
            impedance: Self::default_impedance(),
            trajectory: TrajectorySpec::Hold,
            wall: None,
            human: None,
            mode: InteractionMode::Assist,
            duration,
            dt: 1e-3,
            substeps: 10,
            seed: 1,
            start_q: Self::default_start_q(),
            initial_q_window: 0.15,
            regulation: RegulationSpec::default(),
            adaptation_gain: 10.0,
            parameter_error: 0.3,
            force_noise_sigma: 0.0,
        }
    }

    /// Contact template: square path pressing into a wall above the start
    /// pose, with the coupled human arm.
    pub fn contact(segment_time: f64, stiffness: f64, element: DissipativeElement) -> Self {
        let mut s = Self::free_motion(4.0 * segment_time + 1.0);
        s.trajectory = TrajectorySpec::Square {
            segment_time,
            side: 0.10,
        };
        s.wall = Some(WallSpec {
            stiffness,
            axis: Vector3::z(),
            offset_from_start: 0.09,
            element,
            trapezoidal: false,
        });
        s.human = Some(HumanArmSpec::default());
        s.mode = InteractionMode::Contact;
        s
    }

    pub fn validate(&self) -> Result<()> {
        if self.dt <= 0.0 || self.duration < 0.0 || self.substeps == 0 {
            return Err(VdcError::Config(
                "dt must be positive, duration nonnegative, substeps >= 1".into(),
            ));
        }
        if self.start_q.len() != self.model.dof() {
            return Err(VdcError::Config(
                "start configuration length does not match the model".into(),
            ));
        }
        self.impedance.validate()?;
        Ok(())
    }
}

/// How a run ended.
#[derive(Debug, Clone, PartialEq)]
pub enum RunOutcome {
    Completed,
    /// Aborted: a state variable left the finite/bounded envelope.
    BlownUp { t: f64, context: String },
    /// Phase 1 failed to reach the start configuration.
    RegulationFailed { max_err: f64 },
}

/// One per-tick record of the tracking phase.
#[derive(Debug, Clone)]
pub struct TickRecord {
    pub t: f64,
    pub q: DVector<f64>,
    pub qd: DVector<f64>,
    pub ee_position: Vector3<f64>,
    pub ee_orientation: UnitQuaternion<f64>,
    pub desired_position: Vector3<f64>,
    pub position_error: Vector3<f64>,
    pub orientation_error: Vector3<f64>,
    /// Force the robot applies to its surroundings (world).
    pub f: Vector6<f64>,
    pub f_contact: f64,
    pub f_human: Vector6<f64>,
    pub contact_energy: f64,
    pub tau: DVector<f64>,
    pub nu: f64,
    pub nu_alt: f64,
    pub nu_bound: f64,
    /// Quadratic (tracking/integral) part of `nu`.
    pub nu_quadratic: f64,
    /// Gain-weighted Bregman (estimation) part of `nu`.
    pub nu_bregman: f64,
    /// Power into the estimation error, `sum phi_tilde^T s` (W).
    pub adaptation_flow: f64,
    pub vpf_body: Vec<f64>,
    pub tip_vpf: f64,
    pub telescoping_residual: f64,
    pub telescoping_relative: f64,
    pub lhat_min_body: Vec<f64>,
    pub lhat_min_actuator: Vec<f64>,
    pub dls_active: bool,
}

/// Append-only log of a run plus its outcome.
#[derive(Debug, Clone)]
pub struct RunLog {
    pub dt: f64,
    pub records: Vec<TickRecord>,
    pub outcome: RunOutcome,
    /// Wall-plane offset actually used (world units), if a wall was active.
    pub wall_offset: Option<f64>,
}

/// Aggregate metrics of a run.
#[derive(Debug, Clone, serde::Serialize)]
pub struct RunSummary {
    pub completed: bool,
    pub ticks: usize,
    pub rms_position_error_xy: f64,
    pub rms_position_error_z: f64,
    pub rms_orientation_error_deg: f64,
    pub max_orientation_error_deg: f64,
    pub max_position_error_xy: f64,
    pub max_contact_force: f64,
    pub max_force: f64,
    pub rms_torque: f64,
    pub min_contact_energy: f64,
    pub passive: bool,
    pub min_lhat_eigenvalue: f64,
    pub max_telescoping_relative: f64,
    pub final_position_error: f64,
}

/// Slack absorbing integration roundoff in the passivity verdict (J).
pub const PASSIVITY_SLACK: f64 = 1e-6;

impl RunLog {
    pub fn summary(&self) -> RunSummary {
        let n = self.records.len().max(1) as f64;
        let mut sq_xy = 0.0;
        let mut sq_z = 0.0;
        let mut sq_o = 0.0;
        let mut sq_tau = 0.0;
        let mut max_fc: f64 = 0.0;
        let mut max_f: f64 = 0.0;
        let mut max_exy: f64 = 0.0;
        let mut max_eo: f64 = 0.0;
        let mut min_ec: f64 = 0.0;
        let mut min_eig = f64::INFINITY;
        let mut max_tele: f64 = 0.0;
        for r in &self.records {
            let exy = (r.position_error[0] * r.position_error[0]
                + r.position_error[1] * r.position_error[1])
                .sqrt();
            sq_xy += exy * exy;
            sq_z += r.position_error[2] * r.position_error[2];
            sq_o += r.orientation_error.norm_squared();
            sq_tau += r.tau.norm_squared();
            max_fc = max_fc.max(r.f_contact);
            max_f = max_f.max(r.f.norm());
            max_exy = max_exy.max(exy);
            max_eo = max_eo.max(r.orientation_error.norm());
            min_ec = min_ec.min(r.contact_energy);
            for &e in r.lhat_min_body.iter().chain(r.lhat_min_actuator.iter()) {
                min_eig = min_eig.min(e);
            }
            max_tele = max_tele.max(r.telescoping_relative.abs());
        }
        RunSummary {
            completed: self.outcome == RunOutcome::Completed,
            ticks: self.records.len(),
            rms_position_error_xy: (sq_xy / n).sqrt(),
            rms_position_error_z: (sq_z / n).sqrt(),
            rms_orientation_error_deg: (sq_o / n).sqrt().to_degrees(),
            max_orientation_error_deg: max_eo.to_degrees(),
            max_position_error_xy: max_exy,
            max_contact_force: max_fc,
            max_force: max_f,
            rms_torque: (sq_tau / n).sqrt(),
            min_contact_energy: min_ec,
            passive: min_ec >= -PASSIVITY_SLACK,
            min_lhat_eigenvalue: if min_eig.is_finite() { min_eig } else { 0.0 },
            max_telescoping_relative: max_tele,
            final_position_error: self
                .records
                .last()
                .map(|r| r.position_error.norm())
                .unwrap_or(0.0),
        }
    }
}

/// Pose of the end effector in task coordinates `[p, rotation vector]`.
fn task_pose(position: &Vector3<f64>, orientation: &UnitQuaternion<f64>) -> Vector6<f64> {
    let mut x = Vector6::zeros();
    x.fixed_rows_mut::<3>(0).copy_from(position);
    x.fixed_rows_mut::<3>(3).copy_from(&orientation.scaled_axis());
    x
}

fn refresh_state(model: &RobotModel, state: &mut RobotState) {
    let poses = model.forward_kinematics(&state.q);
    let ee = poses.end_effector();
    state.ee_position = ee.position;
    state.ee_orientation = ee.quaternion();
    let xdot = model.jacobian(&state.q) * &state.qd;
    state.ee_velocity = Vector6::from_iterator(xdot.iter().cloned());
}

/// Semi-implicit Euler plant step over one control period with the torque
/// and external wrench held constant.
fn plant_step(
    model: &RobotModel,
    state: &mut RobotState,
    tau: &DVector<f64>,
    f_ext_world: &Vector6<f64>,
    dt: f64,
    substeps: usize,
) -> Result<DVector<f64>> {
    let h = dt / substeps as f64;
    let mut first_qdd = None;
    for _ in 0..substeps {
        let qdd = model.forward_dynamics(&state.q, &state.qd, tau, f_ext_world)?;
        if first_qdd.is_none() {
            first_qdd = Some(qdd.clone());
        }
        state.qd += &qdd * h;
        state.q += &state.qd * h;
        // Catch divergence between substeps: a non-finite configuration
        // would otherwise reach the kinematics and abort the process
        // instead of the run.
        if !state.q.iter().chain(state.qd.iter()).all(|x| x.is_finite()) {
            return Err(VdcError::NonFinite { context: "plant substep state" });
        }
    }
    refresh_state(model, state);
    Ok(first_qdd.expect("substeps >= 1"))
}

fn bounded(state: &RobotState) -> bool {
    state.q.iter().all(|x| x.is_finite() && x.abs() < 50.0)
        && state.qd.iter().all(|x| x.is_finite() && x.abs() < 200.0)
}

/// Executes a scenario. Configuration errors return `Err`; numeric blow-up
/// and regulation failure are reported in the log outcome so sweeps can
/// treat them as verdicts.
pub fn run_scenario(scenario: &Scenario) -> Result<RunLog> {
    scenario.validate()?;
    let model = scenario.model.as_ref();
    let n = model.dof();
    let dt = scenario.dt;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);

    // Randomized initial configuration within the joint limits.
    let limits = model.joint_limits();
    let mut q0 = scenario.start_q.clone();
    for i in 0..n {
        let delta = (rng.gen::<f64>() * 2.0 - 1.0) * scenario.initial_q_window;
        q0[i] = (q0[i] + delta).clamp(limits[i].0, limits[i].1);
    }

    // Adaptation seeded with a known parameter error.
    let body = (0..n)
        .map(|i| perturbed_consistent(&model.link(i).phi, scenario.parameter_error, &mut rng))
        .collect();
    let actuator = (0..n)
        .map(|i| perturbed_consistent(&model.link(i).rotor, scenario.parameter_error, &mut rng))
        .collect();
    let adaptation = AdaptationState::new(body, actuator, scenario.adaptation_gain)?;

    let controller = Controller::new(
        scenario.model.clone(),
        scenario.gains.clone(),
        scenario.impedance.clone(),
    )?;
    let mut mem = ControllerState::new(n, adaptation);

    let mut state = RobotState {
        q: q0,
        qd: DVector::zeros(n),
        ee_position: Vector3::zeros(),
        ee_orientation: UnitQuaternion::identity(),
        ee_velocity: Vector6::zeros(),
    };
    refresh_state(model, &mut state);

    let mut log = RunLog {
        dt,
        records: Vec::new(),
        outcome: RunOutcome::Completed,
        wall_offset: None,
    };
    if scenario.duration == 0.0 {
        return Ok(log);
    }

    // ---------------- Phase 1: joint-space regulation --------------------
    let reg_ticks = (scenario.regulation.duration / dt).round() as usize;
    for k in 0..reg_ticks {
        let objective = ControlObjective::JointRegulation {
            target: &scenario.start_q,
            rate_gain: scenario.regulation.rate_gain,
        };
        let report = match controller.control_tick(&state, &objective, &mut mem, dt) {
            Ok(r) => r,
            Err(e) => {
                log.outcome = RunOutcome::BlownUp {
                    t: k as f64 * dt,
                    context: format!("regulation phase: {e}"),
                };
                return Ok(log);
            }
        };
        if plant_step(model, &mut state, &report.tau, &Vector6::zeros(), dt, scenario.substeps)
            .is_err()
            || !bounded(&state)
        {
            log.outcome = RunOutcome::BlownUp {
                t: k as f64 * dt,
                context: "regulation phase: state left the bounded envelope".into(),
            };
            return Ok(log);
        }
        let max_err = (&state.q - &scenario.start_q).amax();
        if max_err < scenario.regulation.tolerance
            && state.qd.amax() < scenario.regulation.rate_tolerance
        {
            break;
        }
    }
    let max_err = (&state.q - &scenario.start_q).amax();
    if max_err >= scenario.regulation.tolerance {
        log.outcome = RunOutcome::RegulationFailed { max_err };
        return Ok(log);
    }

    // Controller memory carries over: the integral accumulators hold the
    // gravity compensation wound up during regulation, so tracking starts
    // from a compensated quiescent state instead of re-converging.

    // ---------------- Phase 2: impedance-controlled tracking -------------
    let start_pose = model.forward_kinematics(&scenario.start_q);
    let start_position = start_pose.end_effector().position;
    let start_orientation = start_pose.end_effector().quaternion();
    let path = SquarePath::new(&scenario.trajectory, start_position, start_orientation);

    let wall = scenario.wall.as_ref().map(|w| VirtualWall {
        stiffness: w.stiffness,
        offset: w.axis.dot(&start_position) + w.offset_from_start,
        axis: w.axis,
        element: w.element,
        accel_cutoff_hz: scenario.gains.accel_cutoff_hz,
        trapezoidal: w.trapezoidal,
    });
    if let Some(w) = &wall {
        w.validate()?;
        log.wall_offset = Some(w.offset);
    }
    let mut contact = ContactState::default();
    let mut human = scenario.human.as_ref().map(|h| {
        HumanArm::new(
            h.mass,
            h.damping,
            h.stiffness,
            task_pose(&state.ee_position, &state.ee_orientation),
        )
        .expect("validated human arm parameters")
    });

    let ticks = (scenario.duration / dt).round() as usize;
    log.records.reserve(ticks);
    for k in 0..ticks {
        let t = k as f64 * dt;

        // Interaction forces at the current state (zero-order hold).
        let f_h = match &mut human {
            Some(arm) => arm.step(&task_pose(&state.ee_position, &state.ee_orientation), dt),
            None => Vector6::zeros(),
        };
        let (f_c, axis) = match &wall {
            Some(w) => (
                contact.step(
                    w,
                    &state.ee_position,
                    &Vector3::from(state.ee_velocity.fixed_rows::<3>(0)),
                    dt,
                ),
                w.axis,
            ),
            None => (0.0, Vector3::z()),
        };
        let f_true = compose_external_force(&f_h, f_c, &axis, scenario.mode);
        let f_measured = if scenario.force_noise_sigma > 0.0 {
            let mut f = f_true;
            for x in f.iter_mut() {
                let z: f64 = StandardNormal.sample(&mut rng);
                *x += scenario.force_noise_sigma * z;
            }
            f
        } else {
            f_true
        };

        let reference = path.sample(t);
        let objective = ControlObjective::Task {
            reference: &reference,
            measured_force: f_measured,
        };
        // Snapshot the controller memory at the tick instant: the
        // accompanying function must pair tick-k errors with tick-k
        // integrals and estimates, not the post-update ones.
        let mem_at_tick = mem.clone();
        let report = match controller.control_tick(&state, &objective, &mut mem, dt) {
            Ok(r) => r,
            Err(e) => {
                log.outcome = RunOutcome::BlownUp {
                    t,
                    context: format!("controller: {e}"),
                };
                return Ok(log);
            }
        };

        // Diagnostics before the state advances (same instant as the tick).
        let qdd_now = match model.forward_dynamics(&state.q, &state.qd, &report.tau, &(-f_true)) {
            Ok(v) => v,
            Err(e) => {
                log.outcome = RunOutcome::BlownUp {
                    t,
                    context: format!("plant: {e}"),
                };
                return Ok(log);
            }
        };
        let tele = telescoping_check(model, &state.q, &state.qd, &qdd_now, &report);
        let nu_rec = match accompanying_function(model, &scenario.gains, &mem_at_tick, &report) {
            Ok(r) => r,
            Err(e) => {
                log.outcome = RunOutcome::BlownUp {
                    t,
                    context: format!("diagnostics: {e}"),
                };
                return Ok(log);
            }
        };
        let p_tip = tip_vpf(
            &report.xdot_r.unwrap_or_default(),
            &state.ee_velocity,
            &report.desired_force,
            &report.measured_force,
        );

        let task_err = report.task_error.unwrap_or_default();
        log.records.push(TickRecord {
            t,
            q: state.q.clone(),
            qd: state.qd.clone(),
            ee_position: state.ee_position,
            ee_orientation: state.ee_orientation,
            desired_position: reference.position,
            position_error: Vector3::from(task_err.fixed_rows::<3>(0)),
            orientation_error: Vector3::from(task_err.fixed_rows::<3>(3)),
            f: f_true,
            f_contact: f_c,
            f_human: f_h,
            contact_energy: contact.energy,
            tau: report.tau.clone(),
            nu: nu_rec.nu,
            nu_alt: nu_rec.nu_alt,
            nu_bound: nu_rec.bound,
            nu_quadratic: nu_rec.quadratic,
            nu_bregman: nu_rec.bregman,
            adaptation_flow: adaptation_flow(model, &state.q, &mem_at_tick, &report),
            vpf_body: tele.per_body.clone(),
            tip_vpf: p_tip,
            telescoping_residual: tele.residual,
            telescoping_relative: tele.relative_residual,
            lhat_min_body: mem.adaptation.body.iter().map(|l| l.min_eigenvalue()).collect(),
            lhat_min_actuator: mem
                .adaptation
                .actuator
                .iter()
                .map(|l| l.min_eigenvalue())
                .collect(),
            dls_active: report.dls_active,
        });

        if plant_step(model, &mut state, &report.tau, &(-f_true), dt, scenario.substeps).is_err()
            || !bounded(&state)
        {
            log.outcome = RunOutcome::BlownUp {
                t,
                context: "tracking phase: state left the bounded envelope".into(),
            };
            return Ok(log);
        }
    }
    Ok(log)
}

/// Writes the log as CSV. The first row is the schema tag, the second the
/// column header; columns are documented in the README.
pub fn write_csv<W: std::io::Write>(log: &RunLog, mut w: W) -> Result<()> {
    let n = log
        .records
        .first()
        .map(|r| r.q.len())
        .unwrap_or(0);
    writeln!(w, "schema,vdc-runlog-1")?;
    let mut header: Vec<String> = vec!["t".into()];
    let push_block = |header: &mut Vec<String>, stem: &str, count: usize| {
        for i in 1..=count {
            header.push(format!("{stem}{i}"));
        }
    };
    push_block(&mut header, "q", n);
    push_block(&mut header, "qd", n);
    header.extend(
        [
            "x", "y", "z", "qw", "qx", "qy", "qz", "xd", "yd", "zd", "epx", "epy", "epz",
            "eox", "eoy", "eoz",
        ]
        .map(String::from),
    );
    push_block(&mut header, "f", 6);
    header.push("f_c".into());
    push_block(&mut header, "fh", 6);
    header.push("E_c".into());
    push_block(&mut header, "tau", n);
    header.extend(["nu", "nu_alt", "nu_bound"].map(String::from));
    push_block(&mut header, "vpf_b", n);
    header.extend(
        ["tip_vpf", "tele_residual", "tele_relative"].map(String::from),
    );
    push_block(&mut header, "lmin_b", n);
    push_block(&mut header, "lmin_a", n);
    header.push("dls".into());
    writeln!(w, "{}", header.join(","))?;

    for r in &log.records {
        let mut row: Vec<String> = Vec::with_capacity(header.len());
        let fmt = |x: f64| format!("{x:.12e}");
        row.push(fmt(r.t));
        row.extend(r.q.iter().map(|&x| fmt(x)));
        row.extend(r.qd.iter().map(|&x| fmt(x)));
        row.extend(r.ee_position.iter().map(|&x| fmt(x)));
        let qt = r.ee_orientation.as_ref();
        row.extend([qt.w, qt.i, qt.j, qt.k].map(fmt));
        row.extend(r.desired_position.iter().map(|&x| fmt(x)));
        row.extend(r.position_error.iter().map(|&x| fmt(x)));
        row.extend(r.orientation_error.iter().map(|&x| fmt(x)));
        row.extend(r.f.iter().map(|&x| fmt(x)));
        row.push(fmt(r.f_contact));
        row.extend(r.f_human.iter().map(|&x| fmt(x)));
        row.push(fmt(r.contact_energy));
        row.extend(r.tau.iter().map(|&x| fmt(x)));
        row.extend([r.nu, r.nu_alt, r.nu_bound].map(fmt));
        row.extend(r.vpf_body.iter().map(|&x| fmt(x)));
        row.extend([r.tip_vpf, r.telescoping_residual, r.telescoping_relative].map(fmt));
        row.extend(r.lhat_min_body.iter().map(|&x| fmt(x)));
        row.extend(r.lhat_min_actuator.iter().map(|&x| fmt(x)));
        row.push(if r.dls_active { "1".into() } else { "0".into() });
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}
