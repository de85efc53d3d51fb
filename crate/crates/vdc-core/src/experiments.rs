//! Reproducible batch protocols: the Z-width sweep (maximum passively
//! renderable wall stiffness as a function of the dissipative element), the
//! tracking presets, and the runtime verification suite.
//!
//! All protocols are deterministic functions of their spec (including the
//! seed); grid points of the sweep are independent and executed by a bounded
//! worker pool, with results merged in grid order so the output does not
//! depend on the worker count.

use std::io::Write;
use std::path::Path;
use std::sync::Mutex;

use nalgebra::{DVector, UnitQuaternion, Vector3, Vector6};
use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::controller::{impedance_design_variable, ImpedanceTarget, TaskReference};
use crate::diagnostics::{lyapunov_decrease_check, tip_vpf};
use crate::error::{Result, VdcError};
use crate::interaction::{ContactState, DissipativeElement, VirtualWall};
use crate::model::{rigid_body_regressor, RobotModel};
use crate::nal::{bregman_divergence, nal_map, nal_unmap, perturbed_consistent};
use crate::sim::{run_scenario, write_csv, RunLog, RunSummary, Scenario};

// ---------------------------------------------------------------------------
// Z-width sweep
// ---------------------------------------------------------------------------

/// Which dissipative element a sweep curve varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElementKind {
    /// Viscous damper `b_e` (N*s/m).
    Damping,
    /// Gated virtual mass `m_d` (kg).
    VaryingMass,
}

impl ElementKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ElementKind::Damping => "damping",
            ElementKind::VaryingMass => "varying_mass",
        }
    }

    fn element(&self, value: f64) -> DissipativeElement {
        match self {
            ElementKind::Damping => DissipativeElement::Damping { b_e: value },
            ElementKind::VaryingMass => DissipativeElement::VaryingMass { m_d: value },
        }
    }
}

/// Sweep description: the two element grids, the stiffness search range, and
/// the shared scenario template parameters.
#[derive(Debug, Clone)]
pub struct ZWidthSpec {
    /// Damper grid (N*s/m), ascending.
    pub damping_grid: Vec<f64>,
    /// Virtual-mass grid (kg), ascending.
    pub mass_grid: Vec<f64>,
    /// Upper end of the stiffness search (N/m).
    pub k_max: f64,
    /// Stiffness search resolution (N/m).
    pub resolution: f64,
    /// Square-path segment time of the template scenario (s).
    pub segment_time: f64,
    /// Force-sensor noise of the template scenario (N, standard deviation).
    /// The sweep enables it by default: a noiseless loop has almost no
    /// excitation above the path bandwidth, which would flatter the
    /// rate-dependent elements.
    pub force_noise_sigma: f64,
    /// Scenario seed (shared by every grid point).
    pub seed: u64,
    /// Worker pool width; 0 uses the number of logical cores.
    pub workers: usize,
}

fn grid(start: f64, step: f64, count: usize) -> Vec<f64> {
    (0..count).map(|i| start + step * i as f64).collect()
}

impl Default for ZWidthSpec {
    fn default() -> Self {
        Self {
            damping_grid: grid(0.0, 5.0, 13),
            mass_grid: grid(0.0, 0.14, 13),
            k_max: 20_000.0,
            resolution: 10.0,
            segment_time: 2.0,
            force_noise_sigma: 0.1,
            seed: 1,
            workers: 0,
        }
    }
}

impl ZWidthSpec {
    pub fn validate(&self) -> Result<()> {
        for g in [&self.damping_grid, &self.mass_grid] {
            if g.is_empty() {
                return Err(VdcError::Config("sweep grids must be non-empty".into()));
            }
            if g.windows(2).any(|w| w[1] <= w[0]) {
                return Err(VdcError::Config("sweep grids must be strictly ascending".into()));
            }
        }
        if self.k_max <= 0.0 || self.resolution <= 0.0 || self.resolution > self.k_max {
            return Err(VdcError::Config(
                "stiffness search needs 0 < resolution <= k_max".into(),
            ));
        }
        Ok(())
    }

    /// The contact scenario a grid point runs at stiffness `k_e`.
    pub fn scenario(&self, kind: ElementKind, value: f64, k_e: f64) -> Scenario {
        let mut s = Scenario::contact(self.segment_time, k_e, kind.element(value));
        s.force_noise_sigma = self.force_noise_sigma;
        s.seed = self.seed;
        s
    }
}

/// One grid point of a Z-width curve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ZWidthPoint {
    /// Element value (N*s/m or kg).
    pub element_value: f64,
    /// Largest stiffness whose run was passive and completed (N/m).
    pub k_e_max: f64,
    /// Passivity margin `min_t E_c` of the run at `k_e_max` (J).
    pub min_energy: f64,
    /// Diagnostic for degenerate points (e.g. nothing passive at all).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub diagnostic: Option<String>,
}

/// One curve: the element kind and its grid points in grid order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ZWidthCurve {
    pub element: ElementKind,
    pub points: Vec<ZWidthPoint>,
}

/// Both curves of a sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ZWidthResult {
    pub damping: ZWidthCurve,
    pub mass: ZWidthCurve,
}

/// Passive-and-completed verdict for one stiffness. Divergent runs can show
/// spuriously positive energy, so completion is part of the verdict.
fn point_verdict(spec: &ZWidthSpec, kind: ElementKind, value: f64, k_e: f64) -> Result<(bool, f64)> {
    let log = run_scenario(&spec.scenario(kind, value, k_e))?;
    let summary = log.summary();
    Ok((summary.completed && summary.passive, summary.min_contact_energy))
}

/// Largest stiffness in `[0, k_max]` (multiples of the resolution) whose run
/// is passive and completes, found by bisection. The cap is probed first:
/// most elements in the default grids saturate the search range, and that
/// costs a single run instead of a full bisection.
pub fn max_passive_stiffness(spec: &ZWidthSpec, kind: ElementKind, value: f64) -> Result<ZWidthPoint> {
    spec.validate()?;
    let (cap_ok, cap_energy) = point_verdict(spec, kind, value, spec.k_max)?;
    if cap_ok {
        return Ok(ZWidthPoint {
            element_value: value,
            k_e_max: spec.k_max,
            min_energy: cap_energy,
            diagnostic: None,
        });
    }
    let (zero_ok, zero_energy) = point_verdict(spec, kind, value, 0.0)?;
    if !zero_ok {
        return Ok(ZWidthPoint {
            element_value: value,
            k_e_max: 0.0,
            min_energy: zero_energy,
            diagnostic: Some("no passive stiffness: even k_e = 0 fails the verdict".into()),
        });
    }
    // Invariant: lo passes, hi fails.
    let (mut lo, mut lo_energy) = (0.0, zero_energy);
    let mut hi = spec.k_max;
    while hi - lo > spec.resolution {
        let mid = ((lo + hi) / (2.0 * spec.resolution)).round() * spec.resolution;
        if mid <= lo || mid >= hi {
            break;
        }
        let (ok, energy) = point_verdict(spec, kind, value, mid)?;
        if ok {
            lo = mid;
            lo_energy = energy;
        } else {
            hi = mid;
        }
    }
    Ok(ZWidthPoint {
        element_value: value,
        k_e_max: lo,
        min_energy: lo_energy,
        diagnostic: None,
    })
}

/// Serialized checkpoint: completed grid points keyed by curve and index.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct SweepCheckpoint {
    schema: String,
    entries: Vec<(String, usize, ZWidthPoint)>,
}

const CHECKPOINT_SCHEMA: &str = "vdc-zwidth-checkpoint-1";

fn load_checkpoint(path: &Path) -> SweepCheckpoint {
    let Ok(text) = std::fs::read_to_string(path) else {
        return SweepCheckpoint {
            schema: CHECKPOINT_SCHEMA.into(),
            entries: Vec::new(),
        };
    };
    match serde_json::from_str::<SweepCheckpoint>(&text) {
        Ok(cp) if cp.schema == CHECKPOINT_SCHEMA => cp,
        _ => {
            log::warn!("ignoring unreadable or mismatched checkpoint {}", path.display());
            SweepCheckpoint {
                schema: CHECKPOINT_SCHEMA.into(),
                entries: Vec::new(),
            }
        }
    }
}

fn store_checkpoint(path: &Path, cp: &SweepCheckpoint) {
    // Atomic-rename write so an interrupt never leaves a torn file.
    let tmp = path.with_extension("tmp");
    let write = || -> std::io::Result<()> {
        std::fs::write(&tmp, serde_json::to_vec_pretty(cp)?)?;
        std::fs::rename(&tmp, path)
    };
    if let Err(e) = write() {
        log::warn!("could not write checkpoint {}: {e}", path.display());
    }
}

/// Progress callback: curve name, element value, finished point.
pub type SweepProgress<'a> = &'a (dyn Fn(&str, f64, &ZWidthPoint) + Sync);

/// Runs both curves. Grid points are independent; they are executed on a
/// bounded worker pool and merged by grid index, so the result is identical
/// for any worker count. If `checkpoint` is given, finished points are
/// persisted there and an interrupted sweep resumes from them.
pub fn zwidth_sweep(
    spec: &ZWidthSpec,
    checkpoint: Option<&Path>,
    progress: Option<SweepProgress>,
) -> Result<ZWidthResult> {
    spec.validate()?;
    let jobs: Vec<(ElementKind, usize, f64)> = spec
        .damping_grid
        .iter()
        .enumerate()
        .map(|(i, &v)| (ElementKind::Damping, i, v))
        .chain(
            spec.mass_grid
                .iter()
                .enumerate()
                .map(|(i, &v)| (ElementKind::VaryingMass, i, v)),
        )
        .collect();

    let done = Mutex::new(checkpoint.map(load_checkpoint).unwrap_or_default());
    let lookup = |kind: ElementKind, index: usize| -> Option<ZWidthPoint> {
        let cp = done.lock().expect("checkpoint lock");
        cp.entries
            .iter()
            .find(|(k, i, _)| k == kind.as_str() && *i == index)
            .map(|(_, _, p)| p.clone())
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.workers)
        .build()
        .map_err(|e| VdcError::Config(format!("worker pool: {e}")))?;
    let outcomes: Vec<Result<(ElementKind, usize, ZWidthPoint)>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(kind, index, value)| {
                let point = match lookup(kind, index) {
                    Some(p) => p,
                    None => {
                        let p = max_passive_stiffness(spec, kind, value)?;
                        let mut cp = done.lock().expect("checkpoint lock");
                        cp.entries.push((kind.as_str().into(), index, p.clone()));
                        if let Some(path) = checkpoint {
                            store_checkpoint(path, &cp);
                        }
                        p
                    }
                };
                if let Some(cb) = progress {
                    cb(kind.as_str(), value, &point);
                }
                Ok((kind, index, point))
            })
            .collect()
    });

    let mut damping = vec![None; spec.damping_grid.len()];
    let mut mass = vec![None; spec.mass_grid.len()];
    for outcome in outcomes {
        let (kind, index, point) = outcome?;
        match kind {
            ElementKind::Damping => damping[index] = Some(point),
            ElementKind::VaryingMass => mass[index] = Some(point),
        }
    }
    Ok(ZWidthResult {
        damping: ZWidthCurve {
            element: ElementKind::Damping,
            points: damping.into_iter().map(|p| p.expect("all jobs merged")).collect(),
        },
        mass: ZWidthCurve {
            element: ElementKind::VaryingMass,
            points: mass.into_iter().map(|p| p.expect("all jobs merged")).collect(),
        },
    })
}

/// Writes one curve as CSV (schema tag first, then the header row).
pub fn write_curve_csv<W: Write>(curve: &ZWidthCurve, mut w: W) -> Result<()> {
    writeln!(w, "schema,vdc-zwidth-1")?;
    writeln!(w, "element_value,k_e_max,min_Ec")?;
    for p in &curve.points {
        writeln!(w, "{:.6e},{:.6e},{:.6e}", p.element_value, p.k_e_max, p.min_energy)?;
    }
    Ok(())
}

/// JSON summary of a sweep. The human-arm parameters of the template are
/// included verbatim: the curves are only meaningful relative to the arm
/// the display was coupled to.
pub fn sweep_summary_json(spec: &ZWidthSpec, result: &ZWidthResult) -> serde_json::Value {
    let template = spec.scenario(ElementKind::Damping, 0.0, 0.0);
    let arm = template.human.as_ref().expect("contact template has an arm");
    let vec6 = |v: &Vector6<f64>| v.iter().cloned().collect::<Vec<f64>>();
    serde_json::json!({
        "schema": "vdc-zwidth-summary-1",
        "spec": {
            "damping_grid": spec.damping_grid,
            "mass_grid": spec.mass_grid,
            "k_max": spec.k_max,
            "resolution": spec.resolution,
            "segment_time": spec.segment_time,
            "force_noise_sigma": spec.force_noise_sigma,
            "seed": spec.seed,
        },
        "human_arm": {
            "mass": vec6(&arm.mass),
            "damping": vec6(&arm.damping),
            "stiffness": vec6(&arm.stiffness),
        },
        "impedance": {
            "stiffness": vec6(&template.impedance.stiffness),
            "damping": vec6(&template.impedance.damping),
        },
        "damping_curve": result.damping,
        "mass_curve": result.mass,
    })
}

// ---------------------------------------------------------------------------
// Tracking experiments
// ---------------------------------------------------------------------------

/// Outcome of one tracking run: the full log plus the metric set (RMS
/// position error split x-y vs z, RMS orientation error, max contact force,
/// RMS torque).
#[derive(Debug, Clone)]
pub struct TrackingResult {
    pub log: RunLog,
    pub summary: RunSummary,
}

/// The preset protocol: square path with segment time `t_f`, wall stiffness
/// `k_e`, gated virtual mass `m_d`. Presets pair `t_f` in {2, 5} s with
/// `k_e` in {1000, 1500} N/m at `m_d` = 0.14 kg; other values run as given.
/// The tracking runs integrate the contact energy trapezoidally: the
/// reported quantity is the energy balance of the rendered wall, while the
/// Z-width sweep keeps the raw zero-order-hold port work as its
/// activity detector.
pub fn tracking_experiment(t_f: f64, k_e: f64, m_d: f64) -> Result<TrackingResult> {
    let mut scenario = Scenario::contact(t_f, k_e, DissipativeElement::VaryingMass { m_d });
    if let Some(w) = scenario.wall.as_mut() {
        w.trapezoidal = true;
    }
    let log = run_scenario(&scenario)?;
    let summary = log.summary();
    Ok(TrackingResult { log, summary })
}

// ---------------------------------------------------------------------------
// Verification suite
// ---------------------------------------------------------------------------

/// One verified property.
#[derive(Debug, Clone, Serialize)]
pub struct PropertyCheck {
    pub name: String,
    /// Human-readable tolerance statement.
    pub tolerance: String,
    /// Number of cases exercised.
    pub cases: usize,
    /// Worst observed value (same units as the tolerance).
    pub worst: f64,
    pub passed: bool,
    /// First counterexample, if the property failed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<String>,
}

/// Aggregate verification report.
#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub properties: Vec<PropertyCheck>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.properties.iter().all(|p| p.passed)
    }

    /// Renders the report; `verbose` lists every property with its
    /// tolerance, otherwise only failures are detailed.
    pub fn render(&self, verbose: bool) -> String {
        let mut out = String::new();
        for p in &self.properties {
            let flag = if p.passed { "PASS" } else { "FAIL" };
            if verbose || !p.passed {
                out.push_str(&format!(
                    "{flag} {:<38} cases={:<6} worst={:<12.3e} tol: {}\n",
                    p.name, p.cases, p.worst, p.tolerance
                ));
                if let Some(ce) = &p.counterexample {
                    out.push_str(&format!("     counterexample: {ce}\n"));
                }
            } else {
                out.push_str(&format!("{flag} {}\n", p.name));
            }
        }
        let (passed, total) = (
            self.properties.iter().filter(|p| p.passed).count(),
            self.properties.len(),
        );
        out.push_str(&format!("{passed}/{total} properties passed\n"));
        out
    }
}

struct CheckBuilder {
    name: &'static str,
    tolerance: String,
    cases: usize,
    worst: f64,
    limit: f64,
    counterexample: Option<String>,
}

impl CheckBuilder {
    fn new(name: &'static str, tolerance: &str, limit: f64) -> Self {
        Self {
            name,
            tolerance: tolerance.into(),
            cases: 0,
            worst: 0.0,
            limit,
            counterexample: None,
        }
    }

    /// Records one case; `value` must stay at or below the limit.
    fn case(&mut self, value: f64, describe: impl FnOnce() -> String) {
        self.cases += 1;
        if value > self.worst || !value.is_finite() {
            self.worst = value;
        }
        if (value > self.limit || !value.is_finite()) && self.counterexample.is_none() {
            self.counterexample = Some(describe());
        }
    }

    fn finish(self) -> PropertyCheck {
        PropertyCheck {
            name: self.name.into(),
            tolerance: self.tolerance,
            cases: self.cases,
            worst: self.worst,
            passed: self.counterexample.is_none(),
            counterexample: self.counterexample,
        }
    }
}

fn random_vec6(rng: &mut ChaCha8Rng, scale: f64) -> Vector6<f64> {
    Vector6::from_iterator((0..6).map(|_| (rng.gen::<f64>() * 2.0 - 1.0) * scale))
}

fn check_regressor_identity(model: &RobotModel) -> PropertyCheck {
    let mut c = CheckBuilder::new(
        "regressor-net-wrench-identity",
        "relative error <= 1e-9 on random states",
        1e-9,
    );
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for k in 0..1000 {
        let link = model.link(k % model.dof());
        let v = random_vec6(&mut rng, 2.0);
        let v_r = random_vec6(&mut rng, 2.0);
        let a_r = random_vec6(&mut rng, 5.0);
        let g = Vector3::new(0.3, -0.2, -9.81);
        let direct = crate::model::body_net_wrench(&link.phi, &v, &v_r, &a_r, &g);
        let via = rigid_body_regressor(&v, &v_r, &a_r, &g) * link.phi.to_vector();
        let rel = (direct - via).norm() / direct.norm().max(1.0);
        c.case(rel, || format!("case {k}: relative error {rel:.3e}"));
    }
    c.finish()
}

fn check_nal_roundtrip(model: &RobotModel) -> PropertyCheck {
    let mut c = CheckBuilder::new(
        "nal-map-roundtrip",
        "parameter round-trip error <= 1e-10",
        1e-10,
    );
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    for k in 0..1000 {
        let phi = nal_unmap(&perturbed_consistent(
            &model.link(k % model.dof()).phi,
            0.4,
            &mut rng,
        ));
        let back = nal_unmap(&nal_map(&phi));
        let err = (back.to_vector() - phi.to_vector()).norm();
        c.case(err, || format!("case {k}: round-trip error {err:.3e}"));
    }
    c.finish()
}

fn check_bregman(model: &RobotModel) -> PropertyCheck {
    let mut c = CheckBuilder::new(
        "bregman-nonnegative-and-closed-form",
        "D >= -1e-12 on random PD pairs; |D(I||2I) - (4ln2 - 2)| <= 1e-9",
        1e-9,
    );
    let mut rng = ChaCha8Rng::seed_from_u64(107);
    for k in 0..10_000 {
        let link = model.link(k % model.dof());
        let a = perturbed_consistent(&link.phi, 0.5, &mut rng);
        let b = perturbed_consistent(&link.phi, 0.5, &mut rng);
        match bregman_divergence(&a, &b) {
            Ok(d) => c.case((-d).max(0.0), || format!("case {k}: D = {d:.3e} < 0")),
            Err(e) => c.case(f64::INFINITY, || format!("case {k}: {e}")),
        }
    }
    let l_i = crate::nal::LMatrix::new(nalgebra::Matrix4::identity()).expect("PD");
    let l_2i = crate::nal::LMatrix::new(nalgebra::Matrix4::identity() * 2.0).expect("PD");
    let closed = bregman_divergence(&l_i, &l_2i).expect("PD inputs");
    let expected = 4.0 * (2.0_f64).ln() - 2.0;
    c.case((closed - expected).abs(), || {
        format!("closed form: got {closed:.12}, expected {expected:.12}")
    });
    c.finish()
}

fn check_impedance_recovery() -> PropertyCheck {
    let mut c = CheckBuilder::new(
        "impedance-velocity-recovery",
        "|Xdot_r - Xdot| <= 1e-12 and |tip VPF| <= 1e-12 with the impedance relation imposed",
        1e-12,
    );
    let mut rng = ChaCha8Rng::seed_from_u64(109);
    let target = ImpedanceTarget {
        stiffness: Vector6::new(200.0, 200.0, 100.0, 100.0, 100.0, 100.0),
        damping: Vector6::repeat(40.0),
        desired_force: Vector6::new(0.0, 0.0, 5.0, 0.0, 0.0, 0.0),
    };
    for k in 0..1000 {
        let position = Vector3::new(
            rng.gen::<f64>() - 0.5,
            rng.gen::<f64>() - 0.5,
            rng.gen::<f64>() - 0.5,
        );
        let axis = Vector3::new(rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>() + 0.1);
        let orientation =
            UnitQuaternion::from_scaled_axis(axis.normalize() * (rng.gen::<f64>() - 0.5));
        let reference = TaskReference {
            position: position + Vector3::new(0.02, -0.01, 0.03) * rng.gen::<f64>(),
            orientation: orientation
                * UnitQuaternion::from_scaled_axis(Vector3::new(0.05, -0.04, 0.02) * rng.gen::<f64>()),
            velocity: random_vec6(&mut rng, 0.5),
        };
        let xdot = random_vec6(&mut rng, 0.5);
        // Impose the desired impedance relation on the measured force, then
        // the design variable must reproduce the actual velocity exactly.
        let (_, e) = impedance_design_variable(
            &target,
            &reference,
            &position,
            &orientation,
            &Vector6::zeros(),
        );
        let f = target.desired_force
            - target.damping.component_mul(&(xdot - reference.velocity))
            + target.stiffness.component_mul(&e);
        let (xdot_r, _) =
            impedance_design_variable(&target, &reference, &position, &orientation, &f);
        let residual = (xdot_r - xdot).norm();
        c.case(residual, || format!("case {k}: velocity residual {residual:.3e}"));
        let p = tip_vpf(&xdot_r, &xdot, &target.desired_force, &f).abs();
        c.case(p, || format!("case {k}: tip VPF {p:.3e}"));
    }
    c.finish()
}

fn check_contact_monitor() -> PropertyCheck {
    let mut c = CheckBuilder::new(
        "contact-energy-monitor-oracles",
        "1 N x 0.1 m/s x 1 s = 0.1 J within 1e-9; spring cycle returns within 1e-4 J",
        1e-4,
    );
    let dt = 1e-3;
    let damper = VirtualWall {
        stiffness: 0.0,
        offset: 0.0,
        axis: Vector3::z(),
        element: DissipativeElement::Damping { b_e: 10.0 },
        accel_cutoff_hz: 50.0,
        trapezoidal: false,
    };
    let mut contact = ContactState::default();
    for k in 0..=1000 {
        let z = 1e-3 + 0.1 * k as f64 * dt;
        contact.step(&damper, &Vector3::new(0.0, 0.0, z), &Vector3::new(0.0, 0.0, 0.1), dt);
    }
    let err = (contact.energy - 0.1).abs();
    c.case(if err <= 1e-9 { 0.0 } else { err }, || {
        format!("constant-power oracle: E = {:.12} J (expected 0.1)", contact.energy)
    });

    let spring = VirtualWall {
        stiffness: 1000.0,
        offset: 0.0,
        axis: Vector3::z(),
        element: DissipativeElement::None,
        accel_cutoff_hz: 50.0,
        trapezoidal: false,
    };
    let mut contact = ContactState::default();
    let period = 2.0;
    let amp = 0.005;
    for k in 0..=((period / dt) as usize) {
        let t = k as f64 * dt;
        let depth = amp * (std::f64::consts::PI * t / period).sin();
        let rate =
            amp * std::f64::consts::PI / period * (std::f64::consts::PI * t / period).cos();
        contact.step(&spring, &Vector3::new(0.0, 0.0, depth), &Vector3::new(0.0, 0.0, rate), dt);
    }
    c.case(contact.energy.abs(), || {
        format!("spring-cycle oracle: residual {:.3e} J", contact.energy)
    });
    c.finish()
}

fn check_plant_energy(model: &RobotModel) -> PropertyCheck {
    let mut c = CheckBuilder::new(
        "plant-passive-energy-conservation",
        "relative drift <= 1e-3 over a 2 s unforced swing",
        1e-3,
    );
    let n = model.dof();
    let mut q = Scenario::default_start_q();
    let mut qd = DVector::zeros(n);
    let e0 = model.mechanical_energy(&q, &qd);
    let dt = 1e-4;
    let tau = DVector::zeros(n);
    let f0 = Vector6::zeros();
    let mut worst: f64 = 0.0;
    for _ in 0..20_000 {
        let qdd = model.forward_dynamics(&q, &qd, &tau, &f0).expect("SPD inertia");
        qd += &qdd * dt;
        q += &qd * dt;
        let e = model.mechanical_energy(&q, &qd);
        worst = worst.max((e - e0).abs());
    }
    let rel = worst / e0.abs().max(1.0);
    c.case(rel, || format!("drift {rel:.3e} over 2 s at dt = 1e-4"));
    c.finish()
}

fn check_free_motion_run() -> Result<[PropertyCheck; 4]> {
    let scenario = Scenario::free_motion(10.0);
    let log = run_scenario(&scenario)?;
    let summary = log.summary();

    let mut lyap = CheckBuilder::new(
        "lyapunov-decrease-free-motion",
        "zero violations of the per-tick decrease bound after a 10-tick transient",
        0.0,
    );
    let nu: Vec<f64> = log.records.iter().map(|r| r.nu).collect();
    let bound: Vec<f64> = log.records.iter().map(|r| r.nu_bound).collect();
    let violations = lyapunov_decrease_check(&nu, &bound, log.dt, 10, 1e-6, 1e-3);
    lyap.case(violations.len() as f64, || {
        format!("first violating tick: {:?}", violations.first())
    });

    let mut nu_pos = CheckBuilder::new(
        "accompanying-function-nonnegative",
        "nu >= 0 at every tick",
        0.0,
    );
    for r in &log.records {
        nu_pos.case((-r.nu).max(0.0), || format!("t = {}: nu = {}", r.t, r.nu));
    }

    let mut tele = CheckBuilder::new(
        "vpf-telescoping-cancellation",
        "relative residual <= 1e-9 at every tick",
        1e-9,
    );
    tele.case(summary.max_telescoping_relative, || {
        format!("max relative residual {:.3e}", summary.max_telescoping_relative)
    });

    let mut pd = CheckBuilder::new(
        "adaptation-stays-positive-definite",
        "min eigenvalue of every L-hat > 0 for the whole run",
        0.0,
    );
    pd.case(if summary.min_lhat_eigenvalue > 0.0 { 0.0 } else { 1.0 }, || {
        format!("min eigenvalue {:.3e}", summary.min_lhat_eigenvalue)
    });
    pd.cases = log.records.len();

    Ok([lyap.finish(), nu_pos.finish(), tele.finish(), pd.finish()])
}

fn check_determinism() -> Result<PropertyCheck> {
    let mut c = CheckBuilder::new(
        "run-determinism",
        "identical scenario -> byte-identical CSV",
        0.0,
    );
    let mut scenario = Scenario::free_motion(2.0);
    scenario.force_noise_sigma = 0.05;
    let mut a = Vec::new();
    let mut b = Vec::new();
    write_csv(&run_scenario(&scenario)?, &mut a)?;
    write_csv(&run_scenario(&scenario)?, &mut b)?;
    c.case(if a == b { 0.0 } else { 1.0 }, || {
        "repeated run produced different bytes".into()
    });
    Ok(c.finish())
}

fn check_bisection_bracket() -> Result<PropertyCheck> {
    let mut c = CheckBuilder::new(
        "zwidth-bisection-bracket",
        "run(k_e*) passive and completed; run(k_e* + resolution) not (when k_e* < k_max)",
        0.0,
    );
    // A coarse search keeps this check affordable; the bracket invariant is
    // resolution-independent.
    let spec = ZWidthSpec {
        k_max: 400.0,
        resolution: 100.0,
        ..ZWidthSpec::default()
    };
    let point = max_passive_stiffness(&spec, ElementKind::Damping, 0.0)?;
    let (at_star, _) = point_verdict(&spec, ElementKind::Damping, 0.0, point.k_e_max)?;
    c.case(if at_star { 0.0 } else { 1.0 }, || {
        format!("k_e* = {} not passive on re-run", point.k_e_max)
    });
    if point.k_e_max + spec.resolution <= spec.k_max {
        let (above, _) =
            point_verdict(&spec, ElementKind::Damping, 0.0, point.k_e_max + spec.resolution)?;
        c.case(if above { 1.0 } else { 0.0 }, || {
            format!("k_e* + resolution = {} unexpectedly passive", point.k_e_max + spec.resolution)
        });
    }
    Ok(c.finish())
}

/// Runs the full property suite and returns the report.
pub fn verify_suite() -> Result<VerifyReport> {
    let model = RobotModel::default_seven_dof();
    let mut properties = vec![
        check_regressor_identity(&model),
        check_nal_roundtrip(&model),
        check_bregman(&model),
        check_impedance_recovery(),
        check_contact_monitor(),
        check_plant_energy(&model),
    ];
    properties.extend(check_free_motion_run()?);
    properties.push(check_determinism()?);
    properties.push(check_bisection_bracket()?);
    Ok(VerifyReport { properties })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_spec_matches_protocol_grids() {
        let spec = ZWidthSpec::default();
        assert_eq!(spec.damping_grid.len(), 13);
        assert_eq!(spec.mass_grid.len(), 13);
        assert!((spec.damping_grid[12] - 60.0).abs() < 1e-12);
        assert!((spec.mass_grid[12] - 1.68).abs() < 1e-12);
        assert!((spec.mass_grid[1] - 0.14).abs() < 1e-12);
        spec.validate().expect("default spec is valid");
    }

    #[test]
    fn spec_rejects_bad_grids() {
        let mut spec = ZWidthSpec::default();
        spec.mass_grid = vec![];
        assert!(spec.validate().is_err());
        let mut spec = ZWidthSpec::default();
        spec.damping_grid = vec![0.0, 5.0, 5.0];
        assert!(spec.validate().is_err());
        let mut spec = ZWidthSpec::default();
        spec.resolution = 0.0;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn curve_csv_schema() {
        let curve = ZWidthCurve {
            element: ElementKind::Damping,
            points: vec![ZWidthPoint {
                element_value: 5.0,
                k_e_max: 120.0,
                min_energy: -1e-7,
                diagnostic: None,
            }],
        };
        let mut out = Vec::new();
        write_curve_csv(&curve, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("schema,vdc-zwidth-1"));
        assert_eq!(lines.next(), Some("element_value,k_e_max,min_Ec"));
        assert!(lines.next().unwrap().starts_with("5.0"));
    }

    #[test]
    fn checkpoint_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cp.json");
        let cp = SweepCheckpoint {
            schema: CHECKPOINT_SCHEMA.into(),
            entries: vec![(
                "damping".into(),
                3,
                ZWidthPoint {
                    element_value: 15.0,
                    k_e_max: 20_000.0,
                    min_energy: 0.0,
                    diagnostic: None,
                },
            )],
        };
        store_checkpoint(&path, &cp);
        let back = load_checkpoint(&path);
        assert_eq!(back.entries.len(), 1);
        assert_eq!(back.entries[0].1, 3);
        assert_eq!(back.entries[0].2.k_e_max, 20_000.0);
    }
}
