//! Closed-loop simulation behavior: run phases, logging, degenerate inputs,
//! sweep resumption, and trajectory properties.

use nalgebra::{UnitQuaternion, Vector3};
use proptest::prelude::*;

use vdc_core::experiments::{zwidth_sweep, ElementKind, ZWidthSpec};
use vdc_core::interaction::DissipativeElement;
use vdc_core::sim::{
    run_scenario, write_csv, RunOutcome, Scenario, SquarePath, TrajectorySpec,
};

#[test]
fn free_motion_holds_pose_accurately() {
    let log = run_scenario(&Scenario::free_motion(5.0)).expect("scenario runs");
    let summary = log.summary();
    assert_eq!(log.outcome, RunOutcome::Completed);
    assert!(
        summary.rms_position_error_xy < 1e-4,
        "rms xy error {:.3e}",
        summary.rms_position_error_xy
    );
    assert!(summary.max_orientation_error_deg < 0.1);
    assert!(summary.passive, "no wall: the energy monitor must stay at zero");
}

#[test]
fn contact_run_presses_into_the_wall() {
    let log = run_scenario(&Scenario::contact(
        2.0,
        1000.0,
        DissipativeElement::VaryingMass { m_d: 0.14 },
    ))
    .expect("scenario runs");
    assert_eq!(log.outcome, RunOutcome::Completed);
    let summary = log.summary();
    assert!(
        summary.max_contact_force > 0.5,
        "square path must actually contact the wall (max f_c {:.2} N)",
        summary.max_contact_force
    );
    // Contact appears and disappears: some ticks in contact, some free.
    let in_contact = log.records.iter().filter(|r| r.f_contact > 0.0).count();
    assert!(in_contact > 0 && in_contact < log.records.len());
}

#[test]
fn zero_duration_run_is_valid_and_empty() {
    let log = run_scenario(&Scenario::free_motion(0.0)).expect("scenario runs");
    assert_eq!(log.outcome, RunOutcome::Completed);
    assert!(log.records.is_empty());
    let summary = log.summary();
    assert_eq!(summary.ticks, 0);
    // An empty log still serializes with the schema and header rows.
    let mut out = Vec::new();
    write_csv(&log, &mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(text.starts_with("schema,vdc-runlog-1\n"));
}

#[test]
fn invalid_scenarios_are_rejected() {
    let mut s = Scenario::free_motion(1.0);
    s.dt = 0.0;
    assert!(run_scenario(&s).is_err());
    let mut s = Scenario::free_motion(1.0);
    s.substeps = 0;
    assert!(run_scenario(&s).is_err());
    let mut s = Scenario::free_motion(1.0);
    s.adaptation_gain = -1.0;
    assert!(run_scenario(&s).is_err());
}

#[test]
fn impossible_regulation_tolerance_fails_cleanly() {
    let mut s = Scenario::free_motion(1.0);
    s.regulation.duration = 0.05;
    s.regulation.tolerance = 1e-15;
    s.regulation.rate_tolerance = 1e-15;
    let log = run_scenario(&s).expect("run returns a log, not an error");
    assert!(
        matches!(log.outcome, RunOutcome::RegulationFailed { .. }),
        "outcome was {:?}",
        log.outcome
    );
    assert!(log.records.is_empty(), "no tracking ticks after a failed regulation");
}

#[test]
fn csv_layout_is_rectangular() {
    let log = run_scenario(&Scenario::free_motion(0.2)).expect("scenario runs");
    let mut out = Vec::new();
    write_csv(&log, &mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("schema,vdc-runlog-1"));
    let header_cols = lines.next().unwrap().split(',').count();
    for line in lines {
        assert_eq!(line.split(',').count(), header_cols);
    }
}

#[test]
fn substep_refinement_converges() {
    let run = |substeps: usize| {
        let mut s = Scenario::free_motion(2.0);
        s.substeps = substeps;
        run_scenario(&s).expect("scenario runs").summary()
    };
    let coarse = run(10);
    let fine = run(20);
    // Doubling the plant resolution must not change the closed-loop story:
    // both accurate, same order of magnitude.
    assert!(coarse.rms_position_error_xy < 1e-4);
    assert!(fine.rms_position_error_xy < 1e-4);
    assert!(fine.rms_position_error_xy < 10.0 * coarse.rms_position_error_xy);
}

#[test]
fn seed_changes_the_noisy_run() {
    let mut a = Scenario::free_motion(1.0);
    a.force_noise_sigma = 0.1;
    let mut b = a.clone();
    b.seed = 2;
    let mut ca = Vec::new();
    let mut cb = Vec::new();
    write_csv(&run_scenario(&a).unwrap(), &mut ca).unwrap();
    write_csv(&run_scenario(&b).unwrap(), &mut cb).unwrap();
    assert_ne!(ca, cb, "different seeds must produce different logs");
}

#[test]
fn sweep_resumes_from_checkpoint_without_recomputing() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cp.json");
    // Pre-seed the checkpoint with a sentinel the sweep could never produce
    // (k_e_max above the search cap); if the sweep recomputed the point the
    // sentinel would disappear.
    std::fs::write(
        &path,
        serde_json::json!({
            "schema": "vdc-zwidth-checkpoint-1",
            "entries": [["damping", 0, {
                "element_value": 0.0, "k_e_max": 77_777.0, "min_energy": 0.5
            }]]
        })
        .to_string(),
    )
    .unwrap();
    let spec = ZWidthSpec {
        damping_grid: vec![0.0],
        mass_grid: vec![0.14],
        k_max: 400.0,
        resolution: 100.0,
        workers: 1,
        ..ZWidthSpec::default()
    };
    let result = zwidth_sweep(&spec, Some(&path), None).expect("sweep runs");
    assert_eq!(result.damping.points[0].k_e_max, 77_777.0);
    assert_eq!(result.damping.points[0].min_energy, 0.5);
    // The fresh point was computed normally.
    assert_eq!(result.mass.element, ElementKind::VaryingMass);
    assert!(result.mass.points[0].k_e_max <= 400.0);
}

#[test]
fn square_path_starts_and_ends_at_the_start_corner() {
    let spec = TrajectorySpec::Square {
        segment_time: 2.0,
        side: 0.1,
    };
    let start = Vector3::new(0.2, -0.1, 0.4);
    let path = SquarePath::new(&spec, start, UnitQuaternion::identity());
    let begin = path.sample(0.0);
    let end = path.sample(8.0);
    assert!((begin.position - start).norm() < 1e-12);
    assert!((end.position - start).norm() < 1e-12);
    assert!(begin.velocity.norm() < 1e-12);
    assert!(end.velocity.norm() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// The square reference is C1: position steps shrink with dt and the
    /// velocity matches the position finite difference.
    #[test]
    fn square_path_is_smooth(
        segment_time in 0.5f64..8.0,
        side in 0.01f64..0.3,
        u in 0.0f64..1.0,
    ) {
        let spec = TrajectorySpec::Square { segment_time, side };
        let path = SquarePath::new(&spec, Vector3::new(0.1, 0.2, 0.3), UnitQuaternion::identity());
        let t = u * 4.0 * segment_time;
        let h = 1e-6;
        let before = path.sample((t - h).max(0.0));
        let after = path.sample(t + h);
        let mid = path.sample(t);
        let fd = (after.position - before.position) / ((t + h) - (t - h).max(0.0));
        let v = mid.velocity.fixed_rows::<3>(0).into_owned();
        prop_assert!((fd - v).norm() < 1e-4, "fd {fd:?} vs v {v:?}");
        // The path never leaves the y-z plane of the start point.
        prop_assert!((mid.position.x - 0.1).abs() < 1e-12);
    }

    /// Quintic segments interpolate 0 -> 1 with zero boundary rates.
    #[test]
    fn quintic_boundaries(t_f in 0.1f64..10.0) {
        let (s0, sd0, sdd0) = vdc_core::sim::quintic_scalar(0.0, t_f);
        let (s1, sd1, sdd1) = vdc_core::sim::quintic_scalar(t_f, t_f);
        prop_assert!(s0.abs() < 1e-12 && (s1 - 1.0).abs() < 1e-12);
        prop_assert!(sd0.abs() < 1e-12 && sd1.abs() < 1e-9);
        prop_assert!(sdd0.abs() < 1e-12 && sdd1.abs() < 1e-9);
    }
}
