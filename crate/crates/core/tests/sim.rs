mod common;

use helix_ilos::guidance::PathSpec;
use helix_ilos::model::DisturbanceSpec;
use helix_ilos::sim::{
    calibrate_disturbance, calibrate_disturbance_closed_loop, run, step, sweep, GuidanceMode,
    SimScenario, SimState, SweepGrid,
};
use helix_ilos::Vec2;

use common::*;

fn short(mode: GuidanceMode) -> SimScenario {
    let mut s = load_scenario("ilos_600.cfg").resolved.scenario;
    s.mode = mode;
    s.t_end = 5.0;
    s.tail_window = 1.0;
    s.disturbance = DisturbanceSpec::constant(Vec2::new(0.0, -8.9e-5));
    s
}

#[test]
fn identical_scenarios_give_identical_traces() {
    let sc = short(GuidanceMode::Ilos);
    let (a, b) = (run(&sc).unwrap(), run(&sc).unwrap());
    assert_eq!(a.trace.len(), b.trace.len());
    for (x, y) in a.trace.iter().zip(&b.trace) {
        assert_eq!(x.p_x.to_bits(), y.p_x.to_bits());
        assert_eq!(x.p_z.to_bits(), y.p_z.to_bits());
        assert_eq!(x.s.to_bits(), y.s.to_bits());
    }
}

#[test]
fn single_step_matches_run() {
    let sc = short(GuidanceMode::Ilos);
    let full = run(&sc).unwrap();
    let (next, rec) = step(&SimState::new(sc.p0, sc.s0), &sc).unwrap();
    assert_eq!(next.step, 1);
    assert_eq!(rec, full.trace[1]);
}

#[test]
fn records_follow_path_frame_and_plant() {
    let sc = short(GuidanceMode::Ilos);
    let e11 = 9.3e-5;
    for r in run(&sc).unwrap().trace.iter().step_by(250) {
        assert_eq!(r.eps, r.p_z);
        assert_eq!(r.z, r.p_x);
        assert!((r.v_x - e11 * r.u_x).abs() <= 1e-18);
        assert!((r.v_z - (e11 * r.u_z - 8.9e-5)).abs() <= 1e-18);
        assert!((r.u_mag - r.u_x.hypot(r.u_z)).abs() <= 1e-12 * r.u_mag.max(1.0));
    }
}

#[test]
fn on_path_start_stays_on_rotated_path() {
    let mut sc = short(GuidanceMode::Ilos);
    sc.disturbance = DisturbanceSpec::zero();
    sc.path = PathSpec::new(1.1);
    sc.p0 = 0.003 * sc.path.tangent();
    let out = run(&sc).unwrap();
    assert!(out
        .trace
        .iter()
        .all(|r| r.eps.abs() < 1e-9 && r.s.abs() < 1e-9));
}

#[test]
fn closed_loop_calibration_hits_target() {
    let mut sc = load_scenario("conventional_600.cfg").resolved.scenario;
    sc.t_end = 60.0;
    let cal = calibrate_disturbance_closed_loop(&sc, 1.2e-3).unwrap();
    assert!((cal.achieved_offset - 1.2e-3).abs() <= 1e-9);
    // Target sign selects the side of the line.
    assert!(cal.disturbance.at(0.0).y > 0.0);
    let analytic = calibrate_disturbance(1.2e-3, &sc.guidance, 9.3e-5, &sc.path);
    assert_eq!(cal.analytic, analytic);
}

#[test]
fn sweep_rows_equal_individual_runs() {
    let base = short(GuidanceMode::ConventionalLos);
    let grid = SweepGrid {
        alpha_d: vec![600.0, 1200.0],
        ..Default::default()
    };
    let rows = sweep(&base, &grid, Some(2)).unwrap();
    assert_eq!(rows.len(), 2);
    for (row, alpha_d) in rows.iter().zip([600.0, 1200.0]) {
        let mut sc = base.clone();
        sc.guidance.alpha_d = alpha_d;
        assert_eq!(row.outcome.as_ref().unwrap(), &run(&sc).unwrap().metrics);
    }
}

#[test]
fn sweep_flags_gains_outside_simplified_region() {
    let base = short(GuidanceMode::Ilos);
    let grid = SweepGrid {
        alpha_d: vec![600.0, 2000.0],
        modes: vec![GuidanceMode::Ilos],
        ..Default::default()
    };
    let rows = sweep(&base, &grid, None).unwrap();
    assert!(rows[0].gain_check.ok);
    assert!(!rows[1].gain_check.ok);
    assert!(
        (rows[1].gain_check.lhs - (2.0 * 1.5 * (1.0 + 0.15 / 2000.0) + (0.01f64 * 1.5).powi(2)))
            .abs()
            < 1e-12
    );
}

#[test]
fn sweep_records_failures_per_point() {
    let mut base = short(GuidanceMode::Ilos);
    base.disturbance = DisturbanceSpec::constant(Vec2::new(1.0, 0.0));
    let rows = sweep(&base, &SweepGrid::default(), Some(1)).unwrap();
    assert!(rows[0].outcome.as_ref().unwrap_err().contains("diverged"));
}
