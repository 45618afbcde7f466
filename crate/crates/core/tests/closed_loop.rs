use nalgebra::{Complex, Vector3};

use quadpos::controllers::{Controller, ControllerAConfig, ControllerBConfig};
use quadpos::dynamics::{QuadParams, QuadState};
use quadpos::gain_synthesis::{gamma_from_family, pd_gains_from_poles, KVector, PDGains, PolyFamily};
use quadpos::normal_form::Target;
use quadpos::sim::{
    compare_linear_reference, run_batch, run_scenario, CsvColumns, FaultKind, ReferenceModel, Scenario, Trajectory,
};

fn re(x: f64) -> Complex<f64> {
    Complex::new(x, 0.0)
}

fn pd() -> PDGains {
    pd_gains_from_poles(&[re(-2.0), re(-2.0)], &[re(-2.0), re(-2.0)]).unwrap()
}

fn controller_a(alpha_sat: f64) -> Controller {
    let k = KVector::from_char_poly(&gamma_from_family(PolyFamily::Newton, 1.0).unwrap().gamma);
    Controller::A(ControllerAConfig {
        pd: pd(),
        kvec: [k, k],
        alpha_sat,
    })
}

fn controller_b(family: PolyFamily, omega: f64) -> Controller {
    Controller::B(ControllerBConfig::new(gamma_from_family(family, omega).unwrap()))
}

fn offset_scenario(controller: Controller, horizon: f64) -> Scenario {
    Scenario::new(
        QuadParams::default(),
        QuadState::hover_at(1.0, 1.0, 1.0, 0.5),
        Target::default(),
        controller,
        horizon,
    )
}

#[test]
fn hover_at_target_stays_put() {
    for controller in [controller_a(0.5), controller_b(PolyFamily::Newton, 1.0)] {
        let mut sc = offset_scenario(controller, 2.0);
        sc.target = Target::new(1.0, 1.0, 1.0, 0.5);
        let (traj, m) = run_scenario(&sc).unwrap();
        assert!(m.fault.is_none());
        for row in &traj.rows {
            assert!(sc.target.output_error(&row.state).iter().all(|e| e.abs() < 1e-9));
        }
    }
}

#[test]
fn both_controllers_converge_from_standard_offset() {
    for controller in [controller_a(0.5), controller_b(PolyFamily::Newton, 1.0)] {
        let (traj, m) = run_scenario(&offset_scenario(controller, 20.0)).unwrap();
        assert_eq!(traj.len(), 20_001);
        assert!(m.converged, "{m:?}");
        assert!(m.channels.iter().all(|c| c.final_error.abs() < 1e-3));
    }
}

#[test]
fn row_times_are_uniform() {
    let (traj, _) = run_scenario(&offset_scenario(controller_a(0.5), 1.0)).unwrap();
    assert_eq!(traj.len(), 1001);
    for (n, row) in traj.rows.iter().enumerate() {
        assert_eq!(row.t, n as f64 * 1e-3);
    }
}

#[test]
fn zeta_follows_matrix_exponential() {
    for (family, omega) in [(PolyFamily::Newton, 1.0), (PolyFamily::Newton, 2.0), (PolyFamily::Butterworth, 1.0)] {
        let controller = controller_b(family, omega);
        let Controller::B(cfg) = controller else { unreachable!() };
        let (traj, _) = run_scenario(&offset_scenario(controller, 1.0)).unwrap();
        let dev = compare_linear_reference(&traj, &ReferenceModel::ClosedLoopB(cfg.gamma)).unwrap();
        assert!(dev.max_relative < 1e-3, "{family} {omega}: {}", dev.max_relative);
    }
}

#[test]
fn zero_tilt_altitude_and_yaw_loops_are_linear() {
    // no horizontal offset: roll and pitch stay at zero
    let mut sc = offset_scenario(controller_a(0.5), 10.0);
    sc.initial = QuadState::hover_at(0.0, 0.0, 1.0, 0.5);
    let (traj, m) = run_scenario(&sc).unwrap();
    assert!(m.max_tilt < 1e-12);
    for model in [ReferenceModel::Altitude(pd()), ReferenceModel::Yaw(pd())] {
        let dev = compare_linear_reference(&traj, &model).unwrap();
        assert!(dev.max_relative < 1e-6, "{model:?}: {}", dev.max_relative);
    }
}

#[test]
fn saturated_transient_departs_from_linear_altitude_loop() {
    let mut sc = offset_scenario(controller_a(0.5), 30.0);
    sc.initial = QuadState::hover_at(6.0, -6.0, 5.0, 0.5);
    let (traj, m) = run_scenario(&sc).unwrap();
    assert!(m.fault.is_none(), "{:?}", m.fault);
    assert!(m.max_tilt > 0.05);
    let dev = compare_linear_reference(&traj, &ReferenceModel::Altitude(pd())).unwrap();
    assert!(dev.max_abs > 1e-2);
    assert!(dev.final_abs < 1e-6, "{}", dev.final_abs);
}

#[test]
fn beta_stays_inside_saturation_bounds() {
    for alpha in [0.2, 0.5, 0.8] {
        let mut sc = offset_scenario(controller_a(alpha), 20.0);
        sc.initial = QuadState::hover_at(2.0, -1.0, 3.0, 0.3);
        let (_, m) = run_scenario(&sc).unwrap();
        assert_eq!(m.beta_within_bound, Some(true));
        assert!(m.beta_min >= 1.0 - alpha - 1e-12 && m.beta_max <= 1.0 + alpha + 1e-12);
    }
}

#[test]
fn identical_scenarios_are_bit_identical() {
    let sc = offset_scenario(controller_b(PolyFamily::Butterworth, 1.0), 2.0);
    let runs = run_batch(&[sc.clone(), sc]);
    let a = runs[0].as_ref().unwrap();
    let b = runs[1].as_ref().unwrap();
    assert_eq!(a.0.rows, b.0.rows);
    assert_eq!(a.1, b.1);
}

#[test]
fn crossing_the_tilt_singularity_is_flagged() {
    let mut sc = offset_scenario(Controller::OpenLoop, 5.0);
    sc.initial = QuadState {
        rates: Vector3::new(0.0, 0.0, 2.0),
        ..QuadState::default()
    };
    let (traj, m) = run_scenario(&sc).unwrap();
    let fault = m.fault.expect("fault");
    assert_eq!(fault.kind, FaultKind::Domain);
    assert!(!m.converged);
    assert!(traj.rows.last().unwrap().fault);
    assert!(traj.len() < 5001);
    // pi/2 is reached at t = pi/4 under a constant pitch rate of 2 rad/s
    assert!((fault.time - std::f64::consts::FRAC_PI_4).abs() < 2e-3);
}

#[test]
fn negative_thrust_can_be_made_a_fault() {
    let mut sc = offset_scenario(controller_b(PolyFamily::Newton, 2.0), 5.0);
    sc.initial = QuadState::hover_at(0.0, 0.0, 20.0, 0.0);
    sc.nonneg_thrust = true;
    let (_, m) = run_scenario(&sc).unwrap();
    assert_eq!(m.fault.map(|f| f.kind), Some(FaultKind::NegativeThrust));
}

#[test]
fn invalid_scenarios_are_rejected() {
    let mut sc = offset_scenario(controller_a(0.5), 1.0);
    sc.dt = 0.0;
    assert!(run_scenario(&sc).is_err());
    let mut sc = offset_scenario(controller_a(0.5), 1.0);
    sc.horizon = 1e-4;
    assert!(run_scenario(&sc).is_err());
    let mut sc = offset_scenario(controller_a(0.5), 1.0);
    sc.initial.angles[2] = 1.6;
    assert!(run_scenario(&sc).is_err());
}

#[test]
fn csv_has_fixed_columns_and_one_line_per_row() {
    let (traj, _) = run_scenario(&offset_scenario(controller_b(PolyFamily::Newton, 1.0), 0.1)).unwrap();
    let cols = CsvColumns {
        xi: true,
        zeta: true,
        diagnostics: true,
    };
    let mut buf = Vec::new();
    traj.write_csv(&mut buf, cols).unwrap();
    let mut reader = csv::Reader::from_reader(buf.as_slice());
    let header = reader.headers().unwrap().clone();
    assert_eq!(header.len(), Trajectory::header(cols).len());
    assert_eq!(&header[0], "t");
    assert_eq!(&header[22], "fault");
    let records: Vec<_> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(records.len(), traj.len());
    let z0: f64 = records[0][3].parse().unwrap();
    assert_eq!(z0, 1.0);
}
