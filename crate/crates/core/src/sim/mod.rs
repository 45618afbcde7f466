//! Deterministic fixed-step closed-loop simulation.
//!
//! The integrated stack holds the 12 plant states followed by the 4
//! compensator states (zero and unused for the static controller). The
//! controller is evaluated at every Runge–Kutta stage.

mod metrics;
mod reference;
mod trajectory;

pub use metrics::{ChannelMetrics, Metrics, CHANNEL_NAMES, SETTLE_BAND};
pub use reference::{compare_linear_reference, LinearDeviation, ReferenceModel};
pub use trajectory::{CsvColumns, FaultKind, FaultRecord, Trajectory, TrajectoryRow};

use nalgebra::SVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::controllers::{CompensatorState, ControlOutput, Controller};
use crate::dynamics::{forces_to_virtual, state_derivative, QuadParams, QuadState};
use crate::error::{Error, Result};
use crate::normal_form::Target;

pub type Stack = SVector<f64, 16>;

/// Default final-error tolerance for declaring a run converged.
pub const DEFAULT_CONVERGENCE_TOL: f64 = 1e-3;

/// Classical fourth-order Runge–Kutta step of `y' = f(t, y)`.
pub fn rk4_step<const N: usize, F>(mut f: F, t: f64, y: &SVector<f64, N>, dt: f64) -> Result<SVector<f64, N>>
where
    F: FnMut(f64, &SVector<f64, N>) -> Result<SVector<f64, N>>,
{
    let half = 0.5 * dt;
    let mut eval = |tau: f64, x: &SVector<f64, N>| -> Result<SVector<f64, N>> {
        let d = f(tau, x)?;
        if d.iter().all(|v| v.is_finite()) {
            Ok(d)
        } else {
            Err(Error::Integration {
                time: tau,
                reason: "non-finite derivative".into(),
            })
        }
    };
    let k1 = eval(t, y)?;
    let k2 = eval(t + half, &(y + k1 * half))?;
    let k3 = eval(t + half, &(y + k2 * half))?;
    let k4 = eval(t + dt, &(y + k3 * dt))?;
    Ok(y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub params: QuadParams,
    pub initial: QuadState,
    pub target: Target,
    pub controller: Controller,
    pub dt: f64,
    pub horizon: f64,
    pub friction_enabled: bool,
    /// Treat any negative rotor thrust as a fault.
    pub nonneg_thrust: bool,
    pub seed: u64,
    pub convergence_tol: f64,
}

impl Scenario {
    pub fn new(params: QuadParams, initial: QuadState, target: Target, controller: Controller, horizon: f64) -> Self {
        Self {
            params,
            initial,
            target,
            controller,
            dt: 1e-3,
            horizon,
            friction_enabled: false,
            nonneg_thrust: false,
            seed: 0,
            convergence_tol: DEFAULT_CONVERGENCE_TOL,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidParameter {
                name: "dt",
                reason: format!("must be > 0, got {}", self.dt),
            });
        }
        if !(self.horizon.is_finite() && self.horizon >= self.dt) {
            return Err(Error::InvalidParameter {
                name: "horizon",
                reason: format!("must be >= dt = {}, got {}", self.dt, self.horizon),
            });
        }
        if !(self.convergence_tol.is_finite() && self.convergence_tol > 0.0) {
            return Err(Error::InvalidParameter {
                name: "convergence_tol",
                reason: format!("must be > 0, got {}", self.convergence_tol),
            });
        }
        if !self.initial.is_finite() {
            return Err(Error::InvalidInput("initial state must be finite".into()));
        }
        self.initial.check_tilt_domain()?;
        self.controller.validate()
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    fn initial_stack(&self) -> Stack {
        let mut x = Stack::zeros();
        x.fixed_rows_mut::<12>(0).copy_from(&self.initial.to_vector());
        x.fixed_rows_mut::<4>(12)
            .copy_from(&self.controller.initial_compensator().to_vector());
        x
    }
}

fn split(x: &Stack) -> (QuadState, CompensatorState) {
    (QuadState::from_slice(&x.as_slice()[..12]), CompensatorState::from_slice(&x.as_slice()[12..]))
}

/// Closed-loop right-hand side; also returns the controller output it used.
fn closed_loop_rhs(sc: &Scenario, x: &Stack) -> Result<(Stack, ControlOutput)> {
    let (s, comp) = split(x);
    let out = sc.controller.evaluate(&s, &comp, &sc.target, &sc.params)?;
    if sc.nonneg_thrust && !out.forces.is_nonnegative() {
        return Err(Error::InvalidInput(format!("negative rotor thrust commanded: {:?}", out.forces.0.as_slice())));
    }
    let applied = forces_to_virtual(&out.forces, &sc.params)?;
    let d = state_derivative(&s, &applied, &sc.params, sc.friction_enabled)?;
    let mut dx = Stack::zeros();
    dx.fixed_rows_mut::<12>(0).copy_from(&d.to_vector());
    if sc.controller.has_compensator() {
        dx.fixed_rows_mut::<4>(12)
            .copy_from(&comp.derivative(&out.compensator_input));
    }
    Ok((dx, out))
}

fn fault_record(time: f64, err: &Error, nonneg: bool) -> FaultRecord {
    let kind = match err {
        Error::Integration { .. } => FaultKind::Integration,
        Error::AngleDomain { .. } => FaultKind::Domain,
        Error::InvalidInput(msg) if nonneg && msg.starts_with("negative rotor thrust") => FaultKind::NegativeThrust,
        _ => FaultKind::Control,
    };
    FaultRecord {
        time,
        kind,
        message: err.to_string(),
    }
}

/// Runs the closed loop over the horizon. Faults truncate the log and are
/// recorded on the trajectory; they never abort with a panic.
pub fn run_scenario(sc: &Scenario) -> Result<(Trajectory, Metrics)> {
    sc.validate()?;
    let steps = sc.steps();
    let mut traj = Trajectory::with_capacity(steps + 1);
    let mut x = sc.initial_stack();
    for n in 0..=steps {
        let t = n as f64 * sc.dt;
        let (s, comp) = split(&x);
        match closed_loop_rhs(sc, &x) {
            Ok((_, out)) => traj.rows.push(TrajectoryRow::from_output(t, s, comp, &out)),
            Err(e) => {
                traj.rows.push(TrajectoryRow::faulted(t, s, comp));
                traj.fault = Some(fault_record(t, &e, sc.nonneg_thrust));
                break;
            }
        }
        if n == steps {
            break;
        }
        match rk4_step(|_, y| closed_loop_rhs(sc, y).map(|(d, _)| d), t, &x, sc.dt) {
            Ok(next) => x = next,
            Err(e) => {
                if let Some(last) = traj.rows.last_mut() {
                    last.fault = true;
                }
                traj.fault = Some(fault_record(t, &e, sc.nonneg_thrust));
                break;
            }
        }
    }
    let metrics = Metrics::compute(sc, &traj);
    Ok((traj, metrics))
}

/// Runs independent scenarios in parallel; results keep the input order.
pub fn run_batch(scenarios: &[Scenario]) -> Vec<Result<(Trajectory, Metrics)>> {
    scenarios.par_iter().map(run_scenario).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::GRAVITY;
    use approx::assert_relative_eq;
    use nalgebra::{SVector, Vector3};

    #[test]
    fn rk4_constant_state() {
        let y = SVector::<f64, 3>::new(1.0, 2.0, 3.0);
        let next = rk4_step(|_, _| Ok(SVector::<f64, 3>::zeros()), 0.0, &y, 0.1).unwrap();
        assert_eq!(next, y);
    }

    #[test]
    fn rk4_exponential() {
        // one step of y' = y multiplies by the degree-4 Taylor polynomial of e^h
        let h: f64 = 0.1;
        let growth = 1.0 + h + h * h / 2.0 + h.powi(3) / 6.0 + h.powi(4) / 24.0;
        let mut y = SVector::<f64, 1>::new(1.0);
        for n in 0..10 {
            y = rk4_step(|_, x| Ok(*x), n as f64 * h, &y, h).unwrap();
        }
        assert_relative_eq!(y[0], growth.powi(10), epsilon = 1e-14);
        assert_relative_eq!(y[0], std::f64::consts::E, epsilon = 1e-5);
    }

    #[test]
    fn rk4_non_finite_is_fault() {
        let y = SVector::<f64, 1>::new(1.0);
        let err = rk4_step(|_, _| Ok(SVector::<f64, 1>::new(f64::NAN)), 0.0, &y, 0.1);
        assert!(matches!(err, Err(Error::Integration { .. })));
    }

    #[test]
    fn free_fall_with_zero_thrust() {
        // open loop plant under u = -g·e1
        let p = QuadParams::default();
        let mut x = SVector::<f64, 12>::zeros();
        let u = crate::dynamics::VirtualControl::new(-p.g, 0.0, 0.0, 0.0);
        let f = |_: f64, y: &SVector<f64, 12>| {
            state_derivative(&QuadState::from_slice(y.as_slice()), &u, &p, false).map(|d| d.to_vector())
        };
        for n in 0..1000 {
            x = rk4_step(f, n as f64 * 1e-3, &x, 1e-3).unwrap();
        }
        assert_relative_eq!(x[5], -GRAVITY, epsilon = 1e-9);
        assert_relative_eq!(x[2], -0.5 * GRAVITY, epsilon = 1e-9);
    }

    #[test]
    fn friction_never_speeds_up_free_motion() {
        let p = QuadParams {
            a_x: 0.4,
            a_y: 0.2,
            a_z: 0.3,
            ..QuadParams::default()
        };
        let u = crate::dynamics::VirtualControl::new(-p.g, 0.0, 0.0, 0.0);
        let v0 = Vector3::new(2.0, -1.0, 0.5);
        let mut x = QuadState {
            vel: v0,
            ..QuadState::default()
        }
        .to_vector();
        let f = |_: f64, y: &SVector<f64, 12>| {
            state_derivative(&QuadState::from_slice(y.as_slice()), &u, &p, true).map(|d| d.to_vector())
        };
        for n in 1..=2000 {
            x = rk4_step(f, n as f64 * 1e-3, &x, 1e-3).unwrap();
            let t = n as f64 * 1e-3;
            // frictionless free fall: v(t) = v0 - g·t·e_z
            let bound = (v0 - Vector3::new(0.0, 0.0, p.g * t)).norm();
            assert!(Vector3::new(x[3], x[4], x[5]).norm() <= bound + 1e-12);
        }
    }
}
