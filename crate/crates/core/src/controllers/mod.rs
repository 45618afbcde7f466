//! The two feedback laws and a common evaluation interface for the simulator.

mod dynamic_extension;
mod static_feedback;

pub use dynamic_extension::{
    closed_loop_b_matrix, controller_b_output, controller_b_output_with, q4_b4, zeta_state, CompensatorState,
    ControllerBConfig, ControllerBOutput, ZetaState,
};
pub use static_feedback::{
    controller_a_evaluate, controller_a_horizontal, controller_a_step, controller_a_vertical_yaw,
    horizontal_feedback, sat, ControllerAConfig, ControllerAOutput,
};

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::dynamics::{virtual_to_forces, QuadParams, QuadState, RotorForces, VirtualControl};
use crate::error::Result;
use crate::normal_form::{to_xi, Target, XiState};

/// Controller driving a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Controller {
    A(ControllerAConfig),
    B(ControllerBConfig),
    /// Constant hover thrust, no feedback.
    OpenLoop,
}

/// What a controller produces at one evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOutput {
    pub control: VirtualControl,
    pub forces: RotorForces,
    pub xi: XiState,
    pub zeta: Option<ZetaState>,
    pub det_b22: Option<f64>,
    pub det_b4: Option<f64>,
    /// Compensator input `v12` (controller B only).
    pub compensator_input: Vector2<f64>,
}

impl ControlOutput {
    pub fn beta(&self) -> f64 {
        self.xi.beta
    }
}

impl Controller {
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::A(cfg) => cfg.validate(),
            Self::B(cfg) => cfg.validate(),
            Self::OpenLoop => Ok(()),
        }
    }

    pub fn initial_compensator(&self) -> CompensatorState {
        match self {
            Self::B(cfg) => cfg.initial,
            _ => CompensatorState::default(),
        }
    }

    pub fn has_compensator(&self) -> bool {
        matches!(self, Self::B(_))
    }

    pub fn evaluate(&self, s: &QuadState, comp: &CompensatorState, t: &Target, p: &QuadParams) -> Result<ControlOutput> {
        match self {
            Self::A(cfg) => {
                let out = controller_a_evaluate(s, t, cfg, p)?;
                Ok(ControlOutput {
                    control: out.control,
                    forces: out.forces,
                    xi: out.xi,
                    zeta: None,
                    det_b22: Some(out.det_b22),
                    det_b4: None,
                    compensator_input: Vector2::zeros(),
                })
            }
            Self::B(cfg) => {
                let out = controller_b_output(s, t, comp, cfg, p)?;
                Ok(ControlOutput {
                    control: out.control,
                    forces: out.forces,
                    xi: to_xi(s, t, out.control.u1, p.g),
                    zeta: Some(out.zeta),
                    det_b22: None,
                    det_b4: Some(out.det_b4),
                    compensator_input: out.compensator_input(),
                })
            }
            Self::OpenLoop => {
                s.check_tilt_domain()?;
                let control = VirtualControl::default();
                Ok(ControlOutput {
                    control,
                    forces: virtual_to_forces(&control, p)?,
                    xi: to_xi(s, t, 0.0, p.g),
                    zeta: None,
                    det_b22: None,
                    det_b4: None,
                    compensator_input: Vector2::zeros(),
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normal_form::beta_of;

    #[test]
    fn open_loop_holds_hover_thrust() {
        let p = QuadParams::default();
        let out = Controller::OpenLoop
            .evaluate(&QuadState::default(), &CompensatorState::default(), &Target::default(), &p)
            .unwrap();
        assert_eq!(out.control, VirtualControl::default());
        assert_eq!(beta_of(out.control.u1, p.g), 1.0);
    }
}
