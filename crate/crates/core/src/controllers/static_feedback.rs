//! Static state feedback: saturated PD altitude, PD yaw, and a feedback-linearizing
//! horizontal law whose diagonal gains come from backstepping chains.

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::dynamics::{virtual_to_forces, QuadParams, QuadState, RotorForces, VirtualControl};
use crate::error::{Error, Result};
use crate::gain_synthesis::{KVector, PDGains};
use crate::normal_form::{q2_b21_b22, to_xi, BetaBound, Target, XiState, TILT_COS_THRESHOLD};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerAConfig {
    pub pd: PDGains,
    /// Chain feedback for the x axis (index 0) and the y axis (index 1).
    pub kvec: [KVector; 2],
    /// Saturation level of `u1` as a fraction of `g`.
    pub alpha_sat: f64,
}

impl ControllerAConfig {
    pub fn validate(&self) -> Result<()> {
        self.pd.validate()?;
        for (axis, k) in self.kvec.iter().enumerate() {
            if !k.all_negative() || k.0.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter {
                    name: if axis == 0 { "kvec_x" } else { "kvec_y" },
                    reason: format!("chain gains must be finite and negative, got {:?}", k.0),
                });
            }
        }
        BetaBound::from_saturation(self.alpha_sat)?;
        if self.alpha_sat == 0.0 {
            return Err(Error::InvalidParameter {
                name: "alpha_sat",
                reason: "must lie in (0, 1), got 0".into(),
            });
        }
        Ok(())
    }

    pub fn beta_bound(&self) -> BetaBound {
        BetaBound::from_saturation(self.alpha_sat).expect("validated alpha_sat")
    }
}

/// Clips `x` to `[-level, level]`.
pub fn sat(x: f64, level: f64) -> f64 {
    x.clamp(-level, level)
}

/// Saturated altitude law and PD yaw law.
///
/// `u1 = sat_{alpha g}((g - k11·xi11 - k21·xi21)/(cosθcosψ) - g)`,
/// `u2 = -k12·xi12 - k22·xi22`.
pub fn controller_a_vertical_yaw(xi: &XiState, angles: &Vector3<f64>, cfg: &ControllerAConfig, g: f64) -> Result<(f64, f64)> {
    let c = angles[2].cos() * angles[1].cos();
    if c <= TILT_COS_THRESHOLD {
        return Err(Error::Singular {
            matrix: "b1",
            det: c,
            threshold: TILT_COS_THRESHOLD,
        });
    }
    let pd = &cfg.pd;
    let raw = (g - pd.k11 * xi.xi1[0] - pd.k21 * xi.xi2[0]) / c - g;
    let u1 = sat(raw, cfg.alpha_sat * g);
    let u2 = -pd.k12 * xi.xi1[1] - pd.k22 * xi.xi2[1];
    Ok((u1, u2))
}

/// Desired `xi6'`, i.e. `-(K3·xi3 + K4·xi4 + K5·xi5 + K6·xi6)` per axis.
pub fn horizontal_feedback(xi: &XiState, cfg: &ControllerAConfig) -> Vector2<f64> {
    Vector2::from_fn(|axis, _| {
        let chain = xi.horizontal_chain(axis);
        cfg.kvec[axis].0.iter().zip(chain).map(|(k, x)| k * x).sum()
    })
}

/// Horizontal law `(u3, u4) = b22⁻¹(-q2 - b21·u2 + feedback)`. Also returns det b22.
pub fn controller_a_horizontal(
    xi: &XiState,
    angles: &Vector3<f64>,
    rates: &Vector3<f64>,
    u2: f64,
    cfg: &ControllerAConfig,
    g: f64,
) -> Result<(f64, f64, f64)> {
    let terms = q2_b21_b22(angles, rates, g)?;
    let rhs = horizontal_feedback(xi, cfg) - terms.q2 - terms.b21 * u2;
    let det = terms.det_b22();
    let inv = terms.b22.try_inverse().ok_or(Error::Singular {
        matrix: "b22",
        det,
        threshold: crate::normal_form::SINGULARITY_THRESHOLD,
    })?;
    let u = inv * rhs;
    Ok((u[0], u[1], det))
}

/// Everything the static controller computes at one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerAOutput {
    pub control: VirtualControl,
    pub forces: RotorForces,
    pub xi: XiState,
    pub det_b22: f64,
}

/// Composition: cascade coordinates, vertical/yaw law, horizontal law, allocation.
pub fn controller_a_evaluate(s: &QuadState, t: &Target, cfg: &ControllerAConfig, p: &QuadParams) -> Result<ControllerAOutput> {
    s.check_tilt_domain()?;
    let mut xi = to_xi(s, t, 0.0, p.g);
    let (u1, u2) = controller_a_vertical_yaw(&xi, &s.angles, cfg, p.g)?;
    xi.beta = crate::normal_form::beta_of(u1, p.g);
    let (u3, u4, det_b22) = controller_a_horizontal(&xi, &s.angles, &s.rates, u2, cfg, p.g)?;
    let control = VirtualControl::new(u1, u2, u3, u4);
    let forces = virtual_to_forces(&control, p)?;
    Ok(ControllerAOutput {
        control,
        forces,
        xi,
        det_b22,
    })
}

pub fn controller_a_step(s: &QuadState, t: &Target, cfg: &ControllerAConfig, p: &QuadParams) -> Result<RotorForces> {
    controller_a_evaluate(s, t, cfg, p).map(|o| o.forces)
}
