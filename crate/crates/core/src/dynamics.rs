//! Quadcopter plant: rigid-body equations of motion, rotor mixer and its inverse.
//!
//! Angles follow the convention used throughout the crate: `phi` is yaw,
//! `psi` is roll and `theta` is pitch. The virtual controls are
//!
//! * `u1` – vertical channel, offset so that `u1 = 0` at hover (m/s²),
//! * `u2` – yaw angular acceleration (rad/s²),
//! * `u3` – roll angular acceleration (rad/s²),
//! * `u4` – pitch angular acceleration (rad/s²).
//!
//! They relate to the rotor thrusts through `(u1 + g, u2, u3, u4) = D·M·F`.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{Matrix4, SVector, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

/// Standard gravity used by the default parameter set (m/s²).
pub const GRAVITY: f64 = 9.81;

/// Physical constants of the vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadParams {
    /// Mass (kg).
    pub m: f64,
    /// Gravitational acceleration (m/s²).
    pub g: f64,
    /// Arm length (m).
    pub ell: f64,
    /// Roll moment of inertia (kg·m²).
    pub j_psi: f64,
    /// Pitch moment of inertia (kg·m²).
    pub j_theta: f64,
    /// Yaw moment of inertia (kg·m²).
    pub j_phi: f64,
    /// Reaction-torque coefficient (torque per unit thrust, m).
    pub c: f64,
    pub a_x: f64,
    pub a_y: f64,
    pub a_z: f64,
    pub a_psi: f64,
    pub a_theta: f64,
    pub a_phi: f64,
}

impl Default for QuadParams {
    fn default() -> Self {
        Self {
            m: 1.0,
            g: GRAVITY,
            ell: 0.2,
            j_psi: 0.01,
            j_theta: 0.01,
            j_phi: 0.02,
            c: 0.05,
            a_x: 0.0,
            a_y: 0.0,
            a_z: 0.0,
            a_psi: 0.0,
            a_theta: 0.0,
            a_phi: 0.0,
        }
    }
}

impl QuadParams {
    /// Parameters with every physical constant set to one, `g` kept at 9.81 and no friction.
    pub fn unit() -> Self {
        Self {
            m: 1.0,
            ell: 1.0,
            j_psi: 1.0,
            j_theta: 1.0,
            j_phi: 1.0,
            c: 1.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("m", self.m),
            ("g", self.g),
            ("ell", self.ell),
            ("j_psi", self.j_psi),
            ("j_theta", self.j_theta),
            ("j_phi", self.j_phi),
            ("c", self.c),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be finite and > 0, got {value}"),
                });
            }
        }
        let friction = [
            ("a_x", self.a_x),
            ("a_y", self.a_y),
            ("a_z", self.a_z),
            ("a_psi", self.a_psi),
            ("a_theta", self.a_theta),
            ("a_phi", self.a_phi),
        ];
        for (name, value) in friction {
            if !(value.is_finite() && value >= 0.0) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be finite and >= 0, got {value}"),
                });
            }
        }
        Ok(())
    }

    /// Thrust of each rotor at hover.
    pub fn hover_thrust(&self) -> f64 {
        self.m * self.g / 4.0
    }
}

/// 12-dimensional rigid-body state. Also used for its time derivative.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadState {
    /// (x, y, z) in m.
    pub pos: Vector3<f64>,
    /// (v_x, v_y, v_z) in m/s.
    pub vel: Vector3<f64>,
    /// (phi, psi, theta) = (yaw, roll, pitch) in rad.
    pub angles: Vector3<f64>,
    /// (phi_dot, psi_dot, theta_dot) in rad/s.
    pub rates: Vector3<f64>,
}

impl QuadState {
    pub fn hover_at(x: f64, y: f64, z: f64, yaw: f64) -> Self {
        Self {
            pos: Vector3::new(x, y, z),
            angles: Vector3::new(yaw, 0.0, 0.0),
            ..Self::default()
        }
    }

    pub fn yaw(&self) -> f64 {
        self.angles[0]
    }

    pub fn roll(&self) -> f64 {
        self.angles[1]
    }

    pub fn pitch(&self) -> f64 {
        self.angles[2]
    }

    pub fn to_vector(&self) -> SVector<f64, 12> {
        let mut v = SVector::<f64, 12>::zeros();
        v.fixed_rows_mut::<3>(0).copy_from(&self.pos);
        v.fixed_rows_mut::<3>(3).copy_from(&self.vel);
        v.fixed_rows_mut::<3>(6).copy_from(&self.angles);
        v.fixed_rows_mut::<3>(9).copy_from(&self.rates);
        v
    }

    pub fn from_slice(v: &[f64]) -> Self {
        assert!(v.len() >= 12, "state slice needs 12 entries");
        Self {
            pos: Vector3::new(v[0], v[1], v[2]),
            vel: Vector3::new(v[3], v[4], v[5]),
            angles: Vector3::new(v[6], v[7], v[8]),
            rates: Vector3::new(v[9], v[10], v[11]),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_vector().iter().all(|v| v.is_finite())
    }

    /// Fails when roll or pitch has reached ±π/2.
    pub fn check_tilt_domain(&self) -> Result<()> {
        check_tilt(self.roll(), self.pitch())
    }
}

pub(crate) fn check_tilt(roll: f64, pitch: f64) -> Result<()> {
    if roll.abs() < FRAC_PI_2 && pitch.abs() < FRAC_PI_2 {
        Ok(())
    } else {
        Err(Error::AngleDomain { roll, pitch })
    }
}

/// Rotor thrusts F1..F4 (N).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotorForces(pub Vector4<f64>);

impl RotorForces {
    pub fn new(f1: f64, f2: f64, f3: f64, f4: f64) -> Self {
        Self(Vector4::new(f1, f2, f3, f4))
    }

    pub fn total(&self) -> f64 {
        self.0.sum()
    }

    pub fn is_nonnegative(&self) -> bool {
        self.0.iter().all(|f| *f >= 0.0)
    }
}

/// Channel-level commands (u1, u2, u3, u4).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VirtualControl {
    pub u1: f64,
    pub u2: f64,
    pub u3: f64,
    pub u4: f64,
}

impl VirtualControl {
    pub fn new(u1: f64, u2: f64, u3: f64, u4: f64) -> Self {
        Self { u1, u2, u3, u4 }
    }

    pub fn as_vector(&self) -> Vector4<f64> {
        Vector4::new(self.u1, self.u2, self.u3, self.u4)
    }

    pub fn from_vector(v: &Vector4<f64>) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }

    /// Angular accelerations commanded for (yaw, roll, pitch).
    pub fn angular(&self) -> Vector3<f64> {
        Vector3::new(self.u2, self.u3, self.u4)
    }
}

/// Allocation between rotor thrusts and virtual controls.
///
/// `pattern` is the signed matrix `M` whose rows are mutually orthogonal with
/// squared norm 4, so `M⁻¹ = Mᵀ/4` holds exactly. `scale` is the diagonal of
/// `D = diag(1/m, C/J_phi, ell/J_psi, ell/J_theta)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixerMatrices {
    pub pattern: Matrix4<f64>,
    pub scale: Vector4<f64>,
    pub pattern_inv: Matrix4<f64>,
}

impl MixerMatrices {
    pub fn signed_pattern() -> Matrix4<f64> {
        Matrix4::new(
            1.0, 1.0, 1.0, 1.0, //
            1.0, -1.0, 1.0, -1.0, //
            -1.0, 1.0, 1.0, -1.0, //
            -1.0, -1.0, 1.0, 1.0,
        )
    }

    pub fn new(p: &QuadParams) -> Self {
        let pattern = Self::signed_pattern();
        Self {
            pattern,
            scale: Vector4::new(1.0 / p.m, p.c / p.j_phi, p.ell / p.j_psi, p.ell / p.j_theta),
            pattern_inv: pattern.transpose() / 4.0,
        }
    }

    /// `D·M`, mapping thrusts to `(u1 + g, u2, u3, u4)`.
    pub fn allocation(&self) -> Matrix4<f64> {
        Matrix4::from_diagonal(&self.scale) * self.pattern
    }
}

/// Maps rotor thrusts to virtual controls.
pub fn forces_to_virtual(f: &RotorForces, p: &QuadParams) -> Result<VirtualControl> {
    ensure_finite("rotor forces", f.0.as_slice())?;
    let mixer = MixerMatrices::new(p);
    let mut out = (mixer.pattern * f.0).component_mul(&mixer.scale);
    out[0] -= p.g;
    Ok(VirtualControl::from_vector(&out))
}

/// Maps virtual controls to rotor thrusts, `F = M⁻¹·D⁻¹·(u1 + g, u2, u3, u4)`.
pub fn virtual_to_forces(u: &VirtualControl, p: &QuadParams) -> Result<RotorForces> {
    ensure_finite("virtual control", u.as_vector().as_slice())?;
    let mixer = MixerMatrices::new(p);
    let mut channels = u.as_vector();
    channels[0] += p.g;
    Ok(RotorForces(mixer.pattern_inv * channels.component_div(&mixer.scale)))
}

/// Unit thrust direction of the body z-axis in the world frame, (x, y, z) components.
pub fn thrust_direction(angles: &Vector3<f64>) -> Vector3<f64> {
    let (sf, cf) = angles[0].sin_cos();
    let (sp, cp) = angles[1].sin_cos();
    let (st, ct) = angles[2].sin_cos();
    Vector3::new(cf * st * cp + sf * sp, sf * st * cp - cf * sp, ct * cp)
}

/// Time derivative of the plant state under virtual control `u`.
///
/// Velocity: `h3(angles)·(u1 + g) − (0, 0, g)`; angular accelerations
/// `(u2, u3, u4)` for (yaw, roll, pitch). Linear drag terms are added only when
/// `friction_enabled` is set; the controller design model never uses them.
pub fn state_derivative(
    s: &QuadState,
    u: &VirtualControl,
    p: &QuadParams,
    friction_enabled: bool,
) -> Result<QuadState> {
    s.check_tilt_domain()?;
    let thrust = u.u1 + p.g;
    let mut vel_dot = thrust_direction(&s.angles) * thrust - Vector3::new(0.0, 0.0, p.g);
    let mut rates_dot = u.angular();
    if friction_enabled {
        vel_dot -= Vector3::new(p.a_x, p.a_y, p.a_z).component_mul(&s.vel);
        rates_dot -= Vector3::new(p.a_phi, p.a_psi, p.a_theta).component_mul(&s.rates);
    }
    Ok(QuadState {
        pos: s.vel,
        vel: vel_dot,
        angles: s.rates,
        rates: rates_dot,
    })
}
