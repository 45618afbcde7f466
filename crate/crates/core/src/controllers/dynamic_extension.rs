//! Dynamic compensator: double integrators on `(u1, u2)` give the aggregated
//! model full relative degree four in every regulated channel,
//!
//! ```text
//! zeta1' = zeta2,  zeta2' = zeta3,  zeta3' = zeta4,  zeta4' = q4 + b4·U,
//! ```
//!
//! with `U = (v1, v2, u3, u4)`. Channels are ordered `(z, phi, x, y)`.
//!
//! Derivation of `q4`, `b4`. Let `d = (h_x, h_y, cosθcosψ)` be the thrust
//! direction, `W = u1 + g`, `r` the angle rates and `J`, `H_k` the Jacobian and
//! Hessians of `d` in `(phi, psi, theta)`. For any translational channel `k`
//!
//! ```text
//! zeta3_k = W·d_k (minus g for z)
//! zeta4_k = rho1·d_k + W·J_k·r
//! zeta4_k' = v1·d_k + 2·rho1·J_k·r + W·(J_k·a + rᵀ·H_k·r),  a = (u2, u3, u4)
//! ```
//!
//! so `b4_k = (d_k, 0, W·J_k,psi, W·J_k,theta)` and
//! `q4_k = 2·rho1·J_k·r + W·(J_k,phi·u2 + rᵀ·H_k·r)`. The yaw channel has
//! `zeta3 = u2`, `zeta4 = rho2`, `zeta4' = v2`.

use nalgebra::{DMatrix, Matrix4, Vector2, Vector4};
use serde::{Deserialize, Serialize};

use crate::dynamics::{thrust_direction, virtual_to_forces, QuadParams, QuadState, RotorForces, VirtualControl};
use crate::error::{Error, Result};
use crate::gain_synthesis::GammaSet;
use crate::normal_form::{direction_hessians, direction_jacobian, Target, SINGULARITY_THRESHOLD};

/// Integrator states of the compensator: `u12' = rho12`, `rho12' = v12`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompensatorState {
    pub u12: Vector2<f64>,
    pub rho12: Vector2<f64>,
}

impl CompensatorState {
    pub fn to_vector(&self) -> Vector4<f64> {
        Vector4::new(self.u12[0], self.u12[1], self.rho12[0], self.rho12[1])
    }

    pub fn from_slice(v: &[f64]) -> Self {
        Self {
            u12: Vector2::new(v[0], v[1]),
            rho12: Vector2::new(v[2], v[3]),
        }
    }

    /// Time derivative under compensator input `v12`.
    pub fn derivative(&self, v12: &Vector2<f64>) -> Vector4<f64> {
        Vector4::new(self.rho12[0], self.rho12[1], v12[0], v12[1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerBConfig {
    pub gamma: GammaSet,
    pub initial: CompensatorState,
}

impl ControllerBConfig {
    pub fn new(gamma: GammaSet) -> Self {
        Self {
            gamma,
            initial: CompensatorState::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.gamma.validate()?;
        crate::error::ensure_finite("initial compensator state", self.initial.to_vector().as_slice())
    }
}

/// Stack `(zeta1, zeta2, zeta3, zeta4)`, each ordered `(z, phi, x, y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZetaState {
    pub zeta: [Vector4<f64>; 4],
}

impl ZetaState {
    pub const COLUMNS: [&'static str; 16] = [
        "zeta1_z", "zeta1_phi", "zeta1_x", "zeta1_y", "zeta2_z", "zeta2_phi", "zeta2_x", "zeta2_y", "zeta3_z",
        "zeta3_phi", "zeta3_x", "zeta3_y", "zeta4_z", "zeta4_phi", "zeta4_x", "zeta4_y",
    ];

    pub fn to_array(&self) -> [f64; 16] {
        let mut out = [0.0; 16];
        for (i, block) in self.zeta.iter().enumerate() {
            out[4 * i..4 * i + 4].copy_from_slice(block.as_slice());
        }
        out
    }
}

/// Translational channel `k` of the thrust direction (0 = x, 1 = y, 2 = z) for
/// zeta slot `i` (0 = z, 2 = x, 3 = y).
const TRANSLATIONAL: [(usize, usize); 3] = [(0, 2), (2, 0), (3, 1)];

pub fn zeta_state(s: &QuadState, t: &Target, comp: &CompensatorState, g: f64) -> ZetaState {
    let d = thrust_direction(&s.angles);
    let d_dot = direction_jacobian(&s.angles) * s.rates;
    let w = comp.u12[0] + g;
    let rho1 = comp.rho12[0];
    let e = t.output_error(s);

    let zeta1 = Vector4::new(e[0], e[1], e[2], e[3]);
    let zeta2 = Vector4::new(s.vel[2], s.rates[0], s.vel[0], s.vel[1]);
    let mut zeta3 = Vector4::zeros();
    let mut zeta4 = Vector4::zeros();
    for (slot, k) in TRANSLATIONAL {
        zeta3[slot] = w * d[k];
        zeta4[slot] = rho1 * d[k] + w * d_dot[k];
    }
    zeta3[0] -= g;
    zeta3[1] = comp.u12[1];
    zeta4[1] = comp.rho12[1];
    ZetaState {
        zeta: [zeta1, zeta2, zeta3, zeta4],
    }
}

/// Closed-form `(q4, b4)`; columns of `b4` act on `(v1, v2, u3, u4)`.
pub fn q4_b4(s: &QuadState, comp: &CompensatorState, g: f64) -> (Vector4<f64>, Matrix4<f64>) {
    let d = thrust_direction(&s.angles);
    let jac = direction_jacobian(&s.angles);
    let hess = direction_hessians(&s.angles);
    let r = s.rates;
    let w = comp.u12[0] + g;
    let rho1 = comp.rho12[0];
    let u2 = comp.u12[1];

    let d_dot = jac * r;

    let mut q4 = Vector4::zeros();
    let mut b4 = Matrix4::zeros();
    for (slot, k) in TRANSLATIONAL {
        let jr = d_dot[k];
        let curvature = r.dot(&(hess[k] * r));
        q4[slot] = 2.0 * rho1 * jr + w * (jac[(k, 0)] * u2 + curvature);
        b4[(slot, 0)] = d[k];
        b4[(slot, 2)] = w * jac[(k, 1)];
        b4[(slot, 3)] = w * jac[(k, 2)];
    }
    b4[(1, 1)] = 1.0;
    (q4, b4)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerBOutput {
    /// `(v1, v2, u3, u4)`.
    pub input: Vector4<f64>,
    pub control: VirtualControl,
    pub forces: RotorForces,
    pub zeta: ZetaState,
    pub det_b4: f64,
}

impl ControllerBOutput {
    pub fn compensator_input(&self) -> Vector2<f64> {
        Vector2::new(self.input[0], self.input[1])
    }
}

/// `U = b4⁻¹(-q4 - g1·zeta1 - g2·zeta2 - g3·zeta3 - g4·zeta4)`.
pub fn controller_b_output(
    s: &QuadState,
    t: &Target,
    comp: &CompensatorState,
    cfg: &ControllerBConfig,
    p: &QuadParams,
) -> Result<ControllerBOutput> {
    controller_b_output_with(s, t, comp, cfg, p, q4_b4)
}

/// As [`controller_b_output`] with a substitute for the closed-form `q4, b4`.
pub fn controller_b_output_with<F>(
    s: &QuadState,
    t: &Target,
    comp: &CompensatorState,
    cfg: &ControllerBConfig,
    p: &QuadParams,
    terms: F,
) -> Result<ControllerBOutput>
where
    F: Fn(&QuadState, &CompensatorState, f64) -> (Vector4<f64>, Matrix4<f64>),
{
    s.check_tilt_domain()?;
    let zeta = zeta_state(s, t, comp, p.g);
    let (q4, b4) = terms(s, comp, p.g);
    let det_b4 = b4.determinant();
    if !(det_b4.abs() >= SINGULARITY_THRESHOLD) {
        return Err(Error::Singular {
            matrix: "b4",
            det: det_b4,
            threshold: SINGULARITY_THRESHOLD,
        });
    }
    let [g1, g2, g3, g4] = cfg.gamma.gamma;
    let [z1, z2, z3, z4] = zeta.zeta;
    let rhs = -q4 - z1 * g1 - z2 * g2 - z3 * g3 - z4 * g4;
    let input = b4
        .lu()
        .solve(&rhs)
        .ok_or(Error::Singular {
            matrix: "b4",
            det: det_b4,
            threshold: SINGULARITY_THRESHOLD,
        })?;
    let control = VirtualControl::new(comp.u12[0], comp.u12[1], input[2], input[3]);
    let forces = virtual_to_forces(&control, p)?;
    Ok(ControllerBOutput {
        input,
        control,
        forces,
        zeta,
        det_b4,
    })
}

/// 16×16 block companion of the closed loop in `zeta`.
pub fn closed_loop_b_matrix(gamma: &GammaSet) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(16, 16);
    for block in 0..3 {
        for i in 0..4 {
            a[(4 * block + i, 4 * (block + 1) + i)] = 1.0;
        }
    }
    for (block, g) in gamma.gamma.iter().enumerate() {
        for i in 0..4 {
            a[(12 + i, 4 * block + i)] = -g;
        }
    }
    a
}
