//! Cascade coordinates of the vehicle model.
//!
//! The error state is split into six 2-vectors:
//!
//! ```text
//! xi1 = (z - z*, phi - phi*)      xi2 = (v_z, phi_dot)
//! xi3 = (x - x*, y - y*)          xi4 = (v_x, v_y)
//! xi5 = g·h(angles)               xi6 = g·dh/dt
//! ```
//!
//! where `h` holds the horizontal components of the thrust direction. With
//! `beta = (u1 + g)/g` the model becomes
//!
//! ```text
//! xi1' = xi2,  xi2' = q1 + b1·(u1, u2),
//! xi3' = xi4,  xi4' = beta·xi5,  xi5' = xi6,  xi6' = q2 + b21·u2 + b22·(u3, u4).
//! ```

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::dynamics::{check_tilt, thrust_direction, QuadState};
use crate::error::{Error, Result};

/// Smallest |det| accepted for any matrix a control law inverts.
pub const SINGULARITY_THRESHOLD: f64 = 1e-9;
/// Lower bound on cos(roll)·cos(pitch) and on each cosine.
pub const TILT_COS_THRESHOLD: f64 = 1e-6;

/// Desired hover point; roll and pitch targets are zero.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Target {
    pub z_star: f64,
    pub phi_star: f64,
    pub x_star: f64,
    pub y_star: f64,
}

impl Target {
    pub fn new(x: f64, y: f64, z: f64, yaw: f64) -> Self {
        Self {
            z_star: z,
            phi_star: yaw,
            x_star: x,
            y_star: y,
        }
    }

    /// Regulated-output error `(z, phi, x, y) - Y*`.
    pub fn output_error(&self, s: &QuadState) -> [f64; 4] {
        [
            s.pos[2] - self.z_star,
            s.angles[0] - self.phi_star,
            s.pos[0] - self.x_star,
            s.pos[1] - self.y_star,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XiState {
    pub xi1: Vector2<f64>,
    pub xi2: Vector2<f64>,
    pub xi3: Vector2<f64>,
    pub xi4: Vector2<f64>,
    pub xi5: Vector2<f64>,
    pub xi6: Vector2<f64>,
    /// `(u1 + g)/g` for the `u1` the state was built with.
    pub beta: f64,
}

impl XiState {
    pub const COLUMNS: [&'static str; 12] = [
        "xi11", "xi12", "xi21", "xi22", "xi31", "xi32", "xi41", "xi42", "xi51", "xi52", "xi61", "xi62",
    ];

    pub fn to_array(&self) -> [f64; 12] {
        let b = [self.xi1, self.xi2, self.xi3, self.xi4, self.xi5, self.xi6];
        let mut out = [0.0; 12];
        for (i, v) in b.iter().enumerate() {
            out[2 * i] = v[0];
            out[2 * i + 1] = v[1];
        }
        out
    }

    /// Horizontal chain `(xi3_j, xi4_j, xi5_j, xi6_j)` for axis `j` (0 = x, 1 = y).
    pub fn horizontal_chain(&self, axis: usize) -> [f64; 4] {
        [self.xi3[axis], self.xi4[axis], self.xi5[axis], self.xi6[axis]]
    }
}

/// Admissible range of the time-varying gain `beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaBound {
    pub beta_min: f64,
    pub beta_max: f64,
    /// Saturation parameter when the bound comes from `L = alpha·g`.
    pub alpha_sat: Option<f64>,
}

impl BetaBound {
    /// Bound `[1 - alpha, 1 + alpha]` produced by saturating `u1` at `alpha·g`.
    /// `alpha = 0` gives the constant-gain case.
    pub fn from_saturation(alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && (0.0..1.0).contains(&alpha)) {
            return Err(Error::InvalidParameter {
                name: "alpha_sat",
                reason: format!("must lie in (0, 1), got {alpha}"),
            });
        }
        Ok(Self {
            beta_min: 1.0 - alpha,
            beta_max: 1.0 + alpha,
            alpha_sat: Some(alpha),
        })
    }

    /// Arbitrary interval with `0 < beta_min <= beta_max`.
    pub fn new(beta_min: f64, beta_max: f64) -> Result<Self> {
        if !(beta_min.is_finite() && beta_min > 0.0) {
            return Err(Error::InvalidParameter {
                name: "beta_min",
                reason: format!("must be > 0, got {beta_min}"),
            });
        }
        if !(beta_max.is_finite() && beta_max >= beta_min) {
            return Err(Error::InvalidParameter {
                name: "beta_max",
                reason: format!("must be finite and >= beta_min = {beta_min}, got {beta_max}"),
            });
        }
        let alpha = 1.0 - beta_min;
        let symmetric = ((1.0 + alpha) - beta_max).abs() <= 1e-12 && alpha >= 0.0;
        Ok(Self {
            beta_min,
            beta_max,
            alpha_sat: symmetric.then_some(alpha),
        })
    }

    pub fn constant(beta: f64) -> Result<Self> {
        Self::new(beta, beta)
    }

    pub fn vertices(&self) -> [f64; 2] {
        [self.beta_min, self.beta_max]
    }

    pub fn contains(&self, beta: f64) -> bool {
        beta >= self.beta_min && beta <= self.beta_max
    }

    /// Point at fraction `s ∈ [0, 1]` along the interval.
    pub fn lerp(&self, s: f64) -> f64 {
        self.beta_min + s * (self.beta_max - self.beta_min)
    }
}

/// Horizontal components of the thrust direction.
pub fn h_vector(phi: f64, psi: f64, theta: f64) -> Vector2<f64> {
    thrust_direction(&Vector3::new(phi, psi, theta)).xy()
}

/// Jacobian of the thrust direction. Row `i` is component (x, y, z)[i], column `j`
/// is the derivative with respect to (phi, psi, theta)[j].
pub fn direction_jacobian(angles: &Vector3<f64>) -> Matrix3<f64> {
    let (sf, cf) = angles[0].sin_cos();
    let (sp, cp) = angles[1].sin_cos();
    let (st, ct) = angles[2].sin_cos();
    Matrix3::new(
        -sf * st * cp + cf * sp,
        -cf * st * sp + sf * cp,
        cf * ct * cp,
        cf * st * cp + sf * sp,
        -sf * st * sp - cf * cp,
        sf * ct * cp,
        0.0,
        -ct * sp,
        -st * cp,
    )
}

/// Second derivatives of each thrust-direction component with respect to
/// (phi, psi, theta); entry `k` is the symmetric Hessian of component k.
pub fn direction_hessians(angles: &Vector3<f64>) -> [Matrix3<f64>; 3] {
    let (sf, cf) = angles[0].sin_cos();
    let (sp, cp) = angles[1].sin_cos();
    let (st, ct) = angles[2].sin_cos();
    let hx = cf * st * cp + sf * sp;
    let hy = sf * st * cp - cf * sp;

    let x_fp = sf * st * sp + cf * cp;
    let x_ft = -sf * ct * cp;
    let x_pt = -cf * ct * sp;
    let x_tt = -cf * st * cp;
    let hess_x = Matrix3::new(-hx, x_fp, x_ft, x_fp, -hx, x_pt, x_ft, x_pt, x_tt);

    let y_fp = -cf * st * sp + sf * cp;
    let y_ft = cf * ct * cp;
    let y_pt = -sf * ct * sp;
    let y_tt = -sf * st * cp;
    let hess_y = Matrix3::new(-hy, y_fp, y_ft, y_fp, -hy, y_pt, y_ft, y_pt, y_tt);

    let z_pp = -ct * cp;
    let z_pt = st * sp;
    let z_tt = -ct * cp;
    let hess_z = Matrix3::new(0.0, 0.0, 0.0, 0.0, z_pp, z_pt, 0.0, z_pt, z_tt);

    [hess_x, hess_y, hess_z]
}

/// Builds the cascade coordinates. `u1` only feeds the `beta` diagnostic.
pub fn to_xi(s: &QuadState, t: &Target, u1: f64, g: f64) -> XiState {
    let jac = direction_jacobian(&s.angles);
    let h_dot = jac * s.rates;
    let dir = thrust_direction(&s.angles);
    let [ez, ephi, ex, ey] = t.output_error(s);
    XiState {
        xi1: Vector2::new(ez, ephi),
        xi2: Vector2::new(s.vel[2], s.rates[0]),
        xi3: Vector2::new(ex, ey),
        xi4: Vector2::new(s.vel[0], s.vel[1]),
        xi5: dir.xy() * g,
        xi6: h_dot.xy() * g,
        beta: beta_of(u1, g),
    }
}

/// `q1 = (g(cosθcosψ - 1), 0)`, `b1 = diag(cosθcosψ, 1)`.
pub fn q1_b1(psi: f64, theta: f64, g: f64) -> Result<(Vector2<f64>, Matrix2<f64>)> {
    check_tilt(psi, theta)?;
    let c = theta.cos() * psi.cos();
    if c < TILT_COS_THRESHOLD {
        return Err(Error::Singular {
            matrix: "b1",
            det: c,
            threshold: TILT_COS_THRESHOLD,
        });
    }
    Ok((Vector2::new(g * (c - 1.0), 0.0), Matrix2::new(c, 0.0, 0.0, 1.0)))
}

/// Terms of `xi6' = q2 + b21·u2 + b22·(u3, u4)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HorizontalTerms {
    pub q2: Vector2<f64>,
    pub b21: Vector2<f64>,
    pub b22: Matrix2<f64>,
}

impl HorizontalTerms {
    pub fn det_b22(&self) -> f64 {
        self.b22.determinant()
    }

    /// `xi6'` for the given angular-acceleration commands.
    pub fn apply(&self, u2: f64, u3: f64, u4: f64) -> Vector2<f64> {
        self.q2 + self.b21 * u2 + self.b22 * Vector2::new(u3, u4)
    }
}

/// Closed-form decomposition of `g·d²h/dt²` with (phi'', psi'', theta'') = (u2, u3, u4).
///
/// `det b22 = g²·cosθ·cos²ψ`, so the guard trips only near the tilt singularity.
pub fn q2_b21_b22(angles: &Vector3<f64>, rates: &Vector3<f64>, g: f64) -> Result<HorizontalTerms> {
    check_tilt(angles[1], angles[2])?;
    let (cp, ct) = (angles[1].cos(), angles[2].cos());
    if cp < TILT_COS_THRESHOLD || ct < TILT_COS_THRESHOLD {
        return Err(Error::Singular {
            matrix: "b22",
            det: g * g * ct * cp * cp,
            threshold: SINGULARITY_THRESHOLD,
        });
    }
    let jac = direction_jacobian(angles);
    let [hx, hy, _] = direction_hessians(angles);
    let q2 = Vector2::new(rates.dot(&(hx * rates)), rates.dot(&(hy * rates))) * g;
    let b21 = Vector2::new(jac[(0, 0)], jac[(1, 0)]) * g;
    let b22 = Matrix2::new(jac[(0, 1)], jac[(0, 2)], jac[(1, 1)], jac[(1, 2)]) * g;
    let det = b22.determinant();
    if det.abs() < SINGULARITY_THRESHOLD {
        return Err(Error::Singular {
            matrix: "b22",
            det,
            threshold: SINGULARITY_THRESHOLD,
        });
    }
    Ok(HorizontalTerms { q2, b21, b22 })
}

/// Normalized total thrust `(u1 + g)/g`.
pub fn beta_of(u1: f64, g: f64) -> f64 {
    (u1 + g) / g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{state_derivative, QuadParams, VirtualControl, GRAVITY};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_3};

    const G: f64 = GRAVITY;

    fn random_angles(rng: &mut ChaCha8Rng, max_tilt: f64) -> Vector3<f64> {
        Vector3::new(
            rng.random_range(-3.0..3.0),
            rng.random_range(-max_tilt..max_tilt),
            rng.random_range(-max_tilt..max_tilt),
        )
    }

    #[test]
    fn h_examples() {
        assert_relative_eq!(h_vector(1.3, 0.0, 0.0), Vector2::zeros(), epsilon = 1e-15);
        assert_relative_eq!(h_vector(0.0, 0.0, FRAC_PI_2), Vector2::new(1.0, 0.0), epsilon = 1e-15);
        assert_relative_eq!(h_vector(FRAC_PI_2, -FRAC_PI_2, 0.0), Vector2::new(-1.0, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn h_matches_integrated_acceleration() {
        // x'' = h_x·g at hover thrust; integrate and differentiate x twice numerically.
        let angles = Vector3::new(FRAC_PI_2, -FRAC_PI_2 + 0.3, 0.2);
        let s = QuadState {
            angles,
            ..QuadState::default()
        };
        let p = QuadParams::default();
        let d = state_derivative(&s, &VirtualControl::default(), &p, false).unwrap();
        let h = h_vector(angles[0], angles[1], angles[2]);
        assert_relative_eq!(d.vel.xy(), h * G, epsilon = 1e-12);
    }

    #[test]
    fn jacobian_and_hessian_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let delta = 1e-5;
        for _ in 0..50 {
            let a = random_angles(&mut rng, 1.2);
            let jac = direction_jacobian(&a);
            let hess = direction_hessians(&a);
            for j in 0..3 {
                let mut e = Vector3::zeros();
                e[j] = delta;
                let fd = (thrust_direction(&(a + e)) - thrust_direction(&(a - e))) / (2.0 * delta);
                assert_relative_eq!(jac.column(j).into_owned(), fd, epsilon = 1e-9);
                let fd_j = (direction_jacobian(&(a + e)) - direction_jacobian(&(a - e))) / (2.0 * delta);
                for (k, h) in hess.iter().enumerate() {
                    for i in 0..3 {
                        assert_relative_eq!(h[(i, j)], fd_j[(k, i)], epsilon = 1e-8);
                    }
                }
            }
        }
    }

    #[test]
    fn xi_at_target_is_zero() {
        let t = Target::new(1.0, 2.0, 3.0, 0.4);
        let s = QuadState::hover_at(1.0, 2.0, 3.0, 0.4);
        let xi = to_xi(&s, &t, 0.0, G);
        assert!(xi.to_array().iter().all(|v| v.abs() < 1e-15));
        assert_eq!(xi.beta, 1.0);

        let s = QuadState::hover_at(1.0, 2.0, 4.0, 0.4);
        let xi = to_xi(&s, &t, 0.0, G);
        assert_eq!(xi.xi1, Vector2::new(1.0, 0.0));
        assert!(xi.to_array()[2..].iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn xi6_matches_finite_difference_along_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let delta = 1e-5;
        for _ in 0..50 {
            let a0 = random_angles(&mut rng, 1.0);
            let r0 = Vector3::new(
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
            );
            let acc = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), 0.3);
            let path = |t: f64| a0 + r0 * t + acc * (0.5 * t * t);
            let s = QuadState {
                angles: a0,
                rates: r0,
                ..QuadState::default()
            };
            let xi = to_xi(&s, &Target::default(), 0.0, G);
            let fd = (h_vector(path(delta)[0], path(delta)[1], path(delta)[2])
                - h_vector(path(-delta)[0], path(-delta)[1], path(-delta)[2]))
                * G
                / (2.0 * delta);
            assert_relative_eq!(xi.xi6, fd, epsilon = 1e-6);
        }
    }

    #[test]
    fn q1_b1_examples() {
        let (q, b) = q1_b1(0.0, 0.0, G).unwrap();
        assert_eq!(q, Vector2::zeros());
        assert_eq!(b, Matrix2::identity());
        let (q, b) = q1_b1(0.0, FRAC_PI_3, G).unwrap();
        assert_relative_eq!(q, Vector2::new(-4.905, 0.0), epsilon = 1e-12);
        assert_relative_eq!(b, Matrix2::new(0.5, 0.0, 0.0, 1.0), epsilon = 1e-12);
        assert!(q1_b1(FRAC_PI_2, 0.0, G).is_err());
    }

    #[test]
    fn q1_b1_reproduces_vertical_dynamics() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = QuadParams::default();
        for _ in 0..100 {
            let a = random_angles(&mut rng, 1.4);
            let u = VirtualControl::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), 0.0, 0.0);
            let s = QuadState {
                angles: a,
                ..QuadState::default()
            };
            let d = state_derivative(&s, &u, &p, false).unwrap();
            let (q, b) = q1_b1(a[1], a[2], G).unwrap();
            let xi2_dot = q + b * Vector2::new(u.u1, u.u2);
            assert_relative_eq!(xi2_dot, Vector2::new(d.vel[2], d.rates[0]), epsilon = 1e-12);
        }
    }

    #[test]
    fn q2_vanishes_at_zero_rates() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let a = random_angles(&mut rng, 1.2);
            let terms = q2_b21_b22(&a, &Vector3::zeros(), G).unwrap();
            assert_eq!(terms.q2, Vector2::zeros());
        }
    }

    #[test]
    fn b22_at_zero_tilt_is_scaled_rotation() {
        for phi in [-2.0, 0.0, 0.3, 1.7] {
            let t = q2_b21_b22(&Vector3::new(phi, 0.0, 0.0), &Vector3::zeros(), G).unwrap();
            let (s, c) = f64::sin_cos(phi);
            assert_relative_eq!(t.b22, Matrix2::new(s, c, -c, s) * G, epsilon = 1e-12);
            assert_relative_eq!(t.det_b22().abs(), G * G, epsilon = 1e-12);
            assert_relative_eq!(t.b22.transpose() * t.b22, Matrix2::identity() * G * G, epsilon = 1e-10);
        }
    }

    #[test]
    fn det_b22_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let a = random_angles(&mut rng, 1.5);
            let t = q2_b21_b22(&a, &Vector3::zeros(), G).unwrap();
            let expected = G * G * a[2].cos() * a[1].cos().powi(2);
            assert_relative_eq!(t.det_b22(), expected, epsilon = 1e-9);
        }
    }

    #[test]
    fn q2_b22_near_singular_rejected() {
        let a = Vector3::new(0.0, FRAC_PI_2 - 1e-9, 0.0);
        assert!(matches!(
            q2_b21_b22(&a, &Vector3::zeros(), G),
            Err(Error::Singular { matrix: "b22", .. })
        ));
    }

    #[test]
    fn xi6_derivative_identity_by_finite_differences() {
        // Constant angular accelerations (u2, u3, u4): angles follow a parabola exactly.
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let delta = 1e-4;
        for _ in 0..100 {
            let a0 = random_angles(&mut rng, 1.0);
            let r0 = Vector3::new(
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
            );
            let u = Vector3::new(
                rng.random_range(-3.0..3.0),
                rng.random_range(-3.0..3.0),
                rng.random_range(-3.0..3.0),
            );
            let at = |t: f64| a0 + r0 * t + u * (0.5 * t * t);
            let h = |t: f64| {
                let a = at(t);
                h_vector(a[0], a[1], a[2]) * G
            };
            let fd = (h(delta) - h(0.0) * 2.0 + h(-delta)) / (delta * delta);
            let terms = q2_b21_b22(&a0, &r0, G).unwrap();
            assert_relative_eq!(terms.apply(u[0], u[1], u[2]), fd, epsilon = 1e-5);
        }
    }

    #[test]
    fn beta_examples_and_bounds() {
        assert_eq!(beta_of(0.0, G), 1.0);
        assert_relative_eq!(beta_of(0.5 * G, G), 1.5, epsilon = 1e-15);
        assert_relative_eq!(beta_of(-0.5 * G, G), 0.5, epsilon = 1e-15);

        let b = BetaBound::from_saturation(0.5).unwrap();
        assert_eq!(b.vertices(), [0.5, 1.5]);
        assert_eq!(b.alpha_sat, Some(0.5));
        assert!(BetaBound::from_saturation(1.5).is_err());
        assert!(BetaBound::new(0.0, 1.0).is_err());
        assert!(BetaBound::new(1.2, 1.0).is_err());
        assert_eq!(BetaBound::new(0.8, 1.2).unwrap().alpha_sat.map(|a| (a * 1e12).round()), Some(2e11));
    }
}
