use nalgebra::{DMatrix, Vector3, Vector4};
use proptest::prelude::*;

use quadpos::dynamics::{
    forces_to_virtual, state_derivative, virtual_to_forces, QuadParams, QuadState, RotorForces, VirtualControl,
};
use quadpos::gain_synthesis::{
    alpha2_star, block_symmetric_part, gamma_from_family, phi_matrix, synthesize_alpha_chain, AlphaChain, KVector,
    PolyFamily,
};
use quadpos::linalg::{eigenvalues, is_hurwitz, max_symmetric_eigenvalue};
use quadpos::normal_form::{h_vector, q2_b21_b22, BetaBound};

fn params() -> impl Strategy<Value = QuadParams> {
    (0.3..3.0f64, 0.1..0.5f64, 0.005..0.05f64, 0.005..0.05f64, 0.01..0.1f64, 0.01..0.2f64).prop_map(
        |(m, ell, j_psi, j_theta, j_phi, c)| QuadParams {
            m,
            ell,
            j_psi,
            j_theta,
            j_phi,
            c,
            ..QuadParams::default()
        },
    )
}

fn domain_state() -> impl Strategy<Value = QuadState> {
    (
        prop::array::uniform3(-5.0..5.0f64),
        prop::array::uniform3(-3.0..3.0f64),
        (-3.0..3.0f64, -1.4..1.4f64, -1.4..1.4f64),
        prop::array::uniform3(-3.0..3.0f64),
    )
        .prop_map(|(pos, vel, (phi, psi, theta), rates)| QuadState {
            pos: Vector3::from(pos),
            vel: Vector3::from(vel),
            angles: Vector3::new(phi, psi, theta),
            rates: Vector3::from(rates),
        })
}

fn control() -> impl Strategy<Value = VirtualControl> {
    prop::array::uniform4(-20.0..20.0f64).prop_map(|u| VirtualControl::new(u[0], u[1], u[2], u[3]))
}

fn to_dmatrix(m: &nalgebra::Matrix4<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(4, 4, |r, c| m[(r, c)])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn allocation_round_trip(p in params(), u in control()) {
        let f = virtual_to_forces(&u, &p).unwrap();
        let back = forces_to_virtual(&f, &p).unwrap();
        let scale = u.as_vector().norm().max(p.g);
        prop_assert!((back.as_vector() - u.as_vector()).norm() <= 1e-12 * scale);

        let forces = RotorForces(Vector4::new(f.0[3], f.0[0], f.0[2], f.0[1]));
        let again = virtual_to_forces(&forces_to_virtual(&forces, &p).unwrap(), &p).unwrap();
        prop_assert!((again.0 - forces.0).norm() <= 1e-12 * forces.0.norm().max(1.0));
    }

    #[test]
    fn derivative_is_affine_in_control(s in domain_state(), u in control(), v in control(), a in -2.0..2.0f64, drag in any::<bool>()) {
        let p = QuadParams { a_x: 0.1, a_y: 0.2, a_z: 0.3, a_phi: 0.05, a_psi: 0.05, a_theta: 0.05, ..QuadParams::default() };
        let mix = VirtualControl::from_vector(&(u.as_vector() * a + v.as_vector() * (1.0 - a)));
        let f = |w: &VirtualControl| state_derivative(&s, w, &p, drag).unwrap().to_vector();
        let lhs = f(&mix);
        let rhs = f(&u) * a + f(&v) * (1.0 - a);
        prop_assert!((lhs - rhs).norm() <= 1e-10 * (1.0 + rhs.norm()));
    }

    #[test]
    fn hover_is_an_equilibrium(x in -5.0..5.0f64, y in -5.0..5.0f64, z in -5.0..5.0f64, yaw in -3.0..3.0f64) {
        let s = QuadState::hover_at(x, y, z, yaw);
        let d = state_derivative(&s, &VirtualControl::default(), &QuadParams::default(), true).unwrap();
        prop_assert!(d.to_vector().norm() < 1e-12);
    }

    #[test]
    fn horizontal_direction_is_bounded(phi in -10.0..10.0f64, psi in -1.5..1.5f64, theta in -1.5..1.5f64) {
        prop_assert!(h_vector(phi, psi, theta).norm() <= 1.0 + 1e-15);
        prop_assert!(h_vector(phi, 0.0, 0.0).norm() < 1e-15);
    }

    #[test]
    fn zero_tilt_b22_is_scaled_rotation(phi in -10.0..10.0f64, rates in prop::array::uniform3(-3.0..3.0f64)) {
        let g = 9.81;
        let t = q2_b21_b22(&Vector3::new(phi, 0.0, 0.0), &Vector3::from(rates), g).unwrap();
        let gram = t.b22.transpose() * t.b22;
        prop_assert!((gram - nalgebra::Matrix2::identity() * g * g).norm() < 1e-9);
    }

    #[test]
    fn alpha2_star_monotone(a1 in 0.05..5.0f64, b in 0.05..3.0f64, db in 0.001..1.0f64, da in 0.001..1.0f64) {
        prop_assert!(alpha2_star(a1, b + db).unwrap() < alpha2_star(a1, b).unwrap());
        let hi = 1.0 + a1;
        prop_assert!(alpha2_star(hi + da, b).unwrap() > alpha2_star(hi, b).unwrap());
    }

    #[test]
    fn family_polynomials_are_hurwitz(w in 0.05..20.0f64, bw in any::<bool>()) {
        let family = if bw { PolyFamily::Butterworth } else { PolyFamily::Newton };
        let g = gamma_from_family(family, w).unwrap();
        prop_assert!(is_hurwitz(&g.companion()));
        prop_assert!(g.validate().is_ok());
    }

    #[test]
    fn chi_and_y_coordinates_share_spectrum(alphas in prop::array::uniform4(0.2..4.0f64), beta in 0.2..2.0f64) {
        let e1 = eigenvalues(&to_dmatrix(&KVector::from_alphas(&alphas).chi_matrix(beta)));
        let e2 = eigenvalues(&to_dmatrix(&phi_matrix(&alphas, beta)));
        let scale = 1.0 + e1.iter().map(|z| z.norm()).fold(0.0, f64::max);
        for z in &e1 {
            let nearest = e2.iter().map(|w| (z - w).norm()).fold(f64::INFINITY, f64::min);
            // repeated roots only resolve to the square root of machine precision
            prop_assert!(nearest < 1e-6 * scale, "{z} vs {e2:?}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn vertex_certificate_covers_interior(
        raw in prop::array::uniform4(0.2..20.0f64),
        lo in 0.2..1.0f64,
        width in 0.0..1.5f64,
        a1 in 0.3..2.0f64,
        synthesize in any::<bool>(),
    ) {
        let bound = BetaBound::new(lo, lo + width).unwrap();
        let chain = if synthesize {
            synthesize_alpha_chain(&bound, a1, 1.5).unwrap()
        } else {
            AlphaChain::evaluate(raw, bound).unwrap()
        };
        let full_margin = [bound.beta_min, bound.beta_max]
            .iter()
            .map(|b| max_symmetric_eigenvalue(&block_symmetric_part(&chain.alphas, *b, 4)))
            .fold(f64::NEG_INFINITY, f64::max);
        prop_assume!(full_margin < 0.0);
        for i in 0..50 {
            let beta = bound.lerp((i as f64 + 0.5) / 50.0);
            let interior = max_symmetric_eigenvalue(&block_symmetric_part(&chain.alphas, beta, 4));
            prop_assert!(interior < 0.0, "beta = {beta}: {interior}");
        }
    }
}
