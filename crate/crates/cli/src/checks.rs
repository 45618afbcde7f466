//! Built-in invariant suite behind `quadpos verify`.

use nalgebra::{Matrix4, SVector, Vector2, Vector3, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use quadpos::controllers::{q4_b4, zeta_state, CompensatorState};
use quadpos::dynamics::{
    forces_to_virtual, state_derivative, virtual_to_forces, QuadParams, QuadState, VirtualControl, GRAVITY,
};
use quadpos::gain_synthesis::{block_margin, block_symmetric_part, gamma_from_family, synthesize_alpha_chain, PolyFamily};
use quadpos::linalg::{is_hurwitz, max_symmetric_eigenvalue};
use quadpos::normal_form::{h_vector, q2_b21_b22, to_xi, BetaBound, Target};

/// Deliberate corruption of a closed form, used to confirm the suite bites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum InjectedFault {
    B4,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub points: usize,
    pub max_residual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckResult {
    fn new(name: &'static str, points: usize, max_residual: f64, tolerance: f64) -> Self {
        Self {
            name,
            points,
            max_residual,
            tolerance,
            passed: max_residual <= tolerance,
        }
    }
}

type Terms = fn(&QuadState, &CompensatorState, f64) -> (Vector4<f64>, Matrix4<f64>);

fn perturbed_q4_b4(s: &QuadState, comp: &CompensatorState, g: f64) -> (Vector4<f64>, Matrix4<f64>) {
    let (q4, mut b4) = q4_b4(s, comp, g);
    b4[(2, 2)] *= 1.05;
    (q4, b4)
}

fn random_state(rng: &mut ChaCha8Rng) -> QuadState {
    let mut r = |lo: f64, hi: f64| rng.random_range(lo..hi);
    QuadState {
        pos: Vector3::new(r(-3.0, 3.0), r(-3.0, 3.0), r(-3.0, 3.0)),
        vel: Vector3::new(r(-2.0, 2.0), r(-2.0, 2.0), r(-2.0, 2.0)),
        angles: Vector3::new(r(-3.0, 3.0), r(-1.2, 1.2), r(-1.2, 1.2)),
        rates: Vector3::new(r(-2.0, 2.0), r(-2.0, 2.0), r(-2.0, 2.0)),
    }
}

fn random_control(rng: &mut ChaCha8Rng, g: f64) -> VirtualControl {
    VirtualControl::new(
        rng.random_range(-0.5..0.5) * g,
        rng.random_range(-3.0..3.0),
        rng.random_range(-3.0..3.0),
        rng.random_range(-3.0..3.0),
    )
}

fn mixer_round_trip(rng: &mut ChaCha8Rng, n: usize) -> CheckResult {
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let p = QuadParams {
            m: rng.random_range(0.3..3.0),
            ell: rng.random_range(0.1..0.5),
            j_psi: rng.random_range(0.005..0.05),
            j_theta: rng.random_range(0.005..0.05),
            j_phi: rng.random_range(0.01..0.1),
            c: rng.random_range(0.01..0.2),
            ..QuadParams::default()
        };
        let u = random_control(rng, p.g);
        let back = virtual_to_forces(&u, &p)
            .and_then(|f| forces_to_virtual(&f, &p))
            .map(|v| v.as_vector())
            .unwrap_or(Vector4::repeat(f64::NAN));
        let rel = (back - u.as_vector()).norm() / u.as_vector().norm().max(p.g);
        worst = worst.max(if rel.is_nan() { f64::INFINITY } else { rel });
    }
    CheckResult::new("mixer_round_trip", n, worst, 1e-12)
}

fn h_identities(rng: &mut ChaCha8Rng, n: usize) -> CheckResult {
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let s = random_state(rng);
        let [phi, psi, theta] = [s.angles[0], s.angles[1], s.angles[2]];
        worst = worst
            .max(h_vector(phi, psi, theta).norm() - 1.0)
            .max(h_vector(phi, 0.0, 0.0).norm());
    }
    CheckResult::new("h_identities", n, worst, 1e-12)
}

/// `q2 + b21·u2 + b22·(u3, u4)` against a central difference of `xi6` along the flow.
fn xi6_rate(rng: &mut ChaCha8Rng, n: usize) -> CheckResult {
    let p = QuadParams::default();
    let t = Target::default();
    let tau = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let s = random_state(rng);
        let u = random_control(rng, p.g);
        let ds = state_derivative(&s, &u, &p, false).unwrap().to_vector();
        let at = |sign: f64| {
            let moved = QuadState::from_slice((s.to_vector() + ds * (sign * tau)).as_slice());
            to_xi(&moved, &t, u.u1, p.g).xi6
        };
        let fd = (at(1.0) - at(-1.0)) / (2.0 * tau);
        let rel = match q2_b21_b22(&s.angles, &s.rates, p.g) {
            Ok(terms) => (terms.apply(u.u2, u.u3, u.u4) - fd).norm() / (1.0 + fd.norm()),
            Err(_) => f64::INFINITY,
        };
        worst = worst.max(rel);
    }
    CheckResult::new("q2_b22_finite_difference", n, worst, 1e-6)
}

fn random_point_b(rng: &mut ChaCha8Rng) -> (QuadState, CompensatorState, Vector4<f64>) {
    let s = random_state(rng);
    let comp = CompensatorState {
        u12: Vector2::new(rng.random_range(-0.5..0.5) * GRAVITY, rng.random_range(-2.0..2.0)),
        rho12: Vector2::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)),
    };
    let input = Vector4::from_fn(|_, _| rng.random_range(-3.0..3.0));
    (s, comp, input)
}

/// `q4 + b4·U` against a central difference of `zeta4` along the extended flow.
fn zeta4_rate(rng: &mut ChaCha8Rng, n: usize, terms: Terms) -> CheckResult {
    let p = QuadParams::default();
    let t = Target::default();
    let tau = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let (s, comp, input) = random_point_b(rng);
        let u = VirtualControl::new(comp.u12[0], comp.u12[1], input[2], input[3]);
        let mut x = SVector::<f64, 16>::zeros();
        x.fixed_rows_mut::<12>(0).copy_from(&s.to_vector());
        x.fixed_rows_mut::<4>(12).copy_from(&comp.to_vector());
        let mut dx = SVector::<f64, 16>::zeros();
        dx.fixed_rows_mut::<12>(0)
            .copy_from(&state_derivative(&s, &u, &p, false).unwrap().to_vector());
        dx.fixed_rows_mut::<4>(12)
            .copy_from(&comp.derivative(&Vector2::new(input[0], input[1])));
        let at = |sign: f64| {
            let y = x + dx * (sign * tau);
            let st = QuadState::from_slice(&y.as_slice()[..12]);
            let c = CompensatorState::from_slice(&y.as_slice()[12..]);
            zeta_state(&st, &t, &c, p.g).zeta[3]
        };
        let fd = (at(1.0) - at(-1.0)) / (2.0 * tau);
        let (q4, b4) = terms(&s, &comp, p.g);
        worst = worst.max((q4 + b4 * input - fd).norm() / (1.0 + fd.norm()));
    }
    CheckResult::new("q4_b4_finite_difference", n, worst, 1e-6)
}

fn det_b4(rng: &mut ChaCha8Rng, n: usize, terms: Terms) -> CheckResult {
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let (s, comp, _) = random_point_b(rng);
        let (_, b4) = terms(&s, &comp, GRAVITY);
        let w = comp.u12[0] + GRAVITY;
        worst = worst.max((b4.determinant() - w * w * s.roll().cos()).abs() / (w * w));
    }
    CheckResult::new("det_b4_closed_form", n, worst, 1e-9)
}

/// Largest interior margin of chains that pass the vertex certificate (must be negative).
fn vertex_sufficiency(rng: &mut ChaCha8Rng, n: usize) -> CheckResult {
    let mut worst = f64::NEG_INFINITY;
    let mut points = 0;
    for _ in 0..n {
        let lo = rng.random_range(0.2..1.0);
        let bound = BetaBound::new(lo, lo + rng.random_range(0.0..1.5)).unwrap();
        let Ok(chain) = synthesize_alpha_chain(&bound, rng.random_range(0.3..2.0), 1.5) else {
            continue;
        };
        if block_margin(&chain.alphas, &bound, 4) >= 0.0 {
            continue;
        }
        points += 1;
        for i in 0..50 {
            let beta = bound.lerp((i as f64 + 0.5) / 50.0);
            worst = worst.max(max_symmetric_eigenvalue(&block_symmetric_part(&chain.alphas, beta, 4)));
        }
    }
    let mut result = CheckResult::new("vertex_sufficiency", points, worst, 0.0);
    result.passed = points > 0 && worst < 0.0;
    result
}

fn gamma_hurwitz(rng: &mut ChaCha8Rng, n: usize) -> CheckResult {
    let mut worst = f64::NEG_INFINITY;
    for i in 0..n {
        let family = if i % 2 == 0 { PolyFamily::Newton } else { PolyFamily::Butterworth };
        let g = gamma_from_family(family, rng.random_range(0.05..20.0)).unwrap();
        if !is_hurwitz(&g.companion()) {
            worst = f64::INFINITY;
        }
        worst = worst.max(quadpos::linalg::spectral_abscissa(&g.companion()));
    }
    let mut result = CheckResult::new("gamma_hurwitz", n, worst, 0.0);
    result.passed = worst < 0.0;
    result
}

pub fn run_checks(seed: u64, trials: usize, fault: Option<InjectedFault>) -> Vec<CheckResult> {
    let terms: Terms = match fault {
        Some(InjectedFault::B4) => perturbed_q4_b4,
        None => q4_b4,
    };
    // every check owns a stream so adding one does not shift the others
    let rng = |k: u64| ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9).wrapping_add(k));
    vec![
        mixer_round_trip(&mut rng(0), trials),
        h_identities(&mut rng(1), trials),
        xi6_rate(&mut rng(2), trials),
        zeta4_rate(&mut rng(3), trials, terms),
        det_b4(&mut rng(4), trials, terms),
        vertex_sufficiency(&mut rng(5), trials),
        gamma_hurwitz(&mut rng(6), trials),
    ]
}

pub fn render_table(results: &[CheckResult]) -> String {
    let mut out = format!("{:<26} {:>7} {:>14} {:>10}  result\n", "check", "points", "max residual", "tolerance");
    for r in results {
        out.push_str(&format!(
            "{:<26} {:>7} {:>14.3e} {:>10.1e}  {}\n",
            r.name,
            r.points,
            r.max_residual,
            r.tolerance,
            if r.passed { "PASS" } else { "FAIL" }
        ));
    }
    out
}
