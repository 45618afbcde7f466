//! Certification of the chain closed loop `chi' = A(beta(t))·chi`.
//!
//! The algebraic part checks `A(beta)` at both interval vertices. The empirical
//! part drives the chain with random admissible `beta(t)` signals and checks
//! both decay of `chi` and monotone descent of `V = |T·chi|²`.

use std::fmt;

use nalgebra::{Complex, DMatrix, Matrix4, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::backstepping::{block_margin, transform_matrix, KVector};
use crate::linalg::{condition_number, eigenvalues, spectral_radius};
use crate::normal_form::BetaBound;

/// Required contraction `|chi(T)| / |chi(0)|`.
pub const DECAY_RATIO: f64 = 1e-3;
/// Allowed per-step increase of `V` attributed to integration error.
pub const DESCENT_SLACK: f64 = 1e-8;
const MAX_STEPS: usize = 20_000_000;

/// Admissible time-varying gain used in the empirical trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BetaSignal {
    /// Value `values[i]` on `[switch_times[i], switch_times[i + 1])`; the last value holds.
    PiecewiseConstant { switch_times: Vec<f64>, values: Vec<f64> },
    Sinusoid { mean: f64, amplitude: f64, omega: f64, phase: f64 },
}

impl BetaSignal {
    pub fn value(&self, t: f64) -> f64 {
        match self {
            Self::PiecewiseConstant { switch_times, values } => {
                let idx = switch_times.partition_point(|s| *s <= t).saturating_sub(1);
                values[idx]
            }
            Self::Sinusoid {
                mean,
                amplitude,
                omega,
                phase,
            } => mean + amplitude * (omega * t + phase).sin(),
        }
    }

    /// Random signal inside `bound`; even `index` gives piecewise-constant.
    pub fn random(index: usize, bound: &BetaBound, horizon: f64, rng: &mut ChaCha8Rng) -> Self {
        let (lo, hi) = (bound.beta_min, bound.beta_max);
        if index % 2 == 0 {
            let mut switch_times = vec![0.0];
            let mut values = Vec::new();
            let mut t = 0.0;
            while t <= horizon {
                // vertices are the hardest case, so a third of the pieces sit on them
                let v = match rng.random_range(0..3) {
                    0 => {
                        if rng.random_bool(0.5) {
                            lo
                        } else {
                            hi
                        }
                    }
                    _ => rng.random_range(lo..=hi),
                };
                values.push(v);
                t += rng.random_range(0.05..2.0);
                switch_times.push(t);
            }
            switch_times.pop();
            Self::PiecewiseConstant { switch_times, values }
        } else {
            let mean = 0.5 * (lo + hi);
            let half = 0.5 * (hi - lo);
            Self::Sinusoid {
                mean,
                amplitude: half * rng.random_range(0.5..=1.0),
                omega: rng.random_range(0.1..10.0),
                phase: rng.random_range(0.0..std::f64::consts::TAU),
            }
        }
    }
}

impl fmt::Display for BetaSignal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::PiecewiseConstant { switch_times, values } => {
                write!(f, "piecewise-constant with {} pieces", values.len())?;
                if let (Some(first), Some(t)) = (values.first(), switch_times.get(1)) {
                    write!(f, " (first {first:.4} until t = {t:.3})")?;
                }
                Ok(())
            }
            Self::Sinusoid {
                mean,
                amplitude,
                omega,
                phase,
            } => write!(f, "{mean:.4} + {amplitude:.4}·sin({omega:.4}·t + {phase:.4})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub index: usize,
    pub signal: BetaSignal,
    pub initial: [f64; 4],
    /// First time `|chi| < DECAY_RATIO·|chi(0)|`, if reached within the horizon.
    pub decay_time: Option<f64>,
    pub final_norm: f64,
    /// Largest single-step increase of `V` (negative when strictly decreasing).
    pub max_descent_step: f64,
    pub steps: usize,
}

impl TrialOutcome {
    pub fn passed(&self) -> bool {
        self.decay_time.is_some() && self.max_descent_step <= DESCENT_SLACK
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VertexCheck {
    pub beta: f64,
    pub eigenvalues: Vec<(f64, f64)>,
    pub hurwitz: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiCertificate {
    pub k: KVector,
    pub beta: BetaBound,
    pub vertices: Vec<VertexCheck>,
    /// Largest eigenvalue of the full symmetric-part certificate, if the gains
    /// factor into a positive backstepping chain.
    pub lyapunov_margin: Option<f64>,
    pub horizon: f64,
    pub dt: f64,
    pub trials: Vec<TrialOutcome>,
}

impl ChiCertificate {
    pub fn vertices_ok(&self) -> bool {
        self.vertices.iter().all(|v| v.hurwitz)
    }

    pub fn failures(&self) -> Vec<&TrialOutcome> {
        self.trials.iter().filter(|t| !t.passed()).collect()
    }

    pub fn passed(&self) -> bool {
        self.vertices_ok() && self.failures().is_empty()
    }
}

fn to_dmatrix(m: &Matrix4<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(4, 4, |r, c| m[(r, c)])
}

fn rk4(a_of: impl Fn(f64) -> Matrix4<f64>, x: &Vector4<f64>, t: f64, dt: f64) -> Vector4<f64> {
    let half = 0.5 * dt;
    let a_mid = a_of(t + half);
    let k1 = a_of(t) * x;
    let k2 = a_mid * (x + k1 * half);
    let k3 = a_mid * (x + k2 * half);
    let k4 = a_of(t + dt) * (x + k3 * dt);
    x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)
}

/// Two-part certificate of `u = k·chi` over `bound`.
///
/// The horizon follows from the Lyapunov margin `m`: `V' <= m·V` gives
/// `|chi(T)| <= cond(T)·exp(m·T/2)·|chi(0)|`. Trials stop as soon as the decay
/// ratio is reached. Seeds `seed + i` make each trial reproducible.
pub fn certify_chi_closed_loop(k: &KVector, bound: &BetaBound, trials: usize, seed: u64) -> ChiCertificate {
    let vertices: Vec<VertexCheck> = bound
        .vertices()
        .iter()
        .map(|b| {
            let ev = eigenvalues(&to_dmatrix(&k.chi_matrix(*b)));
            VertexCheck {
                beta: *b,
                hurwitz: ev.iter().all(|z| z.re < 0.0),
                eigenvalues: ev.iter().map(|z| (z.re, z.im)).collect(),
            }
        })
        .collect();

    let alphas = k.alphas().filter(|a| a.iter().all(|x| *x > 0.0));
    let lyapunov_margin = alphas.map(|a| block_margin(&a, bound, 4));
    let transform = alphas.map(|a| transform_matrix(&a)).unwrap_or_else(Matrix4::identity);
    let cond = condition_number(&to_dmatrix(&transform));

    let slowest = vertices
        .iter()
        .flat_map(|v| v.eigenvalues.iter().map(|(re, _)| *re))
        .fold(f64::NEG_INFINITY, f64::max);
    let horizon = match lyapunov_margin {
        Some(m) if m < 0.0 => 2.0 * ((1.0 / DECAY_RATIO).ln() + cond.ln()) / -m,
        _ if slowest < 0.0 => 20.0 * ((1.0 / DECAY_RATIO).ln() + cond.ln()) / -slowest,
        _ => 0.0,
    };
    let radius = bound
        .vertices()
        .iter()
        .map(|b| spectral_radius(&to_dmatrix(&k.chi_matrix(*b))))
        .fold(0.0, f64::max);
    let dt = (0.5 / radius).min(1e-2);

    let mut cert = ChiCertificate {
        k: *k,
        beta: *bound,
        vertices,
        lyapunov_margin,
        horizon,
        dt,
        trials: Vec::new(),
    };
    if !cert.vertices_ok() {
        return cert;
    }

    cert.trials = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
            let signal = BetaSignal::random(i, bound, horizon, &mut rng);
            let mut x = Vector4::from_fn(|_, _| rng.random_range(-1.0..1.0));
            x /= x.norm();
            run_trial(i, k, &transform, signal, x, horizon, dt)
        })
        .collect();
    cert
}

fn run_trial(
    index: usize,
    k: &KVector,
    transform: &Matrix4<f64>,
    signal: BetaSignal,
    x0: Vector4<f64>,
    horizon: f64,
    dt: f64,
) -> TrialOutcome {
    let a_of = |t: f64| k.chi_matrix(signal.value(t));
    let n0 = x0.norm();
    let mut x = x0;
    let mut v = (transform * x).norm_squared();
    let mut max_descent_step = f64::NEG_INFINITY;
    let mut decay_time = None;
    let mut steps = 0;
    let max_steps = ((horizon / dt).ceil() as usize).min(MAX_STEPS);
    while steps < max_steps {
        let t = steps as f64 * dt;
        x = rk4(a_of, &x, t, dt);
        steps += 1;
        let v_next = (transform * x).norm_squared();
        max_descent_step = max_descent_step.max(v_next - v);
        v = v_next;
        if !x.iter().all(|c| c.is_finite()) {
            break;
        }
        if x.norm() < DECAY_RATIO * n0 {
            decay_time = Some(steps as f64 * dt);
            break;
        }
    }
    TrialOutcome {
        index,
        signal,
        initial: [x0[0], x0[1], x0[2], x0[3]],
        decay_time,
        final_norm: x.norm(),
        max_descent_step,
        steps,
    }
}

/// Eigenvalues of `A(beta)` as complex numbers.
pub fn chi_eigenvalues(k: &KVector, beta: f64) -> Vec<Complex<f64>> {
    eigenvalues(&to_dmatrix(&k.chi_matrix(beta)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gain_synthesis::backstepping::synthesize_alpha_chain;

    #[test]
    fn unit_alphas_are_rejected() {
        // s⁴ + s³ + s² + s + 1 has its roots on the unit circle, two of them in the right half plane
        let k = KVector::from_alphas(&[1.0; 4]);
        assert!(chi_eigenvalues(&k, 1.0).iter().any(|z| z.re > 0.0));
        let cert = certify_chi_closed_loop(&k, &BetaBound::constant(1.0).unwrap(), 0, 0);
        assert!(!cert.vertices_ok());

        let bound = BetaBound::constant(1.0).unwrap();
        let chain = synthesize_alpha_chain(&bound, 1.0, 2.0).unwrap();
        let cert = certify_chi_closed_loop(&chain.kvector(), &bound, 0, 0);
        assert!(cert.vertices_ok());
    }

    #[test]
    fn wrong_sign_fails_vertex_check() {
        let k = KVector([1.0, -1.0, -1.0, -1.0]);
        let cert = certify_chi_closed_loop(&k, &BetaBound::constant(1.0).unwrap(), 4, 0);
        assert!(!cert.vertices_ok());
        assert!(!cert.passed());
        assert!(cert.trials.is_empty());
    }

    #[test]
    fn signals_stay_in_bounds() {
        let bound = BetaBound::from_saturation(0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for i in 0..20 {
            let s = BetaSignal::random(i, &bound, 30.0, &mut rng);
            for j in 0..3000 {
                assert!(bound.contains(s.value(j as f64 * 0.01)));
            }
        }
    }

    #[test]
    fn synthesized_chain_small_trial_batch() {
        let bound = BetaBound::new(0.8, 1.2).unwrap();
        let chain = synthesize_alpha_chain(&bound, 0.5, 1.1).unwrap();
        let cert = certify_chi_closed_loop(&chain.kvector(), &bound, 6, 42);
        assert!(cert.passed(), "{:?}", cert.failures());
        let again = certify_chi_closed_loop(&chain.kvector(), &bound, 6, 42);
        assert_eq!(cert, again);
    }
}
