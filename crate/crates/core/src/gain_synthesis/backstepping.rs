//! Backstepping gains for the chain
//!
//! ```text
//! chi1' = chi2,  chi2' = beta(t)·chi3,  chi3' = chi4,  chi4' = u,   u = k·chi
//! ```
//!
//! with `beta(t)` confined to `[beta_min, beta_max]`. The change of variables
//! `y1 = chi1, y2 = chi2 + a1·y1, y3 = chi3 + a2·y2, y4 = chi4 + a3·y3` and the
//! law `u = -a4·y4` give `k = -(a1a2a3a4, a2a3a4, a3a4, a4)`. Each `a_j` is
//! certified by requiring the symmetric part of the leading `j×j` block of the
//! closed loop in `y` to be negative definite at both ends of the interval; the
//! block is affine in `beta`, so the two vertices cover the whole interval.

use nalgebra::{DMatrix, Matrix2, Matrix4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::max_symmetric_eigenvalue;
use crate::normal_form::BetaBound;

/// Feedback `u = k·chi` in chain coordinates. All entries are negative for a
/// stabilizing chain; the diagonal gains of the horizontal law are `-k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KVector(pub [f64; 4]);

impl KVector {
    pub fn from_alphas(a: &[f64; 4]) -> Self {
        Self([
            -a[0] * a[1] * a[2] * a[3],
            -a[1] * a[2] * a[3],
            -a[2] * a[3],
            -a[3],
        ])
    }

    /// Gains whose `beta = 1` closed loop has characteristic polynomial
    /// `s⁴ + c[3]s³ + c[2]s² + c[1]s + c[0]`.
    pub fn from_char_poly(c: &[f64; 4]) -> Self {
        Self([-c[0], -c[1], -c[2], -c[3]])
    }

    /// Recovers the backstepping parameters, `None` if any ratio is undefined.
    pub fn alphas(&self) -> Option<[f64; 4]> {
        let k = self.0;
        if k[1] == 0.0 || k[2] == 0.0 || k[3] == 0.0 {
            return None;
        }
        Some([k[0] / k[1], k[1] / k[2], k[2] / k[3], -k[3]])
    }

    /// Positive diagonal gains `(K3, K4, K5, K6)` for one horizontal axis.
    pub fn diag_gains(&self) -> [f64; 4] {
        self.0.map(|k| -k)
    }

    pub fn all_negative(&self) -> bool {
        self.0.iter().all(|k| *k < 0.0)
    }

    /// Closed-loop matrix of the chain at a fixed `beta`.
    pub fn chi_matrix(&self, beta: f64) -> Matrix4<f64> {
        let k = self.0;
        Matrix4::new(
            0.0, 1.0, 0.0, 0.0, //
            0.0, 0.0, beta, 0.0, //
            0.0, 0.0, 0.0, 1.0, //
            k[0], k[1], k[2], k[3],
        )
    }
}

/// Certified backstepping parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaChain {
    pub alphas: [f64; 4],
    pub beta: BetaBound,
    /// Step margins: the two-variable certificate of step 2, then the largest
    /// eigenvalue of the symmetric part of the 3×3 and 4×4 blocks. Negative
    /// values certify.
    pub margins: [f64; 3],
}

impl AlphaChain {
    /// Evaluates the step margins of an arbitrary positive chain.
    pub fn evaluate(alphas: [f64; 4], beta: BetaBound) -> Result<Self> {
        if alphas.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
            return Err(Error::InvalidInput(format!("alphas must be positive, got {alphas:?}")));
        }
        validate_bound(&beta)?;
        Ok(Self {
            alphas,
            beta,
            margins: [
                certify_pair(alphas[0], alphas[1], &beta),
                block_margin(&alphas, &beta, 3),
                block_margin(&alphas, &beta, 4),
            ],
        })
    }

    pub fn is_certified(&self) -> bool {
        self.margins.iter().all(|m| *m < 0.0)
    }

    pub fn kvector(&self) -> KVector {
        k_from_alpha(self)
    }
}

pub fn k_from_alpha(chain: &AlphaChain) -> KVector {
    KVector::from_alphas(&chain.alphas)
}

fn validate_bound(beta: &BetaBound) -> Result<()> {
    if !(beta.beta_min.is_finite() && beta.beta_min > 0.0) {
        return Err(Error::InvalidParameter {
            name: "beta_min",
            reason: format!("must be > 0, got {}", beta.beta_min),
        });
    }
    if !(beta.beta_max.is_finite() && beta.beta_max >= beta.beta_min) {
        return Err(Error::InvalidParameter {
            name: "beta_max",
            reason: format!("must be >= beta_min, got {}", beta.beta_max),
        });
    }
    Ok(())
}

/// Step-2 threshold: `a2 > (3a1² + (a1² - 1)²) / (2·a1·beta_min)` makes the
/// two-variable certificate negative definite for every admissible `beta`.
pub fn alpha2_star(alpha1: f64, beta_min: f64) -> Result<f64> {
    if !(alpha1.is_finite() && alpha1 > 0.0) {
        return Err(Error::InvalidParameter {
            name: "alpha1",
            reason: format!("must be > 0, got {alpha1}"),
        });
    }
    if !(beta_min.is_finite() && beta_min > 0.0) {
        return Err(Error::InvalidParameter {
            name: "beta_min",
            reason: format!("must be > 0, got {beta_min}"),
        });
    }
    let a2 = alpha1 * alpha1;
    Ok((3.0 * a2 + (a2 - 1.0).powi(2)) / (2.0 * alpha1 * beta_min))
}

/// Matrix of the quadratic form left in `V2' + a1·V2` for `V2 = y1² + y2²`.
pub fn pair_certificate_matrix(alpha1: f64, alpha2: f64, beta: f64) -> Matrix2<f64> {
    let off = 1.0 - alpha1 * alpha1;
    Matrix2::new(-alpha1, off, off, 3.0 * alpha1 - 2.0 * alpha2 * beta)
}

/// Largest eigenvalue of the step-2 certificate over both interval vertices.
pub fn certify_pair(alpha1: f64, alpha2: f64, beta: &BetaBound) -> f64 {
    beta.vertices()
        .iter()
        .map(|b| {
            let m = pair_certificate_matrix(alpha1, alpha2, *b);
            m.symmetric_eigenvalues().max()
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Closed loop in backstepping coordinates, consistent with the transform
/// (`Phi = T·A(beta)·T⁻¹`).
pub fn phi_matrix(a: &[f64; 4], beta: f64) -> Matrix4<f64> {
    let [a1, a2, a3, a4] = *a;
    let r2 = a1 - a2 * beta;
    let r3 = a2 * beta - a3;
    Matrix4::new(
        -a1, 1.0, 0.0, 0.0, //
        -a1 * a1, r2, beta, 0.0, //
        -a1 * a1 * a2, a2 * r2, r3, 1.0, //
        -a1 * a1 * a2 * a3, a2 * a3 * r2, a3 * r3, a3 - a4,
    )
}

/// `y = T·chi`.
pub fn transform_matrix(a: &[f64; 4]) -> Matrix4<f64> {
    let [a1, a2, a3, _] = *a;
    Matrix4::new(
        1.0, 0.0, 0.0, 0.0, //
        a1, 1.0, 0.0, 0.0, //
        a1 * a2, a2, 1.0, 0.0, //
        a1 * a2 * a3, a2 * a3, a3, 1.0,
    )
}

/// Symmetric part `Phi_j + Phi_jᵀ` of the leading `j×j` block at `beta`.
pub fn block_symmetric_part(a: &[f64; 4], beta: f64, j: usize) -> DMatrix<f64> {
    let phi = phi_matrix(a, beta);
    let block = phi.view((0, 0), (j, j)).into_owned();
    let block = DMatrix::from_fn(j, j, |r, c| block[(r, c)]);
    &block + block.transpose()
}

/// Largest eigenvalue of the `j×j` symmetric part over both vertices.
pub fn block_margin(a: &[f64; 4], beta: &BetaBound, j: usize) -> f64 {
    beta.vertices()
        .iter()
        .map(|b| max_symmetric_eigenvalue(&block_symmetric_part(a, *b, j)))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Geometric search length covering a 2^60 gain multiplier.
fn search_budget(growth: f64) -> usize {
    (60.0 * std::f64::consts::LN_2 / growth.ln()).ceil() as usize
}

fn grow_until<F: Fn(f64) -> f64>(start: f64, growth: f64, margin: F) -> std::result::Result<(f64, f64), f64> {
    let mut value = start;
    let mut last = margin(value);
    for _ in 0..search_budget(growth) {
        if last < 0.0 {
            return Ok((value, last));
        }
        value *= growth;
        last = margin(value);
    }
    if last < 0.0 {
        Ok((value, last))
    } else {
        Err(last)
    }
}

/// Runs the four-step backstepping construction.
///
/// Step 2 starts at `growth·alpha2_star`; the later steps start just above the
/// value where the new diagonal entry of the symmetric part turns negative.
pub fn synthesize_alpha_chain(beta: &BetaBound, alpha1: f64, growth: f64) -> Result<AlphaChain> {
    validate_bound(beta)?;
    if !(growth.is_finite() && growth > 1.0) {
        return Err(Error::InvalidParameter {
            name: "growth",
            reason: format!("must be > 1, got {growth}"),
        });
    }
    let start2 = alpha2_star(alpha1, beta.beta_min)? * growth;
    let (alpha2, m2) = grow_until(start2, growth, |a2| certify_pair(alpha1, a2, beta)).map_err(|m| {
        Error::Synthesis {
            step: 2,
            reason: "pair certificate never became negative definite".into(),
            margins: vec![m],
        }
    })?;

    // diagonal entry 2(a2·beta - a3) of the 3×3 block needs a3 > a2·beta_max
    let start3 = alpha2 * beta.beta_max * growth;
    let (alpha3, m3) =
        grow_until(start3, growth, |a3| block_margin(&[alpha1, alpha2, a3, 0.0], beta, 3)).map_err(|m| {
            Error::Synthesis {
                step: 3,
                reason: "3x3 block certificate never became negative definite".into(),
                margins: vec![m2, m],
            }
        })?;

    // diagonal entry 2(a3 - a4) of the 4×4 block needs a4 > a3
    let start4 = alpha3 * growth;
    let (alpha4, m4) =
        grow_until(start4, growth, |a4| block_margin(&[alpha1, alpha2, alpha3, a4], beta, 4)).map_err(|m| {
            Error::Synthesis {
                step: 4,
                reason: "4x4 block certificate never became negative definite".into(),
                margins: vec![m2, m3, m],
            }
        })?;

    Ok(AlphaChain {
        alphas: [alpha1, alpha2, alpha3, alpha4],
        beta: *beta,
        margins: [m2, m3, m4],
    })
}
