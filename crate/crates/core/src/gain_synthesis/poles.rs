//! Pole placement: quartic families for the dynamic compensator and per-channel
//! PD gains for altitude and yaw.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::{Complex, DMatrix, Matrix2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eigenvalues, is_hurwitz};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolyFamily {
    Butterworth,
    Newton,
    Explicit,
}

impl fmt::Display for PolyFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Butterworth => "butterworth",
            Self::Newton => "newton",
            Self::Explicit => "explicit",
        })
    }
}

/// Coefficients of `s⁴ + g4·s³ + g3·s² + g2·s + g1`, stored as `[g1, g2, g3, g4]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaSet {
    pub gamma: [f64; 4],
    pub family: PolyFamily,
    pub omega: Option<f64>,
}

impl GammaSet {
    pub fn explicit(gamma: [f64; 4]) -> Result<Self> {
        let set = Self {
            gamma,
            family: PolyFamily::Explicit,
            omega: None,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        if self.gamma.iter().any(|g| !(g.is_finite() && *g > 0.0)) {
            return Err(Error::InvalidParameter {
                name: "gamma",
                reason: format!("all coefficients must be > 0, got {:?}", self.gamma),
            });
        }
        if !is_hurwitz(&self.companion()) {
            return Err(Error::InvalidParameter {
                name: "gamma",
                reason: format!("polynomial with coefficients {:?} is not Hurwitz", self.gamma),
            });
        }
        Ok(())
    }

    /// Companion matrix of the quartic.
    pub fn companion(&self) -> DMatrix<f64> {
        let [g1, g2, g3, g4] = self.gamma;
        DMatrix::from_row_slice(
            4,
            4,
            &[0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, -g1, -g2, -g3, -g4],
        )
    }

    /// Roots of the quartic: closed form for the named families, companion
    /// eigenvalues otherwise.
    pub fn poles(&self) -> Vec<Complex<f64>> {
        match (self.family, self.omega) {
            (PolyFamily::Newton, Some(w)) => vec![Complex::new(-w, 0.0); 4],
            (PolyFamily::Butterworth, Some(w)) => butterworth_poles(4, w),
            _ => eigenvalues(&self.companion()),
        }
    }
}

/// Left-half-plane poles of the order-`n` Butterworth polynomial with cutoff `omega`.
pub fn butterworth_poles(n: usize, omega: f64) -> Vec<Complex<f64>> {
    (1..=n)
        .map(|k| Complex::from_polar(omega, PI * (2 * k + n - 1) as f64 / (2 * n) as f64))
        .collect()
}

/// Monic polynomial with the given roots, coefficients from the constant term up.
/// Imaginary parts cancel when the roots come in conjugate pairs.
pub fn poly_from_roots(roots: &[Complex<f64>]) -> Vec<f64> {
    let mut coeffs = vec![Complex::new(1.0, 0.0)];
    for r in roots {
        let mut next = vec![Complex::new(0.0, 0.0); coeffs.len() + 1];
        for (i, c) in coeffs.iter().enumerate() {
            next[i + 1] += *c;
            next[i] -= *c * *r;
        }
        coeffs = next;
    }
    coeffs.iter().map(|c| c.re).collect()
}

pub fn gamma_from_family(family: PolyFamily, omega: f64) -> Result<GammaSet> {
    if !(omega.is_finite() && omega > 0.0) {
        return Err(Error::InvalidParameter {
            name: "omega",
            reason: format!("must be > 0, got {omega}"),
        });
    }
    let gamma = match family {
        PolyFamily::Newton => [omega.powi(4), 4.0 * omega.powi(3), 6.0 * omega.powi(2), 4.0 * omega],
        PolyFamily::Butterworth => {
            let c = poly_from_roots(&butterworth_poles(4, omega));
            [c[0], c[1], c[2], c[3]]
        }
        PolyFamily::Explicit => {
            return Err(Error::InvalidInput(
                "explicit coefficients have no bandwidth family; use GammaSet::explicit".into(),
            ))
        }
    };
    Ok(GammaSet {
        gamma,
        family,
        omega: Some(omega),
    })
}

/// Altitude and yaw PD gains, `K1 = diag(k11, k12)`, `K2 = diag(k21, k22)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PDGains {
    pub k11: f64,
    pub k12: f64,
    pub k21: f64,
    pub k22: f64,
}

impl PDGains {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("k11", self.k11), ("k12", self.k12), ("k21", self.k21), ("k22", self.k22)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("PD gains must be > 0, got {v}"),
                });
            }
        }
        Ok(())
    }

    /// Closed-loop block `[[0, 1], [-k1, -k2]]` of the altitude loop.
    pub fn altitude_block(&self) -> Matrix2<f64> {
        Matrix2::new(0.0, 1.0, -self.k11, -self.k21)
    }

    pub fn yaw_block(&self) -> Matrix2<f64> {
        Matrix2::new(0.0, 1.0, -self.k12, -self.k22)
    }
}

fn channel_gains(poles: &[Complex<f64>; 2], channel: &str) -> Result<(f64, f64)> {
    let [p, q] = *poles;
    if p.re >= 0.0 || q.re >= 0.0 {
        return Err(Error::InvalidInput(format!(
            "{channel} poles must have negative real parts, got {p} and {q}"
        )));
    }
    let conj_pair = (p.conj() - q).norm() <= 1e-12 * (1.0 + p.norm());
    let both_real = p.im == 0.0 && q.im == 0.0;
    if !(conj_pair || both_real) {
        return Err(Error::InvalidInput(format!(
            "{channel} poles must be real or a conjugate pair, got {p} and {q}"
        )));
    }
    Ok(((p * q).re, -(p + q).re))
}

/// Gains so that `s² + k2·s + k1` has the requested roots in each channel.
pub fn pd_gains_from_poles(altitude: &[Complex<f64>; 2], yaw: &[Complex<f64>; 2]) -> Result<PDGains> {
    let (k11, k21) = channel_gains(altitude, "altitude")?;
    let (k12, k22) = channel_gains(yaw, "yaw")?;
    Ok(PDGains { k11, k12, k21, k22 })
}
