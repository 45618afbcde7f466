use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::trajectory::{Trajectory, TrajectoryRow};
use crate::controllers::closed_loop_b_matrix;
use crate::error::{Error, Result};
use crate::gain_synthesis::{GammaSet, PDGains};
use crate::linalg::expm;

/// Linear model that a logged coordinate block should follow exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReferenceModel {
    /// `(xi11, xi21)` under the unsaturated altitude loop.
    Altitude(PDGains),
    /// `(xi12, xi22)` under the yaw loop.
    Yaw(PDGains),
    /// The full `zeta` stack under the dynamic controller.
    ClosedLoopB(GammaSet),
}

impl ReferenceModel {
    pub fn matrix(&self) -> DMatrix<f64> {
        match self {
            Self::Altitude(pd) => DMatrix::from_column_slice(2, 2, pd.altitude_block().as_slice()),
            Self::Yaw(pd) => DMatrix::from_column_slice(2, 2, pd.yaw_block().as_slice()),
            Self::ClosedLoopB(gamma) => closed_loop_b_matrix(gamma),
        }
    }

    fn extract(&self, row: &TrajectoryRow) -> Option<DVector<f64>> {
        match self {
            Self::Altitude(_) => row.xi.map(|x| DVector::from_column_slice(&[x[0], x[2]])),
            Self::Yaw(_) => row.xi.map(|x| DVector::from_column_slice(&[x[1], x[3]])),
            Self::ClosedLoopB(_) => row.zeta.map(|z| DVector::from_column_slice(&z)),
        }
    }

    fn columns(&self) -> &'static str {
        match self {
            Self::Altitude(_) | Self::Yaw(_) => "xi",
            Self::ClosedLoopB(_) => "zeta",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearDeviation {
    /// `max_t |x(t) - x_ref(t)| / max_t |x_ref(t)|`.
    pub max_relative: f64,
    pub max_abs: f64,
    pub final_abs: f64,
    /// Per-row absolute deviation.
    pub errors: Vec<f64>,
}

/// Propagates the reference from the first logged row with `exp(A·dt)` and
/// compares it with the log.
pub fn compare_linear_reference(traj: &Trajectory, model: &ReferenceModel) -> Result<LinearDeviation> {
    let rows = &traj.rows;
    if rows.len() < 2 {
        return Err(Error::InvalidInput("trajectory needs at least two rows".into()));
    }
    let logged: Vec<DVector<f64>> = rows
        .iter()
        .map(|r| model.extract(r))
        .collect::<Option<_>>()
        .ok_or_else(|| Error::InvalidInput(format!("trajectory lacks the {} columns", model.columns())))?;
    let dt = rows[1].t - rows[0].t;
    let step = expm(&model.matrix(), dt);
    let mut reference = logged[0].clone();
    let mut errors = Vec::with_capacity(rows.len());
    let mut peak_ref: f64 = 0.0;
    for (i, x) in logged.iter().enumerate() {
        if i > 0 {
            reference = &step * &reference;
        }
        peak_ref = peak_ref.max(reference.norm());
        errors.push((x - &reference).norm());
    }
    let max_abs = errors.iter().copied().fold(0.0, f64::max);
    Ok(LinearDeviation {
        max_relative: if peak_ref > 0.0 { max_abs / peak_ref } else { max_abs },
        max_abs,
        final_abs: *errors.last().unwrap(),
        errors,
    })
}
