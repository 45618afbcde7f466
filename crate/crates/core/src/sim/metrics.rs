use serde::{Deserialize, Serialize};

use super::trajectory::{FaultRecord, Trajectory};
use super::Scenario;
use crate::controllers::Controller;

pub const CHANNEL_NAMES: [&str; 4] = ["z", "phi", "x", "y"];

/// Settling band as a fraction of the initial error magnitude.
pub const SETTLE_BAND: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelMetrics {
    pub name: String,
    pub initial_error: f64,
    pub final_error: f64,
    pub max_abs_error: f64,
    /// First time after which the error stays inside the band; `None` if it never settles.
    pub settle_time: Option<f64>,
    /// Largest excursion past the target, relative to the initial error.
    pub overshoot: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub converged: bool,
    pub fault: Option<FaultRecord>,
    pub rows: usize,
    pub final_time: f64,
    pub channels: Vec<ChannelMetrics>,
    /// Largest `max(|roll|, |pitch|)` seen.
    pub max_tilt: f64,
    pub beta_min: f64,
    pub beta_max: f64,
    pub min_abs_det_b22: Option<f64>,
    pub min_abs_det_b4: Option<f64>,
    /// Static controller only: `beta` stayed inside `[1 - alpha, 1 + alpha]`.
    pub beta_within_bound: Option<bool>,
    /// Static controller only: `cosθ·cosψ >= 1/(1 + alpha)` over the last 10% of the run.
    pub tilt_feasible: Option<bool>,
}

fn channel(name: &str, t: &[f64], e: &[f64]) -> ChannelMetrics {
    let e0 = e[0];
    let band = SETTLE_BAND * e0.abs();
    let settle_time = if e0 == 0.0 {
        Some(0.0)
    } else {
        match e.iter().rposition(|v| v.abs() > band) {
            None => Some(t[0]),
            Some(i) if i + 1 < e.len() => Some(t[i + 1]),
            Some(_) => None,
        }
    };
    let overshoot = if e0 == 0.0 {
        0.0
    } else {
        let past = e.iter().map(|v| -v * e0.signum()).fold(0.0, f64::max);
        past / e0.abs()
    };
    ChannelMetrics {
        name: name.into(),
        initial_error: e0,
        final_error: *e.last().unwrap(),
        max_abs_error: e.iter().fold(0.0, |m, v| m.max(v.abs())),
        settle_time,
        overshoot,
    }
}

fn min_abs(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    values.flatten().map(f64::abs).reduce(f64::min)
}

impl Metrics {
    pub fn compute(sc: &Scenario, traj: &Trajectory) -> Self {
        let rows = &traj.rows;
        let t: Vec<f64> = rows.iter().map(|r| r.t).collect();
        let errors: Vec<[f64; 4]> = rows.iter().map(|r| sc.target.output_error(&r.state)).collect();
        let channels: Vec<ChannelMetrics> = CHANNEL_NAMES
            .iter()
            .enumerate()
            .map(|(k, name)| {
                let e: Vec<f64> = errors.iter().map(|v| v[k]).collect();
                channel(name, &t, &e)
            })
            .collect();

        let betas: Vec<f64> = rows.iter().map(|r| r.beta).filter(|b| b.is_finite()).collect();
        let beta_min = betas.iter().copied().fold(f64::INFINITY, f64::min);
        let beta_max = betas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let max_tilt = rows
            .iter()
            .map(|r| r.state.roll().abs().max(r.state.pitch().abs()))
            .fold(0.0, f64::max);

        let complete = traj.fault.is_none() && rows.len() == sc.steps() + 1;
        let converged = complete && channels.iter().all(|c| c.final_error.abs() < sc.convergence_tol);

        let (beta_within_bound, tilt_feasible) = match &sc.controller {
            Controller::A(cfg) => {
                let bound = cfg.beta_bound();
                let slack = 1e-12;
                let within = betas
                    .iter()
                    .all(|b| *b >= bound.beta_min - slack && *b <= bound.beta_max + slack);
                let tail_start = rows.len() - rows.len().div_ceil(10);
                let floor = 1.0 / (1.0 + cfg.alpha_sat);
                let feasible = complete
                    && rows[tail_start..]
                        .iter()
                        .all(|r| r.state.pitch().cos() * r.state.roll().cos() >= floor);
                (Some(within), Some(feasible))
            }
            _ => (None, None),
        };

        Self {
            converged,
            fault: traj.fault.clone(),
            rows: rows.len(),
            final_time: t.last().copied().unwrap_or(0.0),
            channels,
            max_tilt,
            beta_min,
            beta_max,
            min_abs_det_b22: min_abs(rows.iter().map(|r| r.det_b22)),
            min_abs_det_b4: min_abs(rows.iter().map(|r| r.det_b4)),
            beta_within_bound,
            tilt_feasible,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metrics serialize")
    }

    pub fn channel(&self, name: &str) -> Option<&ChannelMetrics> {
        self.channels.iter().find(|c| c.name == name)
    }
}
