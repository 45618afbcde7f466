use std::io::Write;

use nalgebra::{Vector2, Vector4};
use serde::{Deserialize, Serialize};

use crate::controllers::{CompensatorState, ControlOutput, ZetaState};
use crate::dynamics::{QuadState, VirtualControl};
use crate::error::{Error, Result};
use crate::normal_form::XiState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultKind {
    /// A control law hit a singular matrix.
    Control,
    /// Roll or pitch reached ±π/2.
    Domain,
    /// Non-finite values appeared during integration.
    Integration,
    NegativeThrust,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultRecord {
    pub time: f64,
    pub kind: FaultKind,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRow {
    pub t: f64,
    pub state: QuadState,
    pub compensator: CompensatorState,
    /// NaN on a faulted row whose controller could not be evaluated.
    pub forces: Vector4<f64>,
    pub control: VirtualControl,
    pub beta: f64,
    pub xi: Option<[f64; 12]>,
    pub zeta: Option<[f64; 16]>,
    pub det_b22: Option<f64>,
    pub det_b4: Option<f64>,
    pub compensator_input: Vector2<f64>,
    pub fault: bool,
}

impl TrajectoryRow {
    pub(crate) fn from_output(t: f64, state: QuadState, compensator: CompensatorState, out: &ControlOutput) -> Self {
        Self {
            t,
            state,
            compensator,
            forces: out.forces.0,
            control: out.control,
            beta: out.beta(),
            xi: Some(out.xi.to_array()),
            zeta: out.zeta.map(|z| z.to_array()),
            det_b22: out.det_b22,
            det_b4: out.det_b4,
            compensator_input: out.compensator_input,
            fault: false,
        }
    }

    pub(crate) fn faulted(t: f64, state: QuadState, compensator: CompensatorState) -> Self {
        let nan = f64::NAN;
        Self {
            t,
            state,
            compensator,
            forces: Vector4::repeat(nan),
            control: VirtualControl::new(nan, nan, nan, nan),
            beta: nan,
            xi: None,
            zeta: None,
            det_b22: None,
            det_b4: None,
            compensator_input: Vector2::repeat(nan),
            fault: true,
        }
    }
}

/// Optional column groups in the CSV output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CsvColumns {
    pub xi: bool,
    pub zeta: bool,
    /// `det_b22`, `det_b4`, `v1`, `v2`.
    pub diagnostics: bool,
}

#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub rows: Vec<TrajectoryRow>,
    pub fault: Option<FaultRecord>,
}

pub const BASE_COLUMNS: [&str; 23] = [
    "t", "x", "y", "z", "vx", "vy", "vz", "phi", "psi", "theta", "phid", "psid", "thetad", "F1", "F2", "F3", "F4",
    "u1", "u2", "u3", "u4", "beta", "fault",
];

impl Trajectory {
    pub fn with_capacity(n: usize) -> Self {
        Self {
            rows: Vec::with_capacity(n),
            fault: None,
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn faulted(&self) -> bool {
        self.fault.is_some()
    }

    pub fn last(&self) -> Option<&TrajectoryRow> {
        self.rows.last()
    }

    pub fn header(cols: CsvColumns) -> Vec<String> {
        let mut h: Vec<String> = BASE_COLUMNS.iter().map(|s| s.to_string()).collect();
        if cols.xi {
            h.extend(XiState::COLUMNS.iter().map(|s| s.to_string()));
        }
        if cols.zeta {
            h.extend(ZetaState::COLUMNS.iter().map(|s| s.to_string()));
        }
        if cols.diagnostics {
            h.extend(["det_b22", "det_b4", "v1", "v2"].map(String::from));
        }
        h
    }

    fn record(row: &TrajectoryRow, cols: CsvColumns) -> Vec<String> {
        let mut r = vec![row.t];
        r.extend(row.state.to_vector().iter());
        r.extend(row.forces.iter());
        r.extend(row.control.as_vector().iter());
        r.push(row.beta);
        let mut fields: Vec<String> = r.drain(..).map(format_field).collect();
        fields.push(if row.fault { "1" } else { "0" }.into());
        if cols.xi {
            r.extend(row.xi.unwrap_or([f64::NAN; 12]));
        }
        if cols.zeta {
            r.extend(row.zeta.unwrap_or([f64::NAN; 16]));
        }
        if cols.diagnostics {
            r.push(row.det_b22.unwrap_or(f64::NAN));
            r.push(row.det_b4.unwrap_or(f64::NAN));
            r.extend(row.compensator_input.iter());
        }
        fields.extend(r.into_iter().map(format_field));
        fields
    }

    pub fn write_csv<W: Write>(&self, w: W, cols: CsvColumns) -> Result<()> {
        let io = |e: csv::Error| Error::Io(e.to_string());
        let mut out = csv::Writer::from_writer(w);
        out.write_record(Self::header(cols)).map_err(io)?;
        for row in &self.rows {
            out.write_record(Self::record(row, cols)).map_err(io)?;
        }
        out.flush().map_err(|e| Error::Io(e.to_string()))
    }
}

fn format_field(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else {
        // shortest round-trip representation
        format!("{v:?}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_groups() {
        assert_eq!(Trajectory::header(CsvColumns::default()).len(), 23);
        let all = CsvColumns {
            xi: true,
            zeta: true,
            diagnostics: true,
        };
        assert_eq!(Trajectory::header(all).len(), 23 + 12 + 16 + 4);
    }

    #[test]
    fn faulted_row_writes_nan() {
        let mut traj = Trajectory::default();
        traj.rows
            .push(TrajectoryRow::faulted(0.5, QuadState::default(), CompensatorState::default()));
        let mut buf = Vec::new();
        traj.write_csv(&mut buf, CsvColumns::default()).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let line = text.lines().nth(1).unwrap();
        assert!(line.starts_with("0.5,"));
        assert!(line.contains("NaN"));
        assert!(line.ends_with(",1"));
    }
}
