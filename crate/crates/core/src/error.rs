use thiserror::Error;

/// Errors raised by the plant model, the normal-form machinery and the controllers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// Roll or pitch reached ±π/2, where the design model is undefined.
    #[error("attitude out of domain: roll = {roll:.6} rad, pitch = {pitch:.6} rad (|angle| must stay below pi/2)")]
    AngleDomain { roll: f64, pitch: f64 },

    /// A matrix that has to be inverted by a control law is (nearly) singular.
    #[error("singular {matrix}: |det| = {det:.3e} is below {threshold:.1e}")]
    Singular {
        matrix: &'static str,
        det: f64,
        threshold: f64,
    },

    #[error("gain synthesis failed at step {step}: {reason} (last margins {margins:?})")]
    Synthesis {
        step: usize,
        reason: String,
        margins: Vec<f64>,
    },

    #[error("integration fault at t = {time:.6}: {reason}")]
    Integration { time: f64, reason: String },

    #[error("i/o: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_finite(label: &str, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{label} contains a non-finite value: {values:?}")))
    }
}
