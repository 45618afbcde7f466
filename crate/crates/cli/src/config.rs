//! Declarative run configuration (JSON, `schema_version` 1).

use std::path::{Path, PathBuf};

use nalgebra::Complex;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use quadpos::controllers::{CompensatorState, Controller, ControllerAConfig, ControllerBConfig};
use quadpos::dynamics::{QuadParams, QuadState};
use quadpos::gain_synthesis::{
    gamma_from_family, pd_gains_from_poles, synthesize_alpha_chain, GammaSet, KVector, PDGains, PolyFamily,
};
use quadpos::normal_form::{BetaBound, Target};
use quadpos::sim::{CsvColumns, Scenario, DEFAULT_CONVERGENCE_TOL};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub scenario: ScenarioConfig,
    pub controller: ControllerSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gains: Option<GainsConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_dt() -> f64 {
    1e-3
}

fn default_tol() -> f64 {
    DEFAULT_CONVERGENCE_TOL
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub params: QuadParams,
    #[serde(default)]
    pub initial: QuadState,
    #[serde(default)]
    pub target: TargetConfig,
    #[serde(default = "default_dt")]
    pub dt: f64,
    pub horizon: f64,
    #[serde(default)]
    pub friction_enabled: bool,
    #[serde(default)]
    pub nonneg_thrust: bool,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_tol")]
    pub convergence_tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TargetConfig {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub yaw: f64,
}

/// A pole as a real number or a `[re, im]` pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PoleSpec {
    Real(f64),
    Complex([f64; 2]),
}

impl PoleSpec {
    pub fn value(&self) -> Complex<f64> {
        match *self {
            Self::Real(re) => Complex::new(re, 0.0),
            Self::Complex([re, im]) => Complex::new(re, im),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PdSpec {
    Poles { altitude: [PoleSpec; 2], yaw: [PoleSpec; 2] },
    Gains(PDGains),
}

impl PdSpec {
    pub fn resolve(&self) -> quadpos::Result<PDGains> {
        match self {
            Self::Poles { altitude, yaw } => {
                pd_gains_from_poles(&altitude.map(|p| p.value()), &yaw.map(|p| p.value()))
            }
            Self::Gains(g) => {
                g.validate()?;
                Ok(*g)
            }
        }
    }
}

fn default_growth() -> f64 {
    1.1
}

fn default_alpha1() -> f64 {
    1.0
}

/// Gains of the horizontal chains; the same law is used on both axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum HorizontalSpec {
    /// Polynomial family for the `beta = 1` closed loop.
    Newton { omega: f64 },
    Butterworth { omega: f64 },
    Alphas { alphas: [f64; 4] },
    Kvec { k: [f64; 4] },
    /// Synthesize a certified chain for the interval implied by `alpha_sat`.
    Backstepping {
        #[serde(default = "default_alpha1")]
        alpha1: f64,
        #[serde(default = "default_growth")]
        growth: f64,
    },
}

impl HorizontalSpec {
    pub fn resolve(&self, bound: &BetaBound) -> quadpos::Result<KVector> {
        match self {
            Self::Newton { omega } => Ok(KVector::from_char_poly(&gamma_from_family(PolyFamily::Newton, *omega)?.gamma)),
            Self::Butterworth { omega } => {
                Ok(KVector::from_char_poly(&gamma_from_family(PolyFamily::Butterworth, *omega)?.gamma))
            }
            Self::Alphas { alphas } => {
                if alphas.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
                    return Err(quadpos::Error::InvalidInput(format!("alphas must be positive, got {alphas:?}")));
                }
                Ok(KVector::from_alphas(alphas))
            }
            Self::Kvec { k } => Ok(KVector(*k)),
            Self::Backstepping { alpha1, growth } => Ok(synthesize_alpha_chain(bound, *alpha1, *growth)?.kvector()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum GammaSpec {
    Newton { omega: f64 },
    Butterworth { omega: f64 },
    Explicit { coefficients: [f64; 4] },
}

impl GammaSpec {
    pub fn resolve(&self) -> quadpos::Result<GammaSet> {
        match self {
            Self::Newton { omega } => gamma_from_family(PolyFamily::Newton, *omega),
            Self::Butterworth { omega } => gamma_from_family(PolyFamily::Butterworth, *omega),
            Self::Explicit { coefficients } => GammaSet::explicit(*coefficients),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ControllerSpec {
    A {
        alpha_sat: f64,
        pd: PdSpec,
        horizontal: HorizontalSpec,
    },
    B {
        gamma: GammaSpec,
        #[serde(default)]
        initial: CompensatorState,
    },
    OpenLoop,
}

fn default_trials() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BacksteppingSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_sat: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_max: Option<f64>,
    #[serde(default = "default_alpha1")]
    pub alpha1: f64,
    #[serde(default = "default_growth")]
    pub growth: f64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
}

impl BacksteppingSpec {
    pub fn bound(&self) -> quadpos::Result<BetaBound> {
        match (self.alpha_sat, self.beta_min, self.beta_max) {
            (Some(a), None, None) => BetaBound::from_saturation(a),
            (None, Some(lo), Some(hi)) => BetaBound::new(lo, hi),
            _ => Err(quadpos::Error::InvalidInput(
                "gains.backstepping needs either alpha_sat or both beta_min and beta_max".into(),
            )),
        }
    }
}

/// Synthesis directives for the `gains` command.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GainsConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub backstepping: Option<BacksteppingSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pd: Option<PdSpec>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub gamma: Vec<GammaSpec>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    pub xi: bool,
    pub zeta: bool,
    pub diagnostics: bool,
}

impl OutputConfig {
    pub fn columns(&self) -> CsvColumns {
        CsvColumns {
            xi: self.xi,
            zeta: self.zeta,
            diagnostics: self.diagnostics,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str, origin: &str) -> Result<Self, CliError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| {
            CliError::Config(format!("{origin}:{}:{}: {e}", e.line(), e.column()))
        })?;
        cfg.check_version()?;
        Ok(cfg)
    }

    /// Reads, validates against the schema, then applies `path=value` overrides.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, CliError> {
        let origin = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{origin}: {e}")))?;
        let cfg = Self::parse(&text, &origin)?;
        if overrides.is_empty() {
            return Ok(cfg);
        }
        let mut value = serde_json::to_value(&cfg).expect("config serializes");
        for spec in overrides {
            apply_override(&mut value, spec)?;
        }
        let cfg: Self = serde_json::from_value(value)
            .map_err(|e| CliError::Config(format!("{origin}: after --set {}: {e}", overrides.join(" "))))?;
        cfg.check_version()?;
        Ok(cfg)
    }

    fn check_version(&self) -> Result<(), CliError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        Ok(())
    }

    pub fn controller(&self) -> Result<Controller, CliError> {
        let controller = match &self.controller {
            ControllerSpec::A {
                alpha_sat,
                pd,
                horizontal,
            } => {
                let bound = BetaBound::from_saturation(*alpha_sat).map_err(CliError::from_core)?;
                let pd = pd.resolve().map_err(CliError::from_core)?;
                let k = horizontal.resolve(&bound).map_err(CliError::from_core)?;
                Controller::A(ControllerAConfig {
                    pd,
                    kvec: [k, k],
                    alpha_sat: *alpha_sat,
                })
            }
            ControllerSpec::B { gamma, initial } => Controller::B(ControllerBConfig {
                gamma: gamma.resolve().map_err(CliError::from_core)?,
                initial: *initial,
            }),
            ControllerSpec::OpenLoop => Controller::OpenLoop,
        };
        controller.validate().map_err(CliError::from_core)?;
        Ok(controller)
    }

    pub fn scenario(&self) -> Result<Scenario, CliError> {
        let s = &self.scenario;
        let t = s.target;
        let sc = Scenario {
            params: s.params,
            initial: s.initial,
            target: Target::new(t.x, t.y, t.z, t.yaw),
            controller: self.controller()?,
            dt: s.dt,
            horizon: s.horizon,
            friction_enabled: s.friction_enabled,
            nonneg_thrust: s.nonneg_thrust,
            seed: s.seed,
            convergence_tol: s.convergence_tol,
        };
        sc.validate().map_err(CliError::from_core)?;
        Ok(sc)
    }
}

/// Sets `a.b.0.c=value`, creating missing object keys. Values are parsed as
/// JSON, falling back to a plain string.
pub fn apply_override(root: &mut Value, spec: &str) -> Result<(), CliError> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("--set expects path=value, got `{spec}`")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(CliError::Config(format!("--set: malformed path `{path}`")));
    }
    let mut node = root;
    for (i, key) in keys.iter().enumerate() {
        let last = i + 1 == keys.len();
        node = match node {
            Value::Object(map) => {
                if last {
                    map.insert(key.to_string(), value);
                    return Ok(());
                }
                map.entry(key.to_string()).or_insert_with(|| Value::Object(Default::default()))
            }
            Value::Array(items) => {
                let idx: usize = key
                    .parse()
                    .map_err(|_| CliError::Config(format!("--set: `{key}` in `{path}` must index an array")))?;
                let len = items.len();
                let slot = items
                    .get_mut(idx)
                    .ok_or_else(|| CliError::Config(format!("--set: index {idx} out of range (len {len}) in `{path}`")))?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            _ => return Err(CliError::Config(format!("--set: `{path}` descends into a scalar at `{key}`"))),
        };
    }
    Ok(())
}
