//! Scenario configuration: JSON in, validated [`ScenarioConfig`] out.

use std::path::PathBuf;

use multilink_core::dynamics::{ManifoldSign, PoseState, ReducedState};
use multilink_core::integrator::{IntegratorOptions, Method};
use multilink_core::model::{RotorProfile, VehicleParams};
use serde::Deserialize;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ConfigError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("line {line}, column {column}: {message}")]
    Schema { line: usize, column: usize, message: String },
    #[error("invalid `{field}`: {reason}")]
    Invalid { field: String, reason: String },
}

fn invalid(field: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.to_string(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Inertial,
    Manifold,
    Speedup,
    FixedPoints,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
enum SignField {
    Plus,
    Minus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Svg,
    Report,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    scenario: ScenarioKind,
    vehicle: Option<VehicleParams>,
    rotor: Option<RawRotor>,
    initial: Option<RawInitial>,
    integrator: Option<RawIntegrator>,
    outputs: Option<RawOutputs>,
    sign: Option<SignField>,
    portrait_grid: Option<usize>,
    fit_window: Option<[f64; 2]>,
    samples_per_period: Option<usize>,
    random_suite: Option<RandomSuite>,
    seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum RawRotor {
    Sine { amplitude: f64, period: f64 },
    Constant { value: f64 },
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInitial {
    v1: Option<f64>,
    omega: Option<f64>,
    phi: Option<Vec<f64>>,
    x: Option<f64>,
    y: Option<f64>,
    psi: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
enum MethodField {
    Rk4,
    Rk45,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIntegrator {
    method: Option<MethodField>,
    rtol: Option<f64>,
    atol: Option<f64>,
    h0: Option<f64>,
    hmax: Option<f64>,
    t_end: Option<f64>,
    sample_interval: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutputs {
    directory: Option<PathBuf>,
    formats: Option<Vec<Format>>,
}

/// Batch classification over random parameter draws.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomSuite {
    pub draws: usize,
    pub max_links: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Scenario {
    Inertial,
    Manifold { sign: ManifoldSign, portrait_grid: usize },
    Speedup { window: (f64, f64), samples_per_period: usize },
    FixedPoints { suite: Option<RandomSuite> },
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Inertial => "inertial",
            Self::Manifold { .. } => "manifold",
            Self::Speedup { .. } => "speedup",
            Self::FixedPoints { .. } => "fixed_points",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outputs {
    pub directory: PathBuf,
    pub formats: Vec<Format>,
}

impl Outputs {
    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub vehicle: VehicleParams,
    pub rotor: RotorProfile,
    pub initial: ReducedState,
    pub pose: PoseState,
    pub integrator: IntegratorOptions,
    pub outputs: Outputs,
    pub seed: u64,
}

pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let raw: RawConfig = serde_json::from_str(text).map_err(|e| {
        let (line, column, message) = (e.line(), e.column(), e.to_string());
        match e.classify() {
            serde_json::error::Category::Data => ConfigError::Schema { line, column, message },
            _ => ConfigError::Syntax { line, column, message },
        }
    })?;
    build(raw)
}

fn build(raw: RawConfig) -> Result<ScenarioConfig, ConfigError> {
    let vehicle = raw.vehicle.unwrap_or_else(VehicleParams::three_link_reference);
    vehicle.validate().map_err(|e| match e {
        multilink_core::Error::InvalidParameter { name, reason } => invalid(&format!("vehicle.{name}"), reason),
        other => invalid("vehicle", other.to_string()),
    })?;
    let n = vehicle.links();

    let rotor = match raw.rotor {
        None => None,
        Some(RawRotor::Sine { amplitude, period }) => {
            Some(RotorProfile::sine(amplitude, period).map_err(|e| invalid("rotor", e.to_string()))?)
        }
        Some(RawRotor::Constant { value }) => {
            if !value.is_finite() {
                return Err(invalid("rotor.value", "must be finite"));
            }
            Some(RotorProfile::Constant { value })
        }
    };

    let scenario = match raw.scenario {
        ScenarioKind::Inertial => Scenario::Inertial,
        ScenarioKind::Manifold => {
            let sign = match raw.sign {
                Some(SignField::Plus) => ManifoldSign::Plus,
                Some(SignField::Minus) => ManifoldSign::Minus,
                None => return Err(invalid("sign", "manifold scenarios need \"sign\": \"plus\" or \"minus\"")),
            };
            if n == 0 {
                return Err(invalid("vehicle", "manifold scenarios need at least one trailer"));
            }
            if rotor.is_some_and(|r| r != RotorProfile::at_rest()) {
                return Err(invalid("rotor", "the invariant manifolds exist only with the rotor at rest"));
            }
            let portrait_grid = raw.portrait_grid.unwrap_or(6);
            if portrait_grid == 0 {
                return Err(invalid("portrait_grid", "must be >= 1"));
            }
            Scenario::Manifold { sign, portrait_grid }
        }
        ScenarioKind::Speedup => {
            match rotor {
                None => return Err(invalid("rotor", "speedup scenarios need a rotor block")),
                Some(r) if r.is_constant() => {
                    return Err(invalid("rotor", "speedup needs a periodic rotor (kind \"sine\")"));
                }
                Some(_) => {}
            }
            let [lo, hi] = raw.fit_window.unwrap_or([1e3, 1e5]);
            if !(lo > 0.0 && hi > lo) {
                return Err(invalid("fit_window", "needs 0 < t_lo < t_hi"));
            }
            let samples_per_period = raw.samples_per_period.unwrap_or(64);
            if samples_per_period < 4 {
                return Err(invalid("samples_per_period", "must be >= 4"));
            }
            Scenario::Speedup {
                window: (lo, hi),
                samples_per_period,
            }
        }
        ScenarioKind::FixedPoints => {
            if let Some(s) = raw.random_suite {
                if s.max_links == 0 || s.max_links > 12 {
                    return Err(invalid("random_suite.max_links", "must be in 1..=12"));
                }
            }
            Scenario::FixedPoints { suite: raw.random_suite }
        }
    };
    for (field, present) in [
        ("sign", raw.sign.is_some()),
        ("portrait_grid", raw.portrait_grid.is_some()),
    ] {
        if present && !matches!(scenario, Scenario::Manifold { .. }) {
            return Err(invalid(field, "only used by manifold scenarios"));
        }
    }
    for (field, present) in [
        ("fit_window", raw.fit_window.is_some()),
        ("samples_per_period", raw.samples_per_period.is_some()),
    ] {
        if present && !matches!(scenario, Scenario::Speedup { .. }) {
            return Err(invalid(field, "only used by speedup scenarios"));
        }
    }

    let ini = raw.initial.unwrap_or_default();
    let phi = ini.phi.unwrap_or_else(|| vec![0.5; n]);
    if phi.len() != n {
        return Err(invalid(
            "initial.phi",
            format!("has {} angles, vehicle has {n} trailer platforms", phi.len()),
        ));
    }
    let mut initial = ReducedState::new(ini.v1.unwrap_or(10.0), ini.omega.unwrap_or(1.0), phi);
    if let Scenario::Manifold { sign, .. } = scenario {
        if ini.omega.is_some_and(|w| w != 0.0) {
            return Err(invalid("initial.omega", "the invariant manifolds have omega = 0"));
        }
        let speed = ini.v1.unwrap_or(1.0).abs();
        if speed == 0.0 {
            return Err(invalid("initial.v1", "must be nonzero on a manifold"));
        }
        initial.v1 = sign.value() * speed;
        initial.omega = 0.0;
    }
    if !initial.is_finite() {
        return Err(invalid("initial", "values must be finite"));
    }
    let pose = PoseState {
        x: ini.x.unwrap_or(0.0),
        y: ini.y.unwrap_or(0.0),
        psi: ini.psi.unwrap_or(0.0),
    };

    let integ = raw.integrator.unwrap_or_default();
    let speedup_period = rotor.and_then(|r| r.period()).filter(|_| matches!(scenario, Scenario::Speedup { .. }));
    let (rtol, atol, t_end, interval) = match speedup_period {
        Some(p) => (1e-8, 1e-10, 1e5, 10.0 * p),
        None => (1e-10, 1e-12, 50.0, 0.01),
    };
    let integrator = IntegratorOptions {
        method: match integ.method {
            Some(MethodField::Rk4) => Method::FixedRk4,
            _ => Method::AdaptiveRk45,
        },
        rtol: integ.rtol.unwrap_or(rtol),
        atol: integ.atol.unwrap_or(atol),
        h0: integ.h0.unwrap_or(1e-3),
        hmax: integ.hmax.unwrap_or(1.0),
        t_start: 0.0,
        t_end: integ.t_end.unwrap_or(t_end),
        sample_stride: 1,
        sample_interval: Some(integ.sample_interval.unwrap_or(interval)),
    };
    integrator
        .validate()
        .map_err(|e| invalid("integrator", e.to_string()))?;
    if let (Scenario::Speedup { window, .. }, true) = (&scenario, integrator.t_end < 1.0) {
        return Err(invalid("integrator.t_end", format!("too short for fit window {window:?}")));
    }

    let outs = raw.outputs.unwrap_or_default();
    let formats = outs.formats.unwrap_or_else(|| vec![Format::Csv, Format::Svg, Format::Report]);
    Ok(ScenarioConfig {
        scenario,
        vehicle,
        rotor: rotor.unwrap_or_else(RotorProfile::at_rest),
        initial,
        pose,
        integrator,
        outputs: Outputs {
            directory: outs.directory.unwrap_or_else(|| PathBuf::from("output")),
            formats,
        },
        seed: raw.seed.unwrap_or(0),
    })
}
