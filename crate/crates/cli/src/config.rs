//! Run configuration: JSON with an explicit schema version. Validation
//! reports every problem with a JSON-pointer location.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use hamhopf::family::HamiltonianFamily;
use hamhopf::linear::{GroupData, SymplecticForm};
use hamhopf::mat::{self, Mat};
use hamhopf::models::oscillator::OscillatorParams;
use hamhopf::models::so3::So3Model;
use hamhopf::poly::PolyJet;
use hamhopf::{HopfError, Tolerances};

pub const SCHEMA_VERSION: u64 = 1;

const TOP_LEVEL: &[&str] = &[
    "schema_version",
    "model",
    "params",
    "lambda_interval",
    "tolerances",
    "branches",
    "verify",
    "sweep",
    "seed",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaError {
    pub pointer: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigError {
    pub code: String,
    pub errors: Vec<SchemaError>,
}

impl ConfigError {
    fn schema(errors: Vec<SchemaError>) -> Self {
        ConfigError {
            code: "SCHEMA_ERROR".into(),
            errors,
        }
    }

    pub fn is_hypothesis_failure(&self) -> bool {
        self.code.starts_with('H')
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .errors
            .iter()
            .map(|e| format!("{}: {}", if e.pointer.is_empty() { "/" } else { &e.pointer }, e.message))
            .collect();
        f.write_str(&parts.join("; "))
    }
}

impl std::error::Error for ConfigError {}

/// Extra data an inline model needs for the O(2) subcommands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InlineO2 {
    /// Ambient state → (Re z₁, Im z₁, Re z₂, Im z₂).
    #[serde(with = "mat::rowmajor")]
    pub zmap: Mat,
    #[serde(with = "mat::rowmajor")]
    pub rotation: Mat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct InlineSpec {
    #[serde(default = "inline_name")]
    name: String,
    jet: PolyJet,
    form: SymplecticForm,
    #[serde(default)]
    group: GroupData,
    #[serde(default)]
    o2: Option<InlineO2>,
}

fn inline_name() -> String {
    "inline".into()
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Oscillator(OscillatorParams),
    So3(So3Model),
    Inline {
        family: HamiltonianFamily,
        o2: Option<InlineO2>,
    },
}

impl Model {
    pub fn name(&self) -> &str {
        match self {
            Model::Oscillator(_) => "coupled_oscillator",
            Model::So3(_) => "so3_rep5",
            Model::Inline { family, .. } => &family.name,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BranchSettings {
    pub radii: Vec<f64>,
    /// (α, ξ) pairs; α relative to ν∘.
    pub alpha_xi: Vec<(f64, f64)>,
    /// ψ values for the SO(3) torus branches.
    pub psi: Vec<f64>,
}

impl Default for BranchSettings {
    fn default() -> Self {
        BranchSettings {
            radii: vec![0.01, 0.02, 0.05],
            alpha_xi: vec![(0.0, 0.0), (0.002, 0.01)],
            psi: vec![0.3, 0.1],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySettings {
    pub r: f64,
    pub alpha: f64,
    pub xi: f64,
}

impl Default for VerifySettings {
    fn default() -> Self {
        VerifySettings {
            r: 0.05,
            alpha: 0.002,
            xi: 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSettings {
    pub points: usize,
}

impl Default for SweepSettings {
    fn default() -> Self {
        SweepSettings { points: 21 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: Model,
    pub lambda_interval: (f64, f64),
    pub tolerances: Tolerances,
    pub branches: BranchSettings,
    pub verify: VerifySettings,
    pub sweep: SweepSettings,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        parse_config(r#"{"model":"coupled_oscillator","lambda_interval":[0.9,1.1]}"#).expect("default config is valid")
    }
}

fn err(pointer: &str, message: impl Into<String>) -> SchemaError {
    SchemaError {
        pointer: pointer.into(),
        message: message.into(),
    }
}

fn section<T: for<'de> Deserialize<'de> + Default>(root: &serde_json::Map<String, Value>, key: &str, errors: &mut Vec<SchemaError>) -> T {
    match root.get(key) {
        None => T::default(),
        Some(v) => serde_json::from_value(v.clone()).unwrap_or_else(|e| {
            errors.push(err(&format!("/{key}"), e.to_string()));
            T::default()
        }),
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let value: Value = serde_json::from_str(text).map_err(|e| ConfigError::schema(vec![err("", format!("invalid JSON: {e}"))]))?;
    let root = value
        .as_object()
        .ok_or_else(|| ConfigError::schema(vec![err("", "configuration must be a JSON object")]))?;
    let mut errors = Vec::new();
    for key in root.keys() {
        if !TOP_LEVEL.contains(&key.as_str()) {
            errors.push(err(&format!("/{key}"), "unknown field"));
        }
    }
    match root.get("schema_version") {
        None => {}
        Some(v) if v.as_u64() == Some(SCHEMA_VERSION) => {}
        Some(v) => errors.push(err("/schema_version", format!("unsupported schema version {v}; expected {SCHEMA_VERSION}"))),
    }

    let params = root.get("params").cloned().unwrap_or(Value::Object(Default::default()));
    let model = match root.get("model") {
        None => {
            errors.push(err("/model", "required"));
            None
        }
        Some(Value::String(s)) => match s.as_str() {
            "coupled_oscillator" => serde_json::from_value::<OscillatorParams>(params)
                .map_err(|e| errors.push(err("/params", e.to_string())))
                .ok()
                .map(Model::Oscillator),
            "so3_rep5" => serde_json::from_value::<So3Model>(params)
                .map_err(|e| errors.push(err("/params", e.to_string())))
                .ok()
                .map(Model::So3),
            other => {
                errors.push(err("/model", format!("unknown model '{other}' (expected coupled_oscillator, so3_rep5 or an inline object)")));
                None
            }
        },
        Some(Value::Object(o)) => match o.get("inline") {
            Some(spec) => match serde_json::from_value::<InlineSpec>(spec.clone()) {
                Ok(s) => match HamiltonianFamily::new(&s.name, s.jet, s.form, s.group) {
                    Ok(family) => Some(Model::Inline { family, o2: s.o2 }),
                    Err(e @ HopfError::H1Violation(_)) => {
                        return Err(ConfigError {
                            code: e.code().into(),
                            errors: vec![err("/model/inline/jet", e.to_string())],
                        })
                    }
                    Err(e) => {
                        errors.push(err("/model/inline", e.to_string()));
                        None
                    }
                },
                Err(e) => {
                    errors.push(err("/model/inline", e.to_string()));
                    None
                }
            },
            None => {
                errors.push(err("/model", "object models must have an 'inline' field"));
                None
            }
        },
        Some(_) => {
            errors.push(err("/model", "expected a model name or an inline object"));
            None
        }
    };

    let needs_interval = !matches!(model, Some(Model::So3(_)));
    let lambda_interval = match root.get("lambda_interval") {
        None if needs_interval => {
            errors.push(err("/lambda_interval", "required"));
            (0.0, 1.0)
        }
        None => (0.0, 1.0),
        Some(v) => match serde_json::from_value::<(f64, f64)>(v.clone()) {
            Ok((lo, hi)) if lo.is_finite() && hi.is_finite() && lo < hi => (lo, hi),
            Ok(_) => {
                errors.push(err("/lambda_interval", "interval must be finite and nonempty (lo < hi)"));
                (0.0, 1.0)
            }
            Err(e) => {
                errors.push(err("/lambda_interval", e.to_string()));
                (0.0, 1.0)
            }
        },
    };

    let mut tolerances = Tolerances::default();
    match root.get("tolerances") {
        None => {}
        Some(Value::Object(map)) => {
            for (name, v) in map {
                let ptr = format!("/tolerances/{name}");
                match v.as_f64() {
                    Some(x) if x > 0.0 => {
                        if let Err(e) = tolerances.set(name, x) {
                            errors.push(err(&ptr, e.to_string()));
                        }
                    }
                    _ => errors.push(err(&ptr, "tolerance overrides must be positive numbers")),
                }
            }
        }
        Some(_) => errors.push(err("/tolerances", "expected an object of name: value pairs")),
    }

    let branches: BranchSettings = section(root, "branches", &mut errors);
    let verify: VerifySettings = section(root, "verify", &mut errors);
    let sweep: SweepSettings = section(root, "sweep", &mut errors);
    if sweep.points < 2 {
        errors.push(err("/sweep/points", "need at least 2 points"));
    }
    let seed = match root.get("seed") {
        None => 42,
        Some(v) => v.as_u64().unwrap_or_else(|| {
            errors.push(err("/seed", "expected a non-negative integer"));
            42
        }),
    };

    if !errors.is_empty() {
        return Err(ConfigError::schema(errors));
    }
    Ok(RunConfig {
        model: model.expect("no errors implies a model"),
        lambda_interval,
        tolerances,
        branches,
        verify,
        sweep,
        seed,
    })
}

/// Apply `name=value` overrides from the command line.
pub fn apply_tolerance_overrides(tol: &mut Tolerances, overrides: &[String]) -> Result<(), ConfigError> {
    let mut errors = Vec::new();
    for o in overrides {
        let ptr = format!("/tolerances/{}", o.split('=').next().unwrap_or(""));
        match o.split_once('=') {
            Some((name, v)) => match v.trim().parse::<f64>() {
                Ok(x) if x > 0.0 => {
                    if let Err(e) = tol.set(name.trim(), x) {
                        errors.push(err(&ptr, e.to_string()));
                    }
                }
                _ => errors.push(err(&ptr, format!("'{v}' is not a positive number"))),
            },
            None => errors.push(err(&ptr, format!("expected name=value, got '{o}'"))),
        }
    }
    if errors.is_empty() {
        Ok(())
    } else {
        Err(ConfigError::schema(errors))
    }
}

pub fn tolerance_map(tol: &Tolerances) -> BTreeMap<String, f64> {
    serde_json::from_value(serde_json::to_value(tol).expect("tolerances serialize")).expect("flat map")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config(r#"{"model":"coupled_oscillator","lambda_interval":[0.9,1.1]}"#).unwrap();
        assert_eq!(c.lambda_interval, (0.9, 1.1));
        assert_eq!(c.tolerances, Tolerances::default());
        assert_eq!(c.seed, 42);
        assert!(matches!(c.model, Model::Oscillator(_)));
    }

    #[test]
    fn errors_carry_pointers() {
        let e = parse_config(r#"{"model":"nope","lambda_interval":[1.0,0.5],"tolerances":{"frame":-1},"extra":1}"#).unwrap_err();
        assert_eq!(e.code, "SCHEMA_ERROR");
        let ptrs: Vec<&str> = e.errors.iter().map(|x| x.pointer.as_str()).collect();
        for p in ["/extra", "/model", "/lambda_interval", "/tolerances/frame"] {
            assert!(ptrs.contains(&p), "{ptrs:?}");
        }
    }

    #[test]
    fn cli_overrides() {
        let mut t = Tolerances::default();
        apply_tolerance_overrides(&mut t, &["rpo=1e-7".into()]).unwrap();
        assert_eq!(t.rpo, 1e-7);
        assert!(apply_tolerance_overrides(&mut t, &["rpo".into()]).is_err());
        assert!(apply_tolerance_overrides(&mut t, &["nothing=1".into()]).is_err());
    }
}
