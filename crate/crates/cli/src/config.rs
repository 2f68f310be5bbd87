//! Run configuration: a JSON object of pipeline parameters plus an optional
//! preset and phantom.
//!
//! ```json
//! { "preset": "pipeline", "phantom": "pipeline", "iterations": 2, "noise": 0.001 }
//! ```
//!
//! `preset` picks the parameter defaults, every other key except `phantom`
//! must be a pipeline parameter. `phantom` is a preset name, a path to a
//! phantom JSON file (relative to the config file) or an inline phantom.

use std::fs;
use std::path::Path;

use serde_json::{Map, Value};
use tvdbar_core::pipeline::PipelineConfig;
use tvdbar_core::PhantomSpec;

use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub phantom: PhantomSpec,
    pub params: PipelineConfig,
}

impl RunConfig {
    /// Effective configuration, as echoed into manifests.
    pub fn echo(&self) -> Value {
        let mut obj = Map::new();
        obj.insert("phantom".into(), serde_json::to_value(&self.phantom).expect("phantom serializes"));
        if let Value::Object(params) = serde_json::to_value(&self.params).expect("config serializes") {
            obj.extend(params);
        }
        Value::Object(obj)
    }
}

pub fn preset_params(name: &str) -> Result<PipelineConfig, CliError> {
    match name {
        "heart_and_lungs" => Ok(PipelineConfig::heart_and_lungs()),
        "pipeline" => Ok(PipelineConfig::pipeline()),
        other => Err(CliError::Config(format!(
            "unknown preset `{other}`, expected `heart_and_lungs` or `pipeline`"
        ))),
    }
}

fn preset_phantom(name: &str) -> Option<PhantomSpec> {
    match name {
        "heart_and_lungs" => Some(PhantomSpec::heart_and_lungs()),
        "pipeline" => Some(PhantomSpec::pipeline()),
        _ => None,
    }
}

/// A preset name or a path to a phantom JSON document.
pub fn load_phantom(arg: &str, base: &Path) -> Result<PhantomSpec, CliError> {
    if let Some(spec) = preset_phantom(arg) {
        return Ok(spec);
    }
    let path = base.join(arg);
    let text = fs::read_to_string(&path)
        .map_err(|e| CliError::Config(format!("cannot read phantom {}: {e}", path.display())))?;
    phantom_from_value(serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?)
}

fn phantom_from_value(v: Value) -> Result<PhantomSpec, CliError> {
    let spec: PhantomSpec = serde_json::from_value(v).map_err(|e| CliError::Config(format!("phantom: {e}")))?;
    spec.validate().map_err(|e| CliError::Config(format!("phantom: {e}")))?;
    Ok(spec)
}

/// Parses a config document. Relative phantom paths resolve against `base`.
pub fn parse_config_str(text: &str, base: &Path) -> Result<RunConfig, CliError> {
    let doc: Value = serde_json::from_str(text).map_err(|e| CliError::Config(format!("config is not valid JSON: {e}")))?;
    let Value::Object(mut obj) = doc else {
        return Err(CliError::Config("config must be a JSON object".into()));
    };
    let preset = match obj.remove("preset") {
        None => "heart_and_lungs".to_string(),
        Some(Value::String(s)) => s,
        Some(other) => return Err(CliError::Config(format!("preset must be a string, got {other}"))),
    };
    let defaults = preset_params(&preset)?;
    let phantom = match obj.remove("phantom") {
        None => preset_phantom(&preset).expect("preset has a phantom"),
        Some(Value::String(s)) => load_phantom(&s, base)?,
        Some(v @ Value::Object(_)) => phantom_from_value(v)?,
        Some(other) => return Err(CliError::Config(format!("phantom must be a name, path or object, got {other}"))),
    };
    let Value::Object(mut merged) = serde_json::to_value(&defaults).expect("config serializes") else {
        unreachable!("config serializes to an object")
    };
    merged.extend(obj);
    let params: PipelineConfig =
        serde_json::from_value(Value::Object(merged)).map_err(|e| CliError::Config(format!("config: {e}")))?;
    params.validate().map_err(|e| CliError::Config(format!("config: {e}")))?;
    Ok(RunConfig { phantom, params })
}

pub fn parse_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    parse_config_str(&text, path.parent().unwrap_or(Path::new(".")))
}
