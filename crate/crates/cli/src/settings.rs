//! Config file loading: TOML or JSON, converted to a JSON document and
//! validated by the core config rules.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use explorer_core::config::{validate_config, RunConfig};
use serde_json::Value;

/// Converts a TOML value to the equivalent JSON value.
pub fn toml_to_json(v: toml::Value) -> Value {
    match v {
        toml::Value::String(s) => Value::String(s),
        toml::Value::Integer(i) => Value::from(i),
        toml::Value::Float(f) => serde_json::Number::from_f64(f).map(Value::Number).unwrap_or(Value::Null),
        toml::Value::Boolean(b) => Value::Bool(b),
        toml::Value::Datetime(d) => Value::String(d.to_string()),
        toml::Value::Array(a) => Value::Array(a.into_iter().map(toml_to_json).collect()),
        toml::Value::Table(t) => Value::Object(t.into_iter().map(|(k, v)| (k, toml_to_json(v))).collect()),
    }
}

pub fn parse_config(text: &str, is_json: bool) -> Result<RunConfig> {
    let raw: Value = if is_json {
        serde_json::from_str(text).context("config is not valid JSON")?
    } else {
        toml_to_json(toml::from_str::<toml::Value>(text).context("config is not valid TOML")?)
    };
    Ok(validate_config(&raw)?)
}

/// Loads a config file. Relative `backend.playbook` and `ground_truth`
/// paths resolve against the file's directory, then the current directory.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let is_json = path.extension().is_some_and(|e| e == "json");
    let mut c = parse_config(&text, is_json).with_context(|| format!("in {}", path.display()))?;
    let base = path.parent().unwrap_or(Path::new("."));
    c.backend.playbook = c.backend.playbook.map(|p| resolve(&p, base));
    c.ground_truth = c.ground_truth.map(|p| resolve(&p, base));
    Ok(c)
}

fn resolve(p: &Path, base: &Path) -> PathBuf {
    let beside = base.join(p);
    if p.is_absolute() || !beside.exists() {
        p.to_path_buf()
    } else {
        beside
    }
}
