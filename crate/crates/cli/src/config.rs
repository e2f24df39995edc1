//! TOML experiment config with dotted-path overrides.

use std::path::Path;

use physreg_core::config::ExperimentConfig;
use toml::{Table, Value};

use crate::error::{CliError, CliResult};

fn default_tree() -> Table {
    Table::try_from(ExperimentConfig::default()).expect("default config serializes")
}

/// Parses `value` as a TOML value, falling back to a bare string.
fn parse_value(raw: &str) -> Value {
    let doc = format!("v = {raw}");
    match doc.parse::<Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| Value::String(raw.into())),
        Err(_) => Value::String(raw.into()),
    }
}

/// Sets `key` (dotted path) in `tree`. The path must exist in the default
/// config so misspelt keys are reported instead of ignored.
pub fn apply_override(tree: &mut Table, assignment: &str) -> CliResult<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Validation(format!("override `{assignment}` is not of the form key=value")))?;
    let key = key.trim();
    let parts: Vec<&str> = key.split('.').collect();
    let unknown = || CliError::Validation(format!("unknown config key `{key}`"));

    let defaults = default_tree();
    let mut probe = &defaults;
    for (i, p) in parts.iter().enumerate() {
        match probe.get(*p) {
            Some(Value::Table(t)) if i + 1 < parts.len() => probe = t,
            Some(Value::Table(_)) => {
                return Err(CliError::Validation(format!("config key `{key}` is a section, not a value")))
            }
            Some(_) if i + 1 == parts.len() => {}
            _ => return Err(unknown()),
        }
    }

    let mut node = tree;
    for p in &parts[..parts.len() - 1] {
        let entry = node.entry(p.to_string()).or_insert_with(|| Value::Table(Table::new()));
        node = match entry {
            Value::Table(t) => t,
            _ => return Err(CliError::Validation(format!("config key `{key}`: `{p}` is not a section"))),
        };
    }
    let mut value = parse_value(raw.trim());
    // integers given for real-valued keys
    if let (Some(Value::Float(_)), Value::Integer(i)) = (probe.get(parts[parts.len() - 1]), &value) {
        value = Value::Float(*i as f64);
    }
    node.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

pub fn load_config(path: Option<&Path>, overrides: &[String]) -> CliResult<ExperimentConfig> {
    let mut tree = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", p.display())))?;
            text.parse::<Table>()
                .map_err(|e| CliError::Validation(format!("config {}: {e}", p.display())))?
        }
        None => Table::new(),
    };
    for o in overrides {
        apply_override(&mut tree, o)?;
    }
    let cfg: ExperimentConfig =
        Value::Table(tree).try_into().map_err(|e: toml::de::Error| CliError::Validation(format!("config: {}", e.message())))?;
    cfg.validate().map_err(|e| CliError::Validation(e.to_string()))?;
    Ok(cfg)
}

pub fn to_toml(cfg: &ExperimentConfig) -> String {
    toml::to_string(cfg).expect("config serializes")
}
