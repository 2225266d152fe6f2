//! Loading a run configuration from disk, applying `--set` overrides and
//! hashing the result.

use std::fmt;
use std::path::Path;

use serde_json::Value;
use sha2::{Digest, Sha256};
use stofv::config::RunConfig;

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Reads a TOML (`.toml`) or JSON (anything else) configuration; no path
/// means all defaults.
pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<RunConfig, ConfigError> {
    let mut value = match path {
        None => serde_json::to_value(RunConfig::default()).expect("config serializes"),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| ConfigError(format!("{}: {e}", p.display())))?;
            let cfg: RunConfig = if p.extension().is_some_and(|e| e == "toml") {
                toml::from_str(&text).map_err(|e| ConfigError(format!("{}: {}", p.display(), e.message())))?
            } else {
                serde_json::from_str(&text).map_err(|e| ConfigError(format!("{}: {e}", p.display())))?
            };
            serde_json::to_value(cfg).expect("config serializes")
        }
    };
    for o in overrides {
        apply_override(&mut value, o)?;
    }
    let cfg: RunConfig = serde_json::from_value(value).map_err(|e| ConfigError(e.to_string()))?;
    cfg.validate().map_err(|e| ConfigError(e.to_string()))?;
    Ok(cfg)
}

/// Applies `dotted.key=value`. The value is read as JSON when it parses as
/// JSON and as a bare string otherwise. Changing the `name` tag of a tagged
/// section (such as `initial`) resets the section's other fields.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<(), ConfigError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| ConfigError(format!("override '{assignment}' is not of the form key=value")))?;
    let new: Value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    let (last, parents) = parts.split_last().expect("split yields one part");
    let mut node = root;
    for p in parents {
        let obj =
            node.as_object_mut().ok_or_else(|| ConfigError(format!("override '{key}': '{p}' is not a section")))?;
        node = obj.entry(p.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    let obj = node.as_object_mut().ok_or_else(|| ConfigError(format!("override '{key}': parent is not a section")))?;
    if *last == "name" && obj.get("name").is_some_and(|old| *old != new) {
        obj.clear();
    }
    obj.insert(last.to_string(), new);
    Ok(())
}

/// SHA-256 of the canonical JSON form of the configuration, excluding the
/// output directory (which does not affect any result).
pub fn config_hash(cfg: &RunConfig) -> String {
    let mut c = cfg.clone();
    c.output.dir.clear();
    let canonical = serde_json::to_string(&c).expect("config serializes");
    format!("{:x}", Sha256::digest(canonical.as_bytes()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use stofv::config::InitialCondition;

    #[test]
    fn overrides_reach_nested_keys() {
        let cfg =
            load(None, &["grid.m=16".into(), "time.t_final=0.25".into(), "flux.numerical=rusanov".into()]).unwrap();
        assert_eq!(cfg.grid.m, 16);
        assert_eq!(cfg.time.t_final, 0.25);
    }

    #[test]
    fn changing_the_initial_kind_resets_its_parameters() {
        let cfg =
            load(None, &["initial.name=riemann".into(), "initial.left=1".into(), "initial.right=0".into()]).unwrap();
        assert_eq!(cfg.initial, InitialCondition::Riemann { left: 1.0, right: 0.0, x0: 0.5 });
    }

    #[test]
    fn bad_overrides_are_config_errors() {
        assert!(load(None, &["grid.m".into()]).is_err());
        assert!(load(None, &["grid.bogus=1".into()]).is_err());
        assert!(load(None, &["time.theta=1.5".into()]).is_err());
    }

    #[test]
    fn hash_ignores_output_dir_only() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.output.dir = "elsewhere".into();
        assert_eq!(config_hash(&a), config_hash(&b));
        b.noise.seed = 1;
        assert_ne!(config_hash(&a), config_hash(&b));
        assert_eq!(config_hash(&a).len(), 64);
    }
}
