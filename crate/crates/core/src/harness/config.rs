//! JSON experiment configs and their merge with command-line flags.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::UsageError;

/// Contents of a `--config` file. Keys other than the three named fields
/// are experiment flags, spelled with underscores.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub experiment: Option<String>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub out: Option<String>,
    #[serde(flatten)]
    pub params: Map<String, Value>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, UsageError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| UsageError(format!("bad config {}: {e}", path.display())))
    }
}

fn same(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => x.as_f64() == y.as_f64(),
        (Value::Array(x), Value::Array(y)) => x.len() == y.len() && x.iter().zip(y).all(|(p, q)| same(p, q)),
        _ => a == b,
    }
}

/// Merges one scalar setting; the config wins a disagreement only under `force`.
pub fn merge_scalar<T: PartialEq + std::fmt::Debug>(
    name: &str,
    cli: Option<T>,
    config: Option<T>,
    force: bool,
) -> Result<Option<T>, UsageError> {
    match (cli, config) {
        (Some(c), Some(f)) if c != f => {
            if force {
                Ok(Some(f))
            } else {
                Err(UsageError(format!(
                    "--{name} {c:?} conflicts with the config value {f:?}; pass --force to use the config"
                )))
            }
        }
        (c, f) => Ok(c.or(f)),
    }
}

/// Overlays config parameters on parsed flags.
pub fn merge_args<T: Serialize + DeserializeOwned>(
    cli: &T,
    params: &Map<String, Value>,
    force: bool,
) -> Result<T, UsageError> {
    let mut merged = match serde_json::to_value(cli).map_err(|e| UsageError(e.to_string()))? {
        Value::Object(m) => m,
        _ => Map::new(),
    };
    merged.retain(|_, v| !v.is_null());
    for (k, v) in params {
        let key = k.replace('-', "_");
        match merged.get(&key) {
            Some(c) if !same(c, v) => {
                if !force {
                    return Err(UsageError(format!(
                        "--{} conflicts with the config value {v}; pass --force to use the config",
                        key.replace('_', "-")
                    )));
                }
                merged.insert(key, v.clone());
            }
            Some(_) => {}
            None => {
                merged.insert(key, v.clone());
            }
        }
    }
    serde_json::from_value(Value::Object(merged)).map_err(|e| UsageError(format!("invalid config: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug, Default, Serialize, Deserialize, PartialEq)]
    #[serde(deny_unknown_fields)]
    struct Demo {
        d: Option<usize>,
        betas: Option<Vec<f64>>,
    }

    fn params(text: &str) -> Map<String, Value> {
        serde_json::from_str(text).unwrap()
    }

    #[test]
    fn config_fills_missing_flags() {
        let cli = Demo { d: Some(3), betas: None };
        let m = merge_args(&cli, &params(r#"{"betas":[1,2]}"#), false).unwrap();
        assert_eq!(m, Demo { d: Some(3), betas: Some(vec![1.0, 2.0]) });
    }

    #[test]
    fn conflicts_need_force() {
        let cli = Demo { d: Some(3), betas: None };
        assert!(merge_args(&cli, &params(r#"{"d":2}"#), false).is_err());
        assert_eq!(merge_args(&cli, &params(r#"{"d":2}"#), true).unwrap().d, Some(2));
        // equal values are not a conflict, whatever their spelling
        let cli = Demo { d: None, betas: Some(vec![1.0]) };
        assert!(merge_args(&cli, &params(r#"{"betas":[1]}"#), false).is_ok());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(merge_args(&Demo::default(), &params(r#"{"bogus":1}"#), false).is_err());
    }

    #[test]
    fn scalar_merge() {
        assert_eq!(merge_scalar("seed", Some(1), None, false).unwrap(), Some(1));
        assert!(merge_scalar("seed", Some(1), Some(2), false).is_err());
        assert_eq!(merge_scalar("seed", Some(1), Some(2), true).unwrap(), Some(2));
    }
}
