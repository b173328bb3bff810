//! Optional JSON configuration. Every section is a partial object merged
//! over the built-in defaults; command-line flags override both.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub profile: Option<String>,
    /// Partial sweep plan.
    pub sweep: Option<Value>,
    /// Partial FDTD configuration.
    pub fdtd: Option<Value>,
    /// Partial MLP architecture.
    pub mlp: Option<Value>,
    /// Partial CNN architecture.
    pub cnn: Option<Value>,
    /// Partial training configuration for the MLP.
    pub train_mlp: Option<Value>,
    /// Partial training configuration for the CNN.
    pub train_cnn: Option<Value>,
}

impl Config {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("--config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("--config {}: {e}", path.display())))
    }
}

/// Overlays `patch` onto `base`, recursing into objects. Keys absent from
/// `base` are rejected so typos do not pass silently.
fn merge(base: &mut Value, patch: &Value, path: &str) -> Result<(), String> {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                let here = format!("{path}.{k}");
                match b.get_mut(k) {
                    Some(slot) => merge(slot, v, &here)?,
                    None => return Err(format!("unknown key '{here}'")),
                }
            }
            Ok(())
        }
        (slot, v) => {
            *slot = v.clone();
            Ok(())
        }
    }
}

/// `defaults` with the config section `name` merged over it.
pub fn section<T: Serialize + DeserializeOwned>(
    defaults: T,
    patch: Option<&Value>,
    name: &str,
) -> Result<T, CliError> {
    let Some(patch) = patch else {
        return Ok(defaults);
    };
    let mut value = serde_json::to_value(&defaults).map_err(plasmo::Error::from)?;
    merge(&mut value, patch, name).map_err(|m| CliError::Usage(format!("config: {m}")))?;
    serde_json::from_value(value)
        .map_err(|e| CliError::Usage(format!("config section '{name}': {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use plasmo::surrogate::TrainConfig;

    #[test]
    fn partial_section_overrides_only_given_keys() {
        let patch = serde_json::json!({ "max_epochs": 7, "split": [0.5, 0.5] });
        let cfg = section(TrainConfig::mlp(), Some(&patch), "train_mlp").unwrap();
        assert_eq!(cfg.max_epochs, 7);
        assert_eq!(cfg.split, vec![0.5, 0.5]);
        assert_eq!(cfg.batch_size, TrainConfig::mlp().batch_size);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let patch = serde_json::json!({ "max_epoch": 7 });
        match section(TrainConfig::mlp(), Some(&patch), "train_mlp") {
            Err(CliError::Usage(m)) => assert!(m.contains("train_mlp.max_epoch"), "{m}"),
            other => panic!("expected usage error, got {other:?}"),
        }
    }
}
