//! Sweep presets: a base config template plus one parameter to vary.
//!
//! The templates live in `presets/*.json` and are compiled into the binary.

use serde::Deserialize;
use serde_json::Value;

use crate::config::{ConfigError, ExperimentConfig};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Preset {
    pub name: String,
    pub description: String,
    /// Dotted config key, e.g. `fed.gradients_per_hospital`.
    pub parameter: String,
    pub values: Vec<u64>,
    pub base: Value,
}

const SOURCES: [(&str, &str); 3] = [
    ("fig3", include_str!("../presets/fig3.json")),
    ("fig3-six", include_str!("../presets/fig3-six.json")),
    ("fig4", include_str!("../presets/fig4.json")),
];

pub fn names() -> Vec<&'static str> {
    SOURCES.iter().map(|(n, _)| *n).collect()
}

pub fn load(name: &str) -> Option<Preset> {
    SOURCES
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| serde_json::from_str(text).expect("bundled presets parse"))
}

impl Preset {
    /// The base config with `parameter` set to `value`.
    pub fn config(&self, value: u64) -> Result<ExperimentConfig, ConfigError> {
        let mut doc = self.base.clone();
        let pointer = format!("/{}", self.parameter.replace('.', "/"));
        let (parent, leaf) = pointer.rsplit_once('/').expect("pointer has a slash");
        let Some(Value::Object(section)) =
            doc.pointer_mut(if parent.is_empty() { "" } else { parent })
        else {
            return Err(ConfigError::Invalid {
                key: "preset.parameter",
                reason: format!("no section for {}", self.parameter),
            });
        };
        section.insert(leaf.to_string(), Value::from(value));
        let cfg: ExperimentConfig = serde_json::from_value(doc)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn configs(&self) -> Result<Vec<(u64, ExperimentConfig)>, ConfigError> {
        self.values
            .iter()
            .map(|&v| Ok((v, self.config(v)?)))
            .collect()
    }
}
