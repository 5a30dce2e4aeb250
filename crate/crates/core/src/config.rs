//! Run configuration files (JSON or TOML), one section per component.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::contact::CapsuleConfig;
use crate::dataset::PerturbConfig;
use crate::error::{Error, Result};
use crate::loss::LossConfig;
use crate::metrics::MetricsConfig;
use crate::optim::OptimConfig;

/// Every section and key is optional and falls back to its default.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub capsule: CapsuleConfig,
    pub loss: LossConfig,
    pub optim: OptimConfig,
    pub perturb: PerturbConfig,
    pub metrics: MetricsConfig,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.capsule.validate()?;
        self.loss.validate()?;
        self.optim.validate()?;
        self.perturb.validate()?;
        self.metrics.validate()
    }

    /// Parses by extension: `.toml`, otherwise JSON.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let is_toml = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml"));
        let config: RunConfig = if is_toml {
            toml::from_str(&text).map_err(|e| Error::format(path, e))?
        } else {
            serde_json::from_str(&text).map_err(|e| Error::format(path, e))?
        };
        config.validate().map_err(|e| Error::format(path, e))?;
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_toml_keeps_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "[loss]\nlambda_O = 2.0\n\n[optim]\niterations = 10\n").unwrap();
        let config = RunConfig::load(&path).unwrap();
        assert_eq!(config.loss.lambda_object, 2.0);
        assert_eq!(config.loss.lambda_miss, LossConfig::default().lambda_miss);
        assert_eq!(config.optim.iterations, 10);
        assert_eq!(config.capsule, CapsuleConfig::default());
    }

    #[test]
    fn json_and_toml_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = RunConfig::default();
        config.optim.n_restart = 3;
        config.perturb.sigma_theta = 0.25;
        for (name, text) in [("a.json", config.to_json()), ("a.toml", config.to_toml())] {
            let path = dir.path().join(name);
            std::fs::write(&path, text).unwrap();
            assert_eq!(RunConfig::load(&path).unwrap(), config);
        }
    }

    #[test]
    fn unknown_keys_and_invalid_values_name_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        std::fs::write(&path, r#"{"loss": {"lambda_typo": 1.0}}"#).unwrap();
        assert!(RunConfig::load(&path).unwrap_err().to_string().contains("bad.json"));
        std::fs::write(&path, r#"{"optim": {"learning_rate": -1.0}}"#).unwrap();
        assert!(RunConfig::load(&path).unwrap_err().to_string().contains("bad.json"));
    }
}
