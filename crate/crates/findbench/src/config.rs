//! Run configuration files. Every key mirrors a command-line flag, and flags win.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndpointConfig {
    pub url: Option<String>,
    pub model: Option<String>,
    pub api_key_env: Option<String>,
    pub temperature: Option<f64>,
    pub max_turns: Option<usize>,
    pub mode: Option<String>,
    pub exemplars: Option<PathBuf>,
    pub rate_limit: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: Option<PathBuf>,
    pub seed: Option<u64>,
    pub categories: Option<Vec<String>>,
    pub count: Option<usize>,
    pub numeric_count: Option<usize>,
    pub string_count: Option<usize>,
    pub tables: Option<PathBuf>,
    pub interpreter: Option<String>,
    pub budget: Option<usize>,
    pub judge: Option<String>,
    pub trials: Option<usize>,
    pub jobs: Option<usize>,
    pub interpretations: Option<PathBuf>,
    pub transcripts: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    #[serde(default)]
    pub endpoint: EndpointConfig,
}

impl RunConfig {
    /// Reads TOML, or JSON when the extension is `.json`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
        } else {
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
        }
    }
}

/// The flag value if given, else the config value.
pub fn pick<T: Clone>(flag: Option<T>, config: &Option<T>) -> Option<T> {
    flag.or_else(|| config.clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_toml_and_rejects_unknown_keys() {
        let c: RunConfig = toml::from_str("seed = 3\ncategories = [\"numeric\"]\n[endpoint]\nmodel = \"m\"\n").unwrap();
        assert_eq!(c.seed, Some(3));
        assert_eq!(c.endpoint.model.as_deref(), Some("m"));
        assert!(toml::from_str::<RunConfig>("sede = 3").is_err());
        assert_eq!(pick(Some(1), &Some(2)), Some(1));
        assert_eq!(pick(None, &Some(2)), Some(2));
    }
}
