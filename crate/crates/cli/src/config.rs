//! Optional config-file layer: a TOML or JSON file with one table per
//! subcommand supplies defaults that explicit flags override.

use anyhow::{anyhow, Context, Result};
use std::path::Path;

pub struct ConfigFile {
    root: serde_json::Value,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config file {}", path.display()))?;
        let is_json = path
            .extension()
            .map(|e| e.eq_ignore_ascii_case("json"))
            .unwrap_or(false);
        let root: serde_json::Value = if is_json {
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        } else {
            let toml_value: toml::Value =
                toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            serde_json::to_value(toml_value)?
        };
        if !root.is_object() {
            return Err(anyhow!("config root must be a table of subcommand sections"));
        }
        Ok(ConfigFile { root })
    }

    pub fn empty() -> Self {
        ConfigFile {
            root: serde_json::Value::Object(Default::default()),
        }
    }

    fn key(&self, section: &str, key: &str) -> Option<&serde_json::Value> {
        self.root.get(section)?.get(key)
    }

    pub fn f64(&self, section: &str, key: &str) -> Option<f64> {
        self.key(section, key)?.as_f64()
    }

    pub fn usize(&self, section: &str, key: &str) -> Option<usize> {
        self.key(section, key)?.as_u64().map(|v| v as usize)
    }

    pub fn bool(&self, section: &str, key: &str) -> Option<bool> {
        self.key(section, key)?.as_bool()
    }

    pub fn string(&self, section: &str, key: &str) -> Option<String> {
        self.key(section, key)?.as_str().map(str::to_string)
    }
}
