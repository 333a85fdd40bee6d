//! Optional TOML config file merged under command-line flags (flags win),
//! plus the resolved-config snapshot every command writes next to its
//! outputs so a run can be reproduced from its artifacts alone.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

pub struct ConfigFile {
    table: toml::Table,
}

impl ConfigFile {
    pub fn load(path: Option<&PathBuf>) -> Result<Self> {
        let table = match path {
            None => toml::Table::new(),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading config {}", p.display()))?;
                text.parse::<toml::Table>()
                    .with_context(|| format!("parsing config {}", p.display()))?
            }
        };
        Ok(ConfigFile { table })
    }

    fn value(&self, section: &str, key: &str) -> Option<&toml::Value> {
        self.table.get(section)?.as_table()?.get(key)
    }

    pub fn get_usize(&self, section: &str, key: &str) -> Result<Option<usize>> {
        match self.value(section, key) {
            None => Ok(None),
            Some(v) => match v.as_integer() {
                Some(i) if i >= 0 => Ok(Some(i as usize)),
                _ => bail!("config [{section}].{key} must be a non-negative integer"),
            },
        }
    }

    pub fn get_u64(&self, section: &str, key: &str) -> Result<Option<u64>> {
        match self.value(section, key) {
            None => Ok(None),
            Some(v) => match v.as_integer() {
                Some(i) if i >= 0 => Ok(Some(i as u64)),
                _ => bail!("config [{section}].{key} must be a non-negative integer"),
            },
        }
    }

    pub fn get_f64(&self, section: &str, key: &str) -> Result<Option<f64>> {
        match self.value(section, key) {
            None => Ok(None),
            Some(v) => match (v.as_float(), v.as_integer()) {
                (Some(f), _) => Ok(Some(f)),
                (None, Some(i)) => Ok(Some(i as f64)),
                _ => bail!("config [{section}].{key} must be a number"),
            },
        }
    }

    pub fn get_string(&self, section: &str, key: &str) -> Result<Option<String>> {
        match self.value(section, key) {
            None => Ok(None),
            Some(v) => match v.as_str() {
                Some(s) => Ok(Some(s.to_string())),
                None => bail!("config [{section}].{key} must be a string"),
            },
        }
    }
}

/// Writes the resolved settings as pretty JSON; byte-stable because the
/// snapshot carries no timestamps.
pub fn write_snapshot<T: serde::Serialize>(path: &Path, resolved: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(resolved)?;
    std::fs::write(path, text + "\n")
        .with_context(|| format!("writing config snapshot {}", path.display()))?;
    Ok(())
}

/// `out/report` -> `out/report.config.json`; `data.json` -> `data.config.json`.
pub fn snapshot_path(output: &Path) -> PathBuf {
    output.with_extension("config.json")
}
