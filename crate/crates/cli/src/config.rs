//! Flat key-value config files with one section per subcommand.
//!
//! Format: `[section]` headers, `key = value` lines, `#` comments, blank
//! lines ignored. Repeated keys accumulate (used for `contrast` and
//! `intervention`). Command-line flags override file values; the resolved
//! configuration is embedded in every output file so a record can be
//! regenerated from its own header.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

/// Parsed config file: section -> key -> values (in file order).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    sections: BTreeMap<String, BTreeMap<String, Vec<String>>>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<ConfigFile, String> {
        let mut sections: BTreeMap<String, BTreeMap<String, Vec<String>>> = BTreeMap::new();
        let mut current = String::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| format!("line {}: unterminated section header", lineno + 1))?;
                current = name.trim().to_string();
                sections.entry(current.clone()).or_default();
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected key = value, got '{line}'", lineno + 1))?;
            sections
                .entry(current.clone())
                .or_default()
                .entry(key.trim().to_string())
                .or_default()
                .push(value.trim().to_string());
        }
        Ok(ConfigFile { sections })
    }

    pub fn load(path: &Path) -> Result<ConfigFile, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config '{}': {e}", path.display()))?;
        Self::parse(&text)
    }

    /// Last value wins for scalar keys (so later lines override earlier).
    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.sections
            .get(section)
            .and_then(|s| s.get(key))
            .and_then(|v| v.last())
            .map(String::as_str)
    }

    /// All values for a repeatable key.
    pub fn get_all(&self, section: &str, key: &str) -> Vec<String> {
        self.sections
            .get(section)
            .and_then(|s| s.get(key))
            .cloned()
            .unwrap_or_default()
    }

    pub fn set(&mut self, section: &str, key: &str, value: impl Into<String>) {
        self.sections
            .entry(section.to_string())
            .or_default()
            .insert(key.to_string(), vec![value.into()]);
    }

    pub fn push(&mut self, section: &str, key: &str, value: impl Into<String>) {
        self.sections
            .entry(section.to_string())
            .or_default()
            .entry(key.to_string())
            .or_default()
            .push(value.into());
    }

    /// Serializes back to the file format; parsing the output reproduces an
    /// equivalent config.
    pub fn to_ini(&self) -> String {
        let mut out = String::new();
        for (section, keys) in &self.sections {
            if !section.is_empty() {
                let _ = writeln!(out, "[{section}]");
            }
            for (key, values) in keys {
                for v in values {
                    let _ = writeln!(out, "{key} = {v}");
                }
            }
        }
        out
    }
}

/// Parses a comma-separated list.
pub fn csv_list(text: &str) -> Vec<String> {
    text.split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect()
}
