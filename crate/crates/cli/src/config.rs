//! Flat `key = value` configuration documents.
//!
//! The format is a plain UTF-8 text file: one `key = value` pair per line,
//! `#` starts a comment line, blank lines are ignored, and nested structure
//! is spelled with dotted keys (`problem.alpha = 0.5`). Commands consume the
//! keys they understand; [`Config::finish`] then rejects any leftover key by
//! name, so misspellings never pass silently.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::CliError;

pub struct Config {
    entries: BTreeMap<String, String>,
    used: RefCell<BTreeSet<String>>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Usage(format!(
                    "config line {}: expected `key = value`, got `{line}`",
                    idx + 1
                )));
            };
            let key = key.trim().to_string();
            if key.is_empty() {
                return Err(CliError::Usage(format!("config line {}: empty key", idx + 1)));
            }
            if entries.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(CliError::Usage(format!("duplicate config key `{key}`")));
            }
        }
        Ok(Self {
            entries,
            used: RefCell::new(BTreeSet::new()),
        })
    }

    /// Raw lookup; marks the key as consumed when present.
    pub fn get(&self, key: &str) -> Option<&str> {
        let hit = self.entries.get(key).map(String::as_str);
        if hit.is_some() {
            self.used.borrow_mut().insert(key.to_string());
        }
        hit
    }

    pub fn require(&self, key: &str) -> Result<&str, CliError> {
        self.get(key)
            .ok_or_else(|| CliError::Usage(format!("missing required config key `{key}`")))
    }

    pub fn get_parsed<T>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        match self.get(key) {
            None => Ok(None),
            Some(raw) => parse_value(key, raw).map(Some),
        }
    }

    pub fn get_or<T>(&self, key: &str, default: T) -> Result<T, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        Ok(self.get_parsed(key)?.unwrap_or(default))
    }

    pub fn require_parsed<T>(&self, key: &str) -> Result<T, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        parse_value(key, self.require(key)?)
    }

    /// 64-bit integer accepting decimal or `0x`-prefixed hex (seeds read
    /// naturally either way); underscores are allowed as digit separators.
    pub fn get_u64(&self, key: &str) -> Result<Option<u64>, CliError> {
        match self.get(key) {
            None => Ok(None),
            Some(raw) => parse_u64(key, raw).map(Some),
        }
    }

    pub fn require_u64(&self, key: &str) -> Result<u64, CliError> {
        parse_u64(key, self.require(key)?)
    }

    pub fn get_u64_or(&self, key: &str, default: u64) -> Result<u64, CliError> {
        Ok(self.get_u64(key)?.unwrap_or(default))
    }

    /// Comma-separated list of reals.
    pub fn get_f64_list(&self, key: &str) -> Result<Option<Vec<f64>>, CliError> {
        match self.get(key) {
            None => Ok(None),
            Some(raw) => parse_f64_list(key, raw).map(Some),
        }
    }

    pub fn require_f64_list(&self, key: &str) -> Result<Vec<f64>, CliError> {
        parse_f64_list(key, self.require(key)?)
    }

    /// Semicolon-separated list of comma-separated vectors:
    /// `1, 0; 0, 1` is the two unit vectors of the plane.
    pub fn get_vector_list(&self, key: &str) -> Result<Option<Vec<Vec<f64>>>, CliError> {
        let Some(raw) = self.get(key) else {
            return Ok(None);
        };
        let mut out = Vec::new();
        for chunk in raw.split(';') {
            out.push(parse_f64_list(key, chunk)?);
        }
        Ok(Some(out))
    }

    /// Rejects the first config key no command consumed.
    pub fn finish(&self) -> Result<(), CliError> {
        let used = self.used.borrow();
        for key in self.entries.keys() {
            if !used.contains(key) {
                return Err(CliError::Usage(format!("unknown config key `{key}`")));
            }
        }
        Ok(())
    }

    /// All entries in sorted order, for manifests and artifact headers.
    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// The config as a JSON object (string values, keys sorted).
    pub fn to_json(&self) -> serde_json::Value {
        let map: serde_json::Map<String, serde_json::Value> = self
            .entries
            .iter()
            .map(|(k, v)| (k.clone(), serde_json::Value::String(v.clone())))
            .collect();
        serde_json::Value::Object(map)
    }
}

fn parse_value<T>(key: &str, raw: &str) -> Result<T, CliError>
where
    T: FromStr,
    T::Err: Display,
{
    raw.parse()
        .map_err(|e| CliError::Usage(format!("config key `{key}`: cannot parse `{raw}`: {e}")))
}

fn parse_u64(key: &str, raw: &str) -> Result<u64, CliError> {
    let cleaned: String = raw.chars().filter(|&c| c != '_').collect();
    let parsed = if let Some(hex) = cleaned.strip_prefix("0x").or_else(|| cleaned.strip_prefix("0X")) {
        u64::from_str_radix(hex, 16)
    } else {
        cleaned.parse()
    };
    parsed.map_err(|e| CliError::Usage(format!("config key `{key}`: cannot parse `{raw}`: {e}")))
}

fn parse_f64_list(key: &str, raw: &str) -> Result<Vec<f64>, CliError> {
    raw.split(',')
        .map(|piece| parse_value::<f64>(key, piece.trim()))
        .collect()
}
