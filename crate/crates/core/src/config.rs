//! Line-based `key = value` configuration files.
//!
//! Blank lines and lines starting with `#` are ignored. Keys are consumed
//! with the `take_*` accessors; [`KeyValues::finish`] rejects whatever is
//! left over, so unknown keys are always errors.

use std::collections::BTreeMap;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default)]
pub struct KeyValues {
    entries: BTreeMap<String, (usize, String)>,
    resolved: BTreeMap<String, String>,
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let Some((key, value)) = trimmed.split_once('=') else {
                return Err(Error::Config { line, msg: format!("expected `key = value`, got `{trimmed}`") });
            };
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::Config { line, msg: "empty key".into() });
            }
            if entries.insert(key.to_string(), (line, value.trim().to_string())).is_some() {
                return Err(Error::Config { line, msg: format!("duplicate key `{key}`") });
            }
        }
        Ok(Self { entries, resolved: BTreeMap::new() })
    }

    /// Line number of `key`, or 0 when it was defaulted.
    pub fn line_of(&self, key: &str) -> usize {
        self.entries.get(key).map_or(0, |(l, _)| *l)
    }

    /// Sets or overrides a key programmatically (e.g. from a CLI flag).
    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(key.to_string(), (0, value.to_string()));
    }

    pub fn take<T: FromStr + ToString>(&mut self, key: &str, default: T) -> Result<T> {
        let value = match self.entries.remove(key) {
            Some((line, raw)) => raw.parse::<T>().map_err(|_| Error::Config {
                line,
                msg: format!("cannot parse value `{raw}` for key `{key}`"),
            })?,
            None => default,
        };
        self.resolved.insert(key.to_string(), value.to_string());
        Ok(value)
    }

    pub fn take_f64(&mut self, key: &str, default: f64) -> Result<f64> {
        self.take(key, default)
    }

    pub fn take_usize(&mut self, key: &str, default: usize) -> Result<usize> {
        self.take(key, default)
    }

    pub fn take_str(&mut self, key: &str, default: &str) -> Result<String> {
        self.take(key, default.to_string())
    }

    /// Every key with its effective value, including defaults.
    pub fn resolved(&self) -> &BTreeMap<String, String> {
        &self.resolved
    }

    /// Errors on the first key that no accessor consumed.
    pub fn finish(&self) -> Result<()> {
        match self.entries.keys().next() {
            Some(key) => Err(Error::UnknownKey(key.clone())),
            None => Ok(()),
        }
    }
}
