//! Layered settings. A value comes from the command-line flag when given,
//! else from the `[<subcommand>]` table of the config file, else from the
//! file's top-level keys, else from the built-in default.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Config-file values visible to one subcommand, plus a record of every
/// value resolved so far.
#[derive(Debug, Default)]
pub struct Settings {
    table: toml::Table,
    resolved: RefCell<BTreeMap<String, serde_json::Value>>,
}

impl Settings {
    /// Reads `path` (when given) and flattens it for `section`: top-level
    /// keys first, then the keys of `[section]` on top.
    pub fn load(path: Option<&Path>, section: &str) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Settings::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text, section).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn parse(text: &str, section: &str) -> Result<Self> {
        let doc: toml::Table = text.parse()?;
        let mut table = toml::Table::new();
        for (k, v) in &doc {
            if !v.is_table() {
                table.insert(k.clone(), v.clone());
            }
        }
        if let Some(toml::Value::Table(sec)) = doc.get(section) {
            for (k, v) in sec {
                table.insert(k.clone(), v.clone());
            }
        }
        Ok(Settings {
            table,
            resolved: RefCell::default(),
        })
    }

    /// The config-file value for `key`, if any.
    pub fn get<T: DeserializeOwned>(&self, key: &str) -> Result<Option<T>> {
        self.table
            .get(key)
            .map(|v| v.clone().try_into().with_context(|| format!("config key `{key}`")))
            .transpose()
    }

    /// Flag, then config file, then `default`. The outcome is recorded.
    pub fn pick<T: DeserializeOwned + Serialize>(&self, key: &str, flag: Option<T>, default: T) -> Result<T> {
        let value = match flag {
            Some(v) => v,
            None => self.get(key)?.unwrap_or(default),
        };
        self.record(key, &value);
        Ok(value)
    }

    /// Like [`Settings::pick`] without a default; absent values stay `None`.
    pub fn pick_opt<T: DeserializeOwned + Serialize>(&self, key: &str, flag: Option<T>) -> Result<Option<T>> {
        let value = match flag {
            Some(v) => Some(v),
            None => self.get(key)?,
        };
        self.record(key, &value);
        Ok(value)
    }

    /// Like [`Settings::pick_opt`] but fails when the value is missing.
    pub fn require<T: DeserializeOwned + Serialize>(&self, key: &str, flag: Option<T>) -> Result<T> {
        self.pick_opt(key, flag)?
            .with_context(|| format!("missing `--{}` (or `{key}` in the config file)", key.replace('_', "-")))
    }

    /// Boolean switches: a flag set on the command line wins, otherwise the
    /// config file decides.
    pub fn switch(&self, key: &str, flag: bool) -> Result<bool> {
        self.pick(key, flag.then_some(true), false)
    }

    /// Lists given as repeated flags; an empty flag list defers to the file.
    pub fn list<T: DeserializeOwned + Serialize>(&self, key: &str, flag: Vec<T>) -> Result<Vec<T>> {
        let flag = (!flag.is_empty()).then_some(flag);
        self.pick(key, flag, Vec::new())
    }

    fn record<T: Serialize>(&self, key: &str, value: &T) {
        let v = serde_json::to_value(value).unwrap_or(serde_json::Value::Null);
        self.resolved.borrow_mut().insert(key.to_string(), v);
    }

    /// Every value resolved through this object, keyed by name.
    pub fn resolved(&self) -> BTreeMap<String, serde_json::Value> {
        self.resolved.borrow().clone()
    }
}
