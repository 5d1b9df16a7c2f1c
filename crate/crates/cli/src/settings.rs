//! Optional TOML defaults. Flags always win over file values, which win
//! over built-in defaults.
//!
//! Keys are looked up first in a table named after the subcommand, then at
//! the top level; `-` and `_` are interchangeable:
//!
//! ```toml
//! seed = 7
//! [train]
//! epochs = 3
//! batch-size = 200
//! ```

use std::path::Path;

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;

#[derive(Debug, Default)]
pub struct Defaults {
    table: toml::Table,
}

impl Defaults {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let table: toml::Table =
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        Ok(Self { table })
    }

    fn lookup<'a>(table: &'a toml::Table, key: &str) -> Option<&'a toml::Value> {
        table
            .get(key)
            .or_else(|| table.get(&key.replace('-', "_")))
            .or_else(|| table.get(&key.replace('_', "-")))
    }

    pub fn get<T: DeserializeOwned>(&self, section: &str, key: &str) -> Result<Option<T>> {
        let scoped = self
            .table
            .get(section)
            .and_then(|v| v.as_table())
            .and_then(|t| Self::lookup(t, key));
        match scoped.or_else(|| Self::lookup(&self.table, key)) {
            None => Ok(None),
            Some(v) => v
                .clone()
                .try_into()
                .map(Some)
                .with_context(|| format!("config key {section}.{key}")),
        }
    }

    /// `flag`, else the config value, else `default`.
    pub fn pick<T: DeserializeOwned>(
        &self,
        flag: Option<T>,
        section: &str,
        key: &str,
        default: T,
    ) -> Result<T> {
        match flag {
            Some(v) => Ok(v),
            None => Ok(self.get(section, key)?.unwrap_or(default)),
        }
    }

    /// A switch is on if the flag is given or the config sets it.
    pub fn switch(&self, flag: bool, section: &str, key: &str) -> Result<bool> {
        Ok(flag || self.get::<bool>(section, key)?.unwrap_or(false))
    }
}

/// Seed from the flag, the config, `NLB_SEED`, or 0, in that order.
pub fn resolve_seed(flag: Option<u64>, defaults: &Defaults, section: &str) -> Result<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    if let Some(s) = defaults.get(section, "seed")? {
        return Ok(s);
    }
    match std::env::var("NLB_SEED") {
        Ok(v) => v
            .trim()
            .parse()
            .with_context(|| format!("NLB_SEED={v:?} is not an unsigned integer")),
        Err(_) => Ok(0),
    }
}
