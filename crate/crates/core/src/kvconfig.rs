//! Flat `key = value` configuration files with `#` comments.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Parsed entries with the line each key came from.
#[derive(Clone, Debug, Default)]
pub struct KvConfig {
    entries: BTreeMap<String, (usize, String)>,
    source: String,
}

impl KvConfig {
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::Config(format!("{source}:{}: expected `key = value`", i + 1)));
            };
            let key = k.trim().to_owned();
            if entries.insert(key.clone(), (i + 1, v.trim().to_owned())).is_some() {
                return Err(Error::Config(format!("{source}:{}: duplicate key `{key}`", i + 1)));
            }
        }
        Ok(KvConfig {
            entries,
            source: source.to_owned(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Fails on the first key not in `known`.
    pub fn reject_unknown(&self, known: &[&str]) -> Result<()> {
        match self.entries.iter().find(|(k, _)| !known.contains(&k.as_str())) {
            Some((k, (line, _))) => Err(Error::Config(format!("{}:{line}: unknown key `{k}`", self.source))),
            None => Ok(()),
        }
    }

    /// Overwrites `slot` when `key` is present.
    pub fn set<T: FromStr>(&self, key: &str, slot: &mut T) -> Result<()>
    where
        T::Err: std::fmt::Display,
    {
        if let Some((line, v)) = self.entries.get(key) {
            *slot = v
                .parse()
                .map_err(|e| Error::Config(format!("{}:{line}: bad value for `{key}`: {e}", self.source)))?;
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(_, v)| v.as_str())
    }
}
