//! Flat `key = value` configuration files.
//!
//! One entry per line; blank lines and lines starting with `#` are
//! ignored. Later layers override earlier ones key by key, which gives the
//! command-line > file > default precedence used by the CLI.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct KvConfig {
    entries: BTreeMap<String, String>,
}

impl KvConfig {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut out = Self::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {}: expected key = value", lineno + 1)))?;
            let key = normalize_key(k);
            if key.is_empty() {
                return Err(Error::Parse(format!("line {}: empty key", lineno + 1)));
            }
            out.entries.insert(key, v.trim().to_string());
        }
        Ok(out)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Keys are case-insensitive and `-` is treated as `_`.
    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(normalize_key(key), value.to_string());
    }

    /// Entries of `overlay` replace those of `self`.
    pub fn merged(mut self, overlay: &KvConfig) -> Self {
        for (k, v) in &overlay.entries {
            self.entries.insert(k.clone(), v.clone());
        }
        self
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(&normalize_key(key))
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(&normalize_key(key)).map(String::as_str)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn get<V: FromStr>(&self, key: &str) -> Result<Option<V>> {
        self.raw(key).map(|v| parse_value(key, v)).transpose()
    }

    pub fn get_or<V: FromStr>(&self, key: &str, default: V) -> Result<V> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    /// Comma-separated list; `x` is accepted as a separator too so that
    /// shapes can be written as `30x30x30`.
    pub fn get_list<V: FromStr>(&self, key: &str) -> Result<Option<Vec<V>>> {
        self.raw(key).map(|v| parse_list(key, v)).transpose()
    }
}

impl fmt::Display for KvConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.entries {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}

fn normalize_key(k: &str) -> String {
    k.trim().to_ascii_lowercase().replace('-', "_")
}

fn parse_value<V: FromStr>(key: &str, v: &str) -> Result<V> {
    v.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("bad value {v:?} for {key}")))
}

pub fn parse_list<V: FromStr>(key: &str, v: &str) -> Result<Vec<V>> {
    let items: Vec<&str> = v
        .split([',', 'x'])
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect();
    if items.is_empty() {
        return Err(Error::Parse(format!("empty list for {key}")));
    }
    items.into_iter().map(|s| parse_value(key, s)).collect()
}
