//! Plain `key = value` configuration files.
//!
//! Blank lines and lines starting with `#` are ignored. Keys are flag names
//! without the leading dashes (`population-size = 50`); underscores are
//! accepted in place of dashes.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConfigFile {
    entries: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Input(format!("config line {}: expected key = value", i + 1)));
            };
            let key = key.trim().replace('_', "-");
            if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '-') {
                return Err(Error::Input(format!("config line {}: invalid key {:?}", i + 1, key)));
            }
            let value = value.trim().to_string();
            if entries.insert(key.clone(), value).is_some() {
                return Err(Error::Input(format!("config line {}: duplicate key {key:?}", i + 1)));
            }
        }
        Ok(Self { entries })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Input(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn get_str(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    /// Parses the value under `key`, if present.
    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.entries
            .get(key)
            .map(|v| v.parse::<T>().map_err(|e| Error::Input(format!("config key {key}: {e}"))))
            .transpose()
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Fails on any key outside `known`, so typos are not silently ignored.
    pub fn check_keys(&self, known: &[&str]) -> Result<()> {
        match self.keys().find(|k| !known.contains(k)) {
            Some(k) => Err(Error::Input(format!("unknown config key {k:?}"))),
            None => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_underscores() {
        let c = ConfigFile::parse("# defaults\n\nseed = 7\npopulation_size=50\n  model = builtin:demo \n").unwrap();
        assert_eq!(c.get::<u64>("seed").unwrap(), Some(7));
        assert_eq!(c.get::<usize>("population-size").unwrap(), Some(50));
        assert_eq!(c.get_str("model"), Some("builtin:demo"));
        assert_eq!(c.get::<u64>("missing").unwrap(), None);
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(ConfigFile::parse("seed 7").is_err());
        assert!(ConfigFile::parse("= 7").is_err());
        assert!(ConfigFile::parse("seed = 1\nseed = 2").is_err());
        assert!(ConfigFile::parse("se ed = 1").is_err());
        let c = ConfigFile::parse("seed = x").unwrap();
        assert!(c.get::<u64>("seed").is_err());
        assert!(c.check_keys(&["model"]).is_err());
        assert!(c.check_keys(&["seed"]).is_ok());
    }
}
