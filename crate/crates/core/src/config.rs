//! `key = value` configuration files whose keys mirror the long CLI flags.
//!
//! Blank lines and lines starting with `#` are ignored; keys may be written
//! with `-` or `_`. Command-line flags take precedence over file values.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::error::{PlrError, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValueConfig {
    entries: BTreeMap<String, String>,
}

fn normalise(key: &str) -> String {
    key.trim().replace('_', "-")
}

impl KeyValueConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| PlrError::Config(format!("line {}: expected key = value", lineno + 1)))?;
            let key = normalise(k);
            if key.is_empty() {
                return Err(PlrError::Config(format!("line {}: empty key", lineno + 1)));
            }
            if entries.insert(key.clone(), v.trim().to_string()).is_some() {
                return Err(PlrError::Config(format!("line {}: duplicate key '{key}'", lineno + 1)));
            }
        }
        Ok(KeyValueConfig { entries })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(&normalise(key)).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<T>()
                .map(Some)
                .map_err(|_| PlrError::Config(format!("cannot parse value '{v}' for key '{key}'"))),
        }
    }

    /// `cli` if given, else the file value.
    pub fn merge<T: FromStr>(&self, cli: Option<T>, key: &str) -> Result<Option<T>> {
        match cli {
            Some(v) => Ok(Some(v)),
            None => self.get(key),
        }
    }

    /// Booleans accept `true/false/1/0/yes/no`.
    pub fn flag(&self, cli: bool, key: &str) -> Result<bool> {
        if cli {
            return Ok(true);
        }
        match self.raw(key) {
            None => Ok(false),
            Some("true" | "1" | "yes") => Ok(true),
            Some("false" | "0" | "no") => Ok(false),
            Some(v) => Err(PlrError::Config(format!("'{v}' is not a boolean for key '{key}'"))),
        }
    }

    /// Errors on any key outside `allowed`.
    pub fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        match self.entries.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => Err(PlrError::Config(format!("unknown configuration key '{k}'"))),
            None => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_merges() {
        let c = KeyValueConfig::parse("# study\nsetting = 3\nn=100,200\nmax_iter = 50\nsequential = yes\n").unwrap();
        assert_eq!(c.get::<u8>("setting").unwrap(), Some(3));
        assert_eq!(c.raw("n"), Some("100,200"));
        assert_eq!(c.get::<usize>("max-iter").unwrap(), Some(50));
        assert_eq!(c.merge(Some(2u8), "setting").unwrap(), Some(2));
        assert!(c.flag(false, "sequential").unwrap());
        assert!(c.check_keys(&["setting", "n", "max-iter", "sequential"]).is_ok());
        assert!(c.check_keys(&["setting"]).is_err());
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(KeyValueConfig::parse("novalue\n").is_err());
        assert!(KeyValueConfig::parse("a=1\na=2\n").is_err());
        let c = KeyValueConfig::parse("reps = many").unwrap();
        assert!(c.get::<usize>("reps").is_err());
    }
}
