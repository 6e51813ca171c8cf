//! Line-oriented `key = value` configuration files. Command-line flags
//! always override file values; unknown and mistyped keys are rejected with
//! the offending key named.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::corpus::read_utf8;
use crate::error::{Error, Result};

#[derive(Debug, Default)]
pub struct FileConfig {
    values: BTreeMap<String, String>,
}

impl FileConfig {
    pub fn empty() -> Self {
        FileConfig::default()
    }

    /// Parses a config file. Blank lines and `#` comments are allowed;
    /// duplicate keys are an error.
    pub fn load(path: &Path) -> Result<Self> {
        let text = read_utf8(path)?;
        let mut values = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (key, value) = trimmed.split_once('=').ok_or_else(|| {
                Error::parse(
                    path,
                    line_no,
                    format!("expected 'key = value', got '{trimmed}'"),
                )
            })?;
            let key = key.trim().to_string();
            if key.is_empty() {
                return Err(Error::parse(path, line_no, "empty key"));
            }
            let value = value.trim().to_string();
            if values.insert(key.clone(), value).is_some() {
                return Err(Error::parse(
                    path,
                    line_no,
                    format!("duplicate key '{key}'"),
                ));
            }
        }
        Ok(FileConfig { values })
    }

    /// Rejects keys that the active command does not accept.
    pub fn ensure_known(&self, command: &str, known: &[&str]) -> Result<()> {
        for key in self.values.keys() {
            if !known.contains(&key.as_str()) {
                return Err(Error::input(format!(
                    "unknown config key '{key}' for command '{command}'"
                )));
            }
        }
        Ok(())
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn typed<T: FromStr>(&self, key: &str, what: &str) -> Result<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse::<T>()
                .map(Some)
                .map_err(|_| Error::input(format!("config key '{key}': invalid {what} '{raw}'"))),
        }
    }

    pub fn u64(&self, key: &str, cli: Option<u64>, default: Option<u64>) -> Result<u64> {
        cli.map(Ok)
            .or_else(|| self.typed::<u64>(key, "integer").transpose())
            .or(default.map(Ok))
            .unwrap_or_else(|| Err(missing(key)))
    }

    pub fn usize(&self, key: &str, cli: Option<usize>, default: Option<usize>) -> Result<usize> {
        cli.map(Ok)
            .or_else(|| self.typed::<usize>(key, "integer").transpose())
            .or(default.map(Ok))
            .unwrap_or_else(|| Err(missing(key)))
    }

    pub fn f64(&self, key: &str, cli: Option<f64>, default: Option<f64>) -> Result<f64> {
        cli.map(Ok)
            .or_else(|| self.typed::<f64>(key, "number").transpose())
            .or(default.map(Ok))
            .unwrap_or_else(|| Err(missing(key)))
    }

    /// For enum-like values whose `FromStr` already produces a crate error.
    pub fn parse<T>(&self, key: &str, cli: Option<T>, default: Option<T>) -> Result<T>
    where
        T: FromStr<Err = Error>,
    {
        if let Some(v) = cli {
            return Ok(v);
        }
        if let Some(raw) = self.raw(key) {
            return raw
                .parse::<T>()
                .map_err(|e| Error::input(format!("config key '{key}': {e}")));
        }
        default.ok_or_else(|| missing(key))
    }

    pub fn string(&self, key: &str, cli: Option<String>, default: Option<&str>) -> Result<String> {
        cli.or_else(|| self.raw(key).map(str::to_string))
            .or_else(|| default.map(str::to_string))
            .ok_or_else(|| missing(key))
    }

    pub fn path(&self, key: &str, cli: Option<PathBuf>) -> Result<PathBuf> {
        self.path_opt(key, cli).ok_or_else(|| missing(key))
    }

    pub fn path_opt(&self, key: &str, cli: Option<PathBuf>) -> Option<PathBuf> {
        cli.or_else(|| self.raw(key).map(PathBuf::from))
    }

    /// A flag set on the command line wins; otherwise the file value must be
    /// `true` or `false`.
    pub fn flag(&self, key: &str, cli: bool) -> Result<bool> {
        if cli {
            return Ok(true);
        }
        match self.raw(key) {
            None => Ok(false),
            Some("true") => Ok(true),
            Some("false") => Ok(false),
            Some(other) => Err(Error::input(format!(
                "config key '{key}': invalid boolean '{other}'"
            ))),
        }
    }
}

fn missing(key: &str) -> Error {
    Error::input(format!(
        "missing required parameter '{key}' (pass --{key} or set it in the config file)"
    ))
}
