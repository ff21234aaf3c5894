//! Flat `key = value` configuration files.

use std::collections::BTreeMap;
use std::path::Path;

use crate::CliError;

/// Keys accepted in configuration files; each mirrors the global flag of
/// the same name with `-` replaced by `_`.
pub const KEYS: &[&str] = &[
    "seed",
    "threads",
    "format",
    "p_plus",
    "p_minus",
    "p_zero",
    "q",
    "beta",
    "lambda_plus",
    "lambda_minus",
    "a",
    "eps",
    "r",
    "m_max",
    "samples",
];

/// Parsed file: key to (line, raw value).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    pub entries: BTreeMap<String, (usize, String)>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (k, v) = content.split_once('=').ok_or_else(|| CliError::Config {
                line,
                msg: format!("expected `key = value`, got {content:?}"),
            })?;
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.contains(&k) {
                return Err(CliError::Config {
                    line,
                    msg: format!("unknown key {k:?}"),
                });
            }
            if v.is_empty() {
                return Err(CliError::Config {
                    line,
                    msg: format!("missing value for {k:?}"),
                });
            }
            if entries.insert(k.to_string(), (line, v.to_string())).is_some() {
                return Err(CliError::Config {
                    line,
                    msg: format!("duplicate key {k:?}"),
                });
            }
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Typed value of `key`, if present.
    pub fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        match self.entries.get(key) {
            None => Ok(None),
            Some((line, v)) => v.parse().map(Some).map_err(|_| CliError::Config {
                line: *line,
                msg: format!("bad value {v:?} for {key:?}"),
            }),
        }
    }
}

/// Loads and parses a configuration file.
pub fn load_config(path: &Path) -> Result<ConfigFile, CliError> {
    ConfigFile::load(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comments_and_blank_lines() {
        let c = ConfigFile::parse("# header\n\np_plus = 0.3  # trailing\nseed=4\n").unwrap();
        assert_eq!(c.get::<f64>("p_plus").unwrap(), Some(0.3));
        assert_eq!(c.get::<u64>("seed").unwrap(), Some(4));
        assert_eq!(c.get::<f64>("q").unwrap(), None);
    }

    #[test]
    fn errors_name_the_line() {
        match ConfigFile::parse("q = 0.2\nbogus = 1\n") {
            Err(CliError::Config { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(ConfigFile::parse("q 0.2").is_err());
        match ConfigFile::parse("q = x").unwrap().get::<f64>("q") {
            Err(CliError::Config { line, .. }) => assert_eq!(line, 1),
            other => panic!("{other:?}"),
        }
    }
}
