//! `key = value` run configurations with `#` comments.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::{CliError, CliResult};

/// Every key a run configuration may contain.
pub const KNOWN_KEYS: &[&str] = &[
    "dim",
    "n",
    "L",
    "T",
    "tau",
    "eps",
    "alpha",
    "beta",
    "f",
    "f-period",
    "u0",
    "image",
    "output-dir",
    "save-every",
    "tol-rel",
    "max-newton",
    "max-cg",
    "eps-levels",
    "eps-schedule",
    "tol-limit",
    "seed",
    "perturbation",
    "trace-samples",
    "trajectory",
];

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    entries: BTreeMap<String, String>,
    /// Relative paths in values resolve against this directory.
    base_dir: PathBuf,
}

impl RunConfig {
    pub fn parse(text: &str, base_dir: &Path) -> CliResult<Self> {
        let mut entries = BTreeMap::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected `key = value`", no + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if !KNOWN_KEYS.contains(&k) {
                return Err(CliError::Config(format!("line {}: unknown key `{k}`", no + 1)));
            }
            if v.is_empty() {
                return Err(CliError::Config(format!("line {}: key `{k}` has no value", no + 1)));
            }
            if entries.insert(k.to_string(), v.to_string()).is_some() {
                return Err(CliError::Config(format!("line {}: duplicate key `{k}`", no + 1)));
            }
        }
        Ok(RunConfig {
            entries,
            base_dir: base_dir.to_path_buf(),
        })
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn require(&self, key: &str) -> CliResult<&str> {
        self.get(key)
            .ok_or_else(|| CliError::Config(format!("missing required key `{key}`")))
    }

    pub fn parse_value<T: FromStr>(&self, key: &str) -> CliResult<Option<T>> {
        self.get(key)
            .map(|v| {
                v.parse()
                    .map_err(|_| CliError::Config(format!("key `{key}`: cannot parse `{v}`")))
            })
            .transpose()
    }

    pub fn required_value<T: FromStr>(&self, key: &str) -> CliResult<T> {
        self.require(key)?;
        Ok(self.parse_value(key)?.expect("present"))
    }

    pub fn list<T: FromStr>(&self, key: &str) -> CliResult<Option<Vec<T>>> {
        self.get(key)
            .map(|v| {
                v.split(',')
                    .map(|t| {
                        t.trim()
                            .parse()
                            .map_err(|_| CliError::Config(format!("key `{key}`: cannot parse `{t}`")))
                    })
                    .collect()
            })
            .transpose()
    }

    /// Replaces or inserts a value, as done by parameter sweeps.
    pub fn set(&mut self, key: &str, value: &str) -> CliResult<()> {
        if !KNOWN_KEYS.contains(&key) {
            return Err(CliError::Config(format!("unknown key `{key}`")));
        }
        self.entries.insert(key.to_string(), value.to_string());
        Ok(())
    }

    pub fn resolve(&self, value: &str) -> PathBuf {
        self.base_dir.join(value)
    }
}
