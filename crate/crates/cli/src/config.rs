use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage error: {0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] ricci_forge::Error),
    #[error("cannot access {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

pub fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Parses flat `key = value` text. Blank lines and `#` comments are skipped;
/// underscores in keys read as dashes.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| usage(format!("config line {}: expected key=value, got '{line}'", n + 1)))?;
        let key = k.trim().replace('_', "-");
        if key.is_empty() {
            return Err(usage(format!("config line {}: empty key", n + 1)));
        }
        if out.insert(key.clone(), v.trim().to_string()).is_some() {
            return Err(usage(format!("config line {}: duplicate key '{key}'", n + 1)));
        }
    }
    Ok(out)
}

/// Resolved settings of one subcommand: defaults, then the config file, then flags.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub command: String,
    values: BTreeMap<String, String>,
}

impl Settings {
    pub fn resolve(
        command: &str,
        defaults: &[(&str, &str)],
        file: BTreeMap<String, String>,
        flags: Vec<(&str, Option<String>)>,
    ) -> Result<Self> {
        let mut values: BTreeMap<String, String> =
            defaults.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        for (k, v) in file {
            if k == "command" {
                if v != command {
                    return Err(usage(format!("config file is for '{v}', not '{command}'")));
                }
                continue;
            }
            match values.get_mut(&k) {
                Some(slot) => *slot = v,
                None => return Err(usage(format!("unknown config key '{k}' for {command}"))),
            }
        }
        for (k, v) in flags {
            if let Some(v) = v {
                values.insert(k.to_string(), v);
            }
        }
        Ok(Self { command: command.to_string(), values })
    }

    pub fn raw(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or("")
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: Display,
    {
        let v = self.raw(key);
        if v.is_empty() {
            return Err(usage(format!("missing value for --{key}")));
        }
        v.parse().map_err(|e| usage(format!("invalid value for --{key} '{v}': {e}")))
    }

    /// `None` for an empty value.
    pub fn get_opt<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        if self.raw(key).is_empty() {
            Ok(None)
        } else {
            self.get(key).map(Some)
        }
    }

    pub fn values(&self) -> &BTreeMap<String, String> {
        &self.values
    }

    /// The settings as a config file that reproduces this run.
    pub fn to_config_text(&self) -> String {
        let mut s = format!("command = {}\n", self.command);
        for (k, v) in &self.values {
            s.push_str(&format!("{k} = {v}\n"));
        }
        s
    }
}

/// `a:b` as a pair of numbers.
pub fn parse_pair(key: &str, text: &str) -> Result<(f64, f64)> {
    let parts: Vec<&str> = text.split(':').collect();
    let bad = || usage(format!("--{key} must be lo:hi, got '{text}'"));
    if parts.len() != 2 {
        return Err(bad());
    }
    let lo = parts[0].trim().parse::<f64>().map_err(|_| bad())?;
    let hi = parts[1].trim().parse::<f64>().map_err(|_| bad())?;
    Ok((lo, hi))
}

/// Comma-separated list.
pub fn parse_list<T: FromStr>(key: &str, text: &str) -> Result<Vec<T>>
where
    T::Err: Display,
{
    text.split(',')
        .map(|s| s.trim().parse().map_err(|e| usage(format!("invalid entry '{s}' in --{key}: {e}"))))
        .collect()
}
