//! Flat `key = value` run configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

/// Bad or missing configuration; maps to exit code 3.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

type Result<T> = std::result::Result<T, ConfigError>;

/// The benchmark's explicit-polariton rows as `l_max:n_max:lambda`.
pub const TABLE_SCAN: &str = "1:2:0.005,1:8:0.005,1:19:0.005,2:2:0.005,2:4:0.005,2:8:0.005,2:19:0.005,\
4:38:0.005,1:2:0.4,4:8:0.4,4:38:0.4,19:38:0.4";

pub const DEFAULTS: &[(&str, &str)] = &[
    ("nx", "201"),
    ("ny", "201"),
    ("dx", "0.1"),
    ("xi1", "0.7827"),
    ("xi2", "17.70"),
    ("xi3", "0.997"),
    ("states", "3"),
    ("electronic_tol", "1e-10"),
    ("seed", "0"),
    ("lambda", "0.005"),
    ("polarization", "1,1"),
    ("omega", "resonant"),
    ("self_polarization", "true"),
    ("n_e", "1"),
    ("form", "both"),
    ("fock_states", "40"),
    ("coupled_states", "4"),
    ("coupled_tol", "1e-9"),
    ("memory_budget_gb", "4"),
    ("scan", TABLE_SCAN),
    ("density", "exact-ground"),
    ("density_form", "length"),
    ("density_reference", "bare"),
    ("density_spec", "1:2"),
    ("export_density", "false"),
    ("spp_n_e", "1"),
    ("spp_lambdas", "0.005"),
    ("spp_detunings", "0"),
    ("output_dir", "out"),
    ("cache_dir", "cache"),
];

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self { values: DEFAULTS.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect() }
    }
}

impl RunConfig {
    /// Defaults, then the file (if any), then `overrides` in order.
    pub fn load(file: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut c = Self::default();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
            c.apply_text(&text)?;
        }
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| ConfigError(format!("override `{o}` is not key=value")))?;
            c.set(k.trim(), v.trim())?;
        }
        Ok(c)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| ConfigError(format!("line {}: expected key = value", n + 1)))?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match self.values.get_mut(key) {
            Some(v) => {
                *v = value.to_string();
                Ok(())
            }
            None => Err(ConfigError(format!("unknown key `{key}`"))),
        }
    }

    pub fn values(&self) -> &BTreeMap<String, String> {
        &self.values
    }

    /// The fully resolved file, one key per line in sorted order.
    pub fn to_text(&self) -> String {
        self.values.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn str(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).expect("key has a default")
    }

    pub fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let v = self.str(key);
        v.parse().map_err(|_| ConfigError(format!("`{key}` = `{v}` is not a valid value")))
    }

    pub fn bool(&self, key: &str) -> Result<bool> {
        match self.str(key) {
            "true" | "yes" | "1" | "on" => Ok(true),
            "false" | "no" | "0" | "off" => Ok(false),
            v => Err(ConfigError(format!("`{key}` = `{v}` is not a boolean"))),
        }
    }

    pub fn list<T: std::str::FromStr>(&self, key: &str) -> Result<Vec<T>> {
        let v = self.str(key).trim();
        if v.is_empty() {
            return Ok(vec![]);
        }
        v.split(',')
            .map(|s| s.trim().parse().map_err(|_| ConfigError(format!("bad entry `{s}` in `{key}`"))))
            .collect()
    }

    pub fn vec2(&self, key: &str) -> Result<[f64; 2]> {
        let v: Vec<f64> = self.list(key)?;
        match v[..] {
            [a, b] => Ok([a, b]),
            _ => Err(ConfigError(format!("`{key}` needs two components"))),
        }
    }

    /// `scan` as `(l_max, n_max, lambda)` triples.
    pub fn scan_rows(&self) -> Result<Vec<(usize, usize, f64)>> {
        let v = self.str("scan").trim();
        if v.is_empty() {
            return Ok(vec![]);
        }
        v.split(',')
            .map(|row| {
                let parts: Vec<&str> = row.trim().split(':').collect();
                let bad = || ConfigError(format!("scan row `{row}` is not l_max:n_max:lambda"));
                if parts.len() != 3 {
                    return Err(bad());
                }
                Ok((
                    parts[0].parse().map_err(|_| bad())?,
                    parts[1].parse().map_err(|_| bad())?,
                    parts[2].parse().map_err(|_| bad())?,
                ))
            })
            .collect()
    }

    pub fn output_dir(&self) -> PathBuf {
        PathBuf::from(self.str("output_dir"))
    }

    pub fn cache_dir(&self) -> PathBuf {
        PathBuf::from(self.str("cache_dir"))
    }
}
