//! Flag/config resolution and the run manifest.

use std::collections::BTreeSet;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use aasampling::io::Metadata;
use anyhow::{anyhow, bail, Result};

/// Resolves each parameter from its flag, then the `--config` file, then a
/// default, recording the result for the manifest.
pub struct Params {
    config: Metadata,
    used: BTreeSet<String>,
    resolved: Metadata,
}

fn normalize(key: &str) -> String {
    key.trim().replace('_', "-")
}

impl Params {
    pub fn load(command: &str, config: Option<&Path>) -> Result<Self> {
        let mut file = Metadata::new();
        if let Some(path) = config {
            for (k, v) in Metadata::read(path)?.entries() {
                file.set(&normalize(k), v);
            }
        }
        let mut resolved = Metadata::new();
        resolved.set("command", command);
        resolved.set("version", env!("CARGO_PKG_VERSION"));
        Ok(Self {
            config: file,
            used: BTreeSet::new(),
            resolved,
        })
    }

    pub fn get<T>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        self.used.insert(key.to_string());
        let value = match flag {
            Some(v) => Some(v),
            None => match self.config.get(key) {
                Some(text) => Some(
                    text.parse::<T>()
                        .map_err(|e| anyhow!("invalid value '{text}' for {key} in config: {e}"))?,
                ),
                None => None,
            },
        };
        if let Some(v) = &value {
            self.resolved.set(key, v);
        }
        Ok(value)
    }

    pub fn value<T>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let v = self.get(key, flag)?.unwrap_or(default);
        self.resolved.set(key, &v);
        Ok(v)
    }

    pub fn required<T>(&mut self, key: &str, flag: Option<T>) -> Result<T>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        self.get(key, flag)?
            .ok_or_else(|| anyhow!("missing required --{key} (flag or config entry)"))
    }

    /// Records a derived value that has no flag.
    pub fn note(&mut self, key: &str, value: impl Display) {
        self.resolved.set(key, value);
    }

    /// Rejects config entries the command does not understand.
    pub fn finish(&self) -> Result<()> {
        let unknown: Vec<&str> = self
            .config
            .entries()
            .iter()
            .map(|(k, _)| k.as_str())
            .filter(|k| !self.used.contains(*k))
            .collect();
        if !unknown.is_empty() {
            bail!("unknown config keys for this command: {}", unknown.join(", "));
        }
        Ok(())
    }

    pub fn write_manifest(&mut self, dir: &Path, outputs: &[String]) -> Result<()> {
        self.resolved.set("outputs", outputs.join(", "));
        self.resolved.write(&dir.join("manifest.txt"))?;
        Ok(())
    }
}

/// Peak bound: a number or `inf`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bound(pub Option<f64>);

impl FromStr for Bound {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "none" => Ok(Bound(None)),
            t => t
                .parse::<f64>()
                .map(|v| Bound(if v.is_infinite() { None } else { Some(v) }))
                .map_err(|e| format!("expected a number or 'inf': {e}")),
        }
    }
}

impl Display for Bound {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.0 {
            Some(v) => write!(f, "{v}"),
            None => write!(f, "inf"),
        }
    }
}

/// Inclusive range `start:stop:step`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Range {
    pub fn values(&self) -> Vec<f64> {
        let count = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        (0..count)
            .map(|i| ((self.start + i as f64 * self.step) * 1e9).round() / 1e9)
            .collect()
    }
}

impl FromStr for Range {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let [a, b, c] = parts.as_slice() else {
            return Err("expected start:stop:step".into());
        };
        let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("'{t}': {e}"));
        let r = Range {
            start: num(a)?,
            stop: num(b)?,
            step: num(c)?,
        };
        if !(r.step > 0.0) || !(r.stop >= r.start) || !r.start.is_finite() || !r.stop.is_finite() {
            return Err("need start <= stop and a positive step".into());
        }
        Ok(r)
    }
}

impl Display for Range {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}:{}", self.start, self.stop, self.step)
    }
}
