//! Run configuration: a JSON document with optional `device`, `out`, `seed`
//! and a command-specific `params` block. Command-line flags override the
//! file, and the file overrides built-in defaults.

use std::path::{Path, PathBuf};

use serde::de::{self, DeserializeOwned, Deserializer};
use serde::{Deserialize, Serialize, Serializer};
use sfq_core::qdevice::{DeviceFile, DeviceRecord};

use crate::failure::{Failure, Outcome};

pub const BUNDLED_DEVICE: &str = include_str!("../data/table_s1.toml");
pub const BUNDLED_SCENARIOS: &str = include_str!("../data/table1_scenarios.toml");

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunFile {
    #[serde(default)]
    pub command: Option<String>,
    #[serde(default)]
    pub device: Option<PathBuf>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub params: serde_json::Value,
}

impl RunFile {
    pub fn load(path: &Path) -> Outcome<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Failure::config(format!("config {}: {e}", path.display())))
    }

    pub fn params<T: DeserializeOwned + Default>(&self) -> Outcome<T> {
        if self.params.is_null() {
            return Ok(T::default());
        }
        serde_json::from_value(self.params.clone()).map_err(|e| Failure::config(format!("params: {e}")))
    }
}

/// Device file and where it came from.
pub struct Device {
    pub file: DeviceFile,
    pub source: String,
}

impl Device {
    pub fn load(path: Option<&Path>) -> Outcome<Self> {
        match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Failure::config(format!("cannot read device file {}: {e}", p.display())))?;
                let file = DeviceFile::parse(&text).map_err(|e| Failure::config(format!("{}: {e}", p.display())))?;
                Ok(Self {
                    file,
                    source: p.display().to_string(),
                })
            }
            None => Ok(Self {
                file: DeviceFile::parse(BUNDLED_DEVICE)?,
                source: "bundled:table_s1.toml".into(),
            }),
        }
    }

    pub fn qubit(&self, name: Option<&str>) -> Outcome<&DeviceRecord> {
        match name {
            None => Ok(&self.file.qubit[0]),
            Some(n) => self
                .file
                .get(n)
                .ok_or_else(|| Failure::config(format!("device has no qubit named {n:?}"))),
        }
    }
}

/// A coherence time in µs that may be infinite, written as a number or
/// the string "inf".
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coherence(pub f64);

impl Serialize for Coherence {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Coherence {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        let v = match Raw::deserialize(d)? {
            Raw::Num(x) => x,
            Raw::Text(s) if matches!(s.as_str(), "inf" | "infinity" | "Infinity") => f64::INFINITY,
            Raw::Text(s) => return Err(de::Error::custom(format!("invalid coherence time {s:?}"))),
        };
        if !(v > 0.0) {
            return Err(de::Error::custom(format!("coherence time must be positive, got {v}")));
        }
        Ok(Coherence(v))
    }
}

pub fn coherence_values(list: &[Coherence]) -> Vec<f64> {
    list.iter().map(|c| c.0).collect()
}
