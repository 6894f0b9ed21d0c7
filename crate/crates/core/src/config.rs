//! Layered configuration: a TOML or JSON file deep-merged over defaults.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use crate::detector::DetectorConfig;
use crate::error::{Error, Result};
use crate::sensor::SensorModel;

/// Recursively overlays `over` onto `base`. Objects merge key by key; any
/// other value replaces what was there.
pub fn deep_merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => deep_merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Parses a config file as TOML, or as JSON when the extension is `.json`.
pub fn load_value(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |message: String| Error::Format {
        path: path.to_path_buf(),
        what: "config",
        message,
    };
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        serde_json::from_str(&text).map_err(|e| bad(e.to_string()))
    } else {
        let v: toml::Value = toml::from_str(&text).map_err(|e| bad(e.to_string()))?;
        serde_json::to_value(v).map_err(|e| bad(e.to_string()))
    }
}

/// `defaults` with `overrides` merged in, re-validated through `T`'s schema.
pub fn layered<T: Serialize + DeserializeOwned>(defaults: &T, overrides: Value) -> Result<T> {
    let mut v = serde_json::to_value(defaults).map_err(|e| Error::Config(e.to_string()))?;
    deep_merge(&mut v, overrides);
    serde_json::from_value(v).map_err(|e| Error::Config(e.to_string()))
}

/// Calibrated defaults for `sensor`, optionally overridden from a file.
pub fn detector_config(sensor: &SensorModel, path: Option<&Path>) -> Result<DetectorConfig> {
    let defaults = DetectorConfig::for_sensor(sensor);
    let cfg = match path {
        None => defaults,
        Some(p) => layered(&defaults, load_value(p)?).map_err(|e| Error::Format {
            path: p.to_path_buf(),
            what: "detector config",
            message: e.to_string(),
        })?,
    };
    cfg.validate()?;
    Ok(cfg)
}
