//! Command implementations. Every command resolves its parameters the same
//! way: built-in defaults, overridden by a `--config key=value` file,
//! overridden by explicit flags; and every stochastic command takes a seed,
//! so identical invocations produce identical output bytes.

pub mod ablate;
pub mod bench;
pub mod demo;
pub mod fit;
pub mod hypergraph;
pub mod verify;

use crate::{CmdError, CmdResult};
use hyperneck_core::io::parse_kv_text;
use std::collections::HashMap;
use std::path::Path;
use std::str::FromStr;

/// Key=value parameters loaded from an optional config file, with the set
/// of keys the command accepts.
pub struct Params {
    map: HashMap<String, String>,
}

impl Params {
    pub fn from_config(path: Option<&Path>, allowed: &[&str]) -> CmdResult<Self> {
        let mut map = HashMap::new();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CmdError::BadInput(format!("cannot read config {}: {e}", path.display()))
            })?;
            for (key, value) in parse_kv_text(&text)? {
                if !allowed.contains(&key.as_str()) {
                    return Err(CmdError::BadInput(format!(
                        "config key '{key}' is not valid here (expected one of: {})",
                        allowed.join(", ")
                    )));
                }
                map.insert(key, value);
            }
        }
        Ok(Self { map })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(String::as_str)
    }

    /// Flag beats config file beats default.
    pub fn resolve<T: FromStr + Clone>(
        &self,
        key: &str,
        flag: &Option<T>,
        default: T,
    ) -> CmdResult<T> {
        if let Some(value) = flag {
            return Ok(value.clone());
        }
        match self.map.get(key) {
            Some(raw) => raw
                .parse::<T>()
                .map_err(|_| CmdError::BadInput(format!("bad value for {key}: {raw}"))),
            None => Ok(default),
        }
    }
}

/// Formats a float for reports: fixed six decimals, stable across runs.
pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:.6}")
}

/// Mean, standard deviation, min and max of a slice, accumulated in f64.
pub(crate) fn slice_stats(data: &[f32]) -> (f64, f64, f32, f32) {
    let n = data.len() as f64;
    let mut sum = 0.0f64;
    let mut min = f32::INFINITY;
    let mut max = f32::NEG_INFINITY;
    for &v in data {
        sum += v as f64;
        min = min.min(v);
        max = max.max(v);
    }
    let mean = sum / n;
    let mut var = 0.0f64;
    for &v in data {
        let d = v as f64 - mean;
        var += d * d;
    }
    (mean, (var / n).sqrt(), min, max)
}
