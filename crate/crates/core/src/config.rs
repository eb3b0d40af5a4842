//! Flat `key=value` configuration files.

use std::collections::BTreeMap;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Parses `key=value` lines. Blank lines and lines starting with `#` are
/// skipped; keys and values are trimmed; a repeated key is an error.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Format {
            what: "config",
            msg: format!("line {}: expected key=value", i + 1),
        })?;
        let k = k.trim();
        if k.is_empty() {
            return Err(Error::Format {
                what: "config",
                msg: format!("line {}: empty key", i + 1),
            });
        }
        if out.insert(k.to_string(), v.trim().to_string()).is_some() {
            return Err(Error::Format {
                what: "config",
                msg: format!("line {}: duplicate key {k:?}", i + 1),
            });
        }
    }
    Ok(out)
}

/// Parses `map[key]` into `slot` when present.
pub fn set_from<T: FromStr>(map: &BTreeMap<String, String>, key: &str, slot: &mut T) -> Result<()>
where
    T::Err: std::fmt::Display,
{
    if let Some(v) = map.get(key) {
        *slot = v.parse().map_err(|e| Error::Format {
            what: "config",
            msg: format!("{key}={v}: {e}"),
        })?;
    }
    Ok(())
}
