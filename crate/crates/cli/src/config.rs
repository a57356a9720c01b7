//! Optional JSON configuration whose keys mirror the long flag names.
//! Values given on the command line win.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

/// Overlays the flags that were given in `cli` on the object in the JSON
/// file at `path`. Keys must be long flag names of `T` (without `--`).
pub fn merge<T>(cli: &T, path: Option<&Path>) -> Result<T>
where
    T: Serialize + DeserializeOwned + clap::Args + Clone,
{
    let Some(path) = path else {
        return Ok(cli.clone());
    };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let file: Value = serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
    merge_value(cli, file)
}

pub fn merge_value<T>(cli: &T, file: Value) -> Result<T>
where
    T: Serialize + DeserializeOwned + clap::Args,
{
    let Value::Object(file) = file else {
        bail!("config must be a JSON object");
    };
    let known = flag_names::<T>();
    for key in file.keys() {
        if key == "config" || !known.iter().any(|k| k == key) {
            bail!("unknown config key {key:?}; expected one of {}", known.join(", "));
        }
    }
    let mut merged: Map<String, Value> = file;
    if let Value::Object(given) = serde_json::to_value(cli)? {
        for (k, v) in given {
            if !v.is_null() {
                merged.insert(k, v);
            }
        }
    }
    serde_json::from_value(Value::Object(merged)).context("config values do not match the flag types")
}

fn flag_names<T: clap::Args>() -> Vec<String> {
    T::augment_args(clap::Command::new("config"))
        .get_arguments()
        .filter_map(|a| a.get_long().map(str::to_string))
        .collect()
}
