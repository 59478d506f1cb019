use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{Error, Result};

pub const SEED_ENV: &str = "TSINSIGHT_SEED";

/// Top-level tables a config file may contain.
pub const SECTIONS: [&str; 10] = [
    "synth",
    "classifier",
    "autoencoder",
    "classifier_training",
    "autoencoder_training",
    "finetune_training",
    "tsinsight",
    "method",
    "suppression",
    "spectrum",
];

/// Layers config values: flag over file over the seed environment variable
/// over built-in defaults.
pub struct Layers {
    file: Map<String, Value>,
    flag_seed: Option<u64>,
    env_seed: Option<u64>,
}

impl Layers {
    pub fn load(path: Option<&Path>, flag_seed: Option<u64>) -> Result<Self> {
        let file = match path {
            None => Map::new(),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                let value: Value = if p.extension().is_some_and(|e| e == "toml") {
                    serde_json::to_value(toml::from_str::<toml::Value>(&text)?)?
                } else {
                    serde_json::from_str(&text)?
                };
                match value {
                    Value::Object(map) => map,
                    _ => return Err(Error::config("config", "top level must be a table")),
                }
            }
        };
        if let Some(k) = file.keys().find(|k| !SECTIONS.contains(&k.as_str())) {
            return Err(Error::config(
                "config",
                format!(
                    "unknown section `{k}`; expected one of {}",
                    SECTIONS.join(", ")
                ),
            ));
        }
        let env_seed = match std::env::var(SEED_ENV) {
            Ok(v) => Some(v.trim().parse().map_err(|_| {
                Error::config("TSINSIGHT_SEED", format!("not an unsigned integer: `{v}`"))
            })?),
            Err(_) => None,
        };
        Ok(Layers {
            file,
            flag_seed,
            env_seed,
        })
    }

    /// The `--seed` flag, else the environment variable.
    pub fn global_seed(&self) -> Option<u64> {
        self.flag_seed.or(self.env_seed)
    }

    /// Resolves section `name` into `T`. `seed_key` names the field that
    /// takes the global seed; `flags` are applied last.
    pub fn section<T: Serialize + DeserializeOwned + Default>(
        &self,
        name: &str,
        seed_key: Option<&str>,
        flags: Vec<(&str, Option<Value>)>,
    ) -> Result<T> {
        let Value::Object(mut merged) = serde_json::to_value(T::default())? else {
            unreachable!("config sections serialize as tables");
        };
        let from_file = match self.file.get(name) {
            None => Map::new(),
            Some(Value::Object(m)) => m.clone(),
            Some(_) => {
                return Err(Error::config(
                    "config",
                    format!("section `{name}` must be a table"),
                ))
            }
        };
        if let Some(key) = seed_key {
            let seed = self.flag_seed.or(if from_file.contains_key(key) {
                None
            } else {
                self.env_seed
            });
            merged.extend(from_file);
            if let Some(s) = seed {
                merged.insert(key.to_string(), s.into());
            }
        } else {
            merged.extend(from_file);
        }
        for (key, value) in flags {
            if let Some(v) = value {
                merged.insert(key.to_string(), v);
            }
        }
        serde_json::from_value(Value::Object(merged))
            .map_err(|e| Error::config("config", format!("[{name}] {e}")))
    }
}

/// `Some(json)` for a set flag.
pub fn flag<T: Serialize>(v: Option<T>) -> Option<Value> {
    v.map(|v| serde_json::to_value(v).expect("flag values serialize"))
}
