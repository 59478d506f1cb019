use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AttributionMap, Method, MethodConfig, Target};
use crate::error::{Error, Result};

/// Metadata written next to a map's CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapSidecar {
    pub method: Method,
    pub target: Target,
    pub config: MethodConfig,
    /// Checksum of the classifier parameters the map was computed from.
    pub model_checksum: String,
    pub warning: Option<String>,
}

/// One row per channel, one column per time step.
pub fn write_map_csv(map: &AttributionMap, path: &Path) -> Result<()> {
    let t = *map.values.shape().last().expect("maps are (C, T)");
    let mut text = String::new();
    for row in map.values.data().chunks(t) {
        let cells: Vec<String> = row.iter().map(f64::to_string).collect();
        writeln!(text, "{}", cells.join(",")).expect("writing to a String");
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes `path` (CSV) and the sidecar at `path` with a `json` extension.
pub fn write_map(
    map: &AttributionMap,
    cfg: &MethodConfig,
    model_checksum: &str,
    path: &Path,
) -> Result<()> {
    write_map_csv(map, path)?;
    let sidecar = MapSidecar {
        method: map.method,
        target: map.target,
        config: cfg.clone(),
        model_checksum: model_checksum.to_string(),
        warning: map.warning.clone(),
    };
    let json_path = path.with_extension("json");
    fs::write(&json_path, serde_json::to_string_pretty(&sidecar)?)
        .map_err(|e| Error::io(&json_path, e))
}
