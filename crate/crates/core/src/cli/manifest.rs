use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct InputFile {
    pub path: String,
    pub sha256: String,
}

/// Record of one command invocation, written to `manifest.json` under the
/// output directory whether or not the command succeeded.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    /// Resolved configuration sections.
    pub config: BTreeMap<String, Value>,
    pub seeds: BTreeMap<String, u64>,
    pub inputs: Vec<InputFile>,
    /// Produced files, relative to the output directory.
    pub outputs: Vec<String>,
    /// Headline numbers of the run.
    pub summary: BTreeMap<String, Value>,
    pub wall_time_secs: f64,
    pub exit_code: i32,
    pub error: Option<String>,
}

impl RunManifest {
    pub fn record_config<T: Serialize>(&mut self, section: &str, value: &T) -> Result<()> {
        self.config
            .insert(section.to_string(), serde_json::to_value(value)?);
        Ok(())
    }

    pub fn record_input(&mut self, path: &Path) -> Result<()> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        self.inputs.push(InputFile {
            path: path.display().to_string(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        });
        Ok(())
    }

    pub fn summarize<T: Serialize>(&mut self, key: &str, value: T) {
        self.summary.insert(
            key.to_string(),
            serde_json::to_value(value).expect("summary values serialize"),
        );
    }
}

/// Hands out paths under the output directory and remembers each one.
pub struct Outputs {
    root: PathBuf,
    pub files: Vec<String>,
}

impl Outputs {
    pub fn new(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
        Ok(Outputs {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.root.join(name)
    }

    /// Path of a checkpoint manifest; its tensor blob is recorded as well.
    pub fn checkpoint(&mut self, stem: &str) -> PathBuf {
        self.files.push(format!("{stem}.bin"));
        self.path(&format!("{stem}.json"))
    }
}
