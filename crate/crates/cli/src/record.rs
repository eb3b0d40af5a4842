//! Output files and the run record written beside them.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::params::{Failure, Outcome};

pub const RUN_RECORD: &str = "run_record.json";

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn io_err(path: &Path, e: std::io::Error) -> Failure {
    Failure::Input(format!("{}: {e}", path.display()))
}

/// SHA-256 of a file, or of the sorted `name:digest` lines of a directory.
pub fn hash_path(path: &Path) -> Outcome<String> {
    if path.is_dir() {
        let mut lines = String::new();
        for (name, p) in sorted_entries(path)? {
            lines.push_str(&format!("{name}:{}\n", hash_path(&p)?));
        }
        Ok(sha256_hex(lines.as_bytes()))
    } else {
        Ok(sha256_hex(&fs::read(path).map_err(|e| io_err(path, e))?))
    }
}

/// Directory entries by file name.
pub fn sorted_entries(dir: &Path) -> Outcome<Vec<(String, PathBuf)>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| io_err(dir, e))? {
        let entry = entry.map_err(|e| io_err(dir, e))?;
        out.push((entry.file_name().to_string_lossy().into_owned(), entry.path()));
    }
    out.sort();
    Ok(out)
}

#[derive(Serialize)]
struct RunRecord<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    config: &'a BTreeMap<String, String>,
    config_hash: String,
    inputs: &'a BTreeMap<String, String>,
    outputs: BTreeMap<String, String>,
}

/// Collects outputs of one run under `dir` and the digests of its inputs.
pub struct Run {
    pub dir: PathBuf,
    inputs: BTreeMap<String, String>,
    outputs: Vec<String>,
}

impl Run {
    pub fn new(dir: PathBuf) -> Outcome<Self> {
        fs::create_dir_all(&dir).map_err(|e| Failure::Input(format!("{}: {e}", dir.display())))?;
        Ok(Run { dir, inputs: BTreeMap::new(), outputs: Vec::new() })
    }

    pub fn input(&mut self, key: &str, path: &Path) -> Outcome<()> {
        if !path.exists() {
            return Err(Failure::Input(format!("{key}: {} does not exist", path.display())));
        }
        self.inputs.insert(key.to_string(), hash_path(path)?);
        Ok(())
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Outcome<()> {
        let path = self.path(name);
        fs::write(&path, bytes).map_err(|e| io_err(&path, e))?;
        self.produced(name);
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Outcome<()> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Failure::Validation(e.to_string()))?;
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    /// Registers a file or directory written by other means.
    pub fn produced(&mut self, name: &str) {
        if !self.outputs.iter().any(|o| o == name) {
            self.outputs.push(name.to_string());
        }
    }

    /// Writes `run_record.json`. The config hash covers the effective
    /// key=value pairs, one per line in key order.
    pub fn finish(self, command: &str, config: &BTreeMap<String, String>) -> Outcome<()> {
        let canonical: String = config.iter().map(|(k, v)| format!("{k}={v}\n")).collect();
        let mut outputs = BTreeMap::new();
        for name in &self.outputs {
            outputs.insert(name.clone(), hash_path(&self.dir.join(name))?);
        }
        let record = RunRecord {
            tool: "docforge",
            version: env!("CARGO_PKG_VERSION"),
            command,
            config,
            config_hash: sha256_hex(canonical.as_bytes()),
            inputs: &self.inputs,
            outputs,
        };
        let mut bytes = serde_json::to_vec_pretty(&record).map_err(|e| Failure::Validation(e.to_string()))?;
        bytes.push(b'\n');
        let path = self.dir.join(RUN_RECORD);
        fs::write(&path, bytes).map_err(|e| io_err(&path, e))
    }
}
