//! Run manifests and atomic artifact output.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use disslab::fields::io::write_atomic;
use disslab::ScalingFit;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const MANIFEST: &str = "manifest.json";
pub const TIMESTAMP: &str = "manifest.timestamp";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileRecord {
    pub path: String,
    pub bytes: u64,
    pub crc32: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

/// Everything a run consumed and produced. Contains no wall-clock data so
/// that identical runs give identical manifests.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub seed: Option<u64>,
    pub config: serde_json::Value,
    pub inputs: Vec<FileRecord>,
    pub artifacts: Vec<FileRecord>,
    pub fits: BTreeMap<String, ScalingFit>,
    pub values: BTreeMap<String, f64>,
    pub checks: Vec<Check>,
}

fn crc_hex(bytes: &[u8]) -> String {
    format!("{:08x}", crc32fast::hash(bytes))
}

/// Collects artifacts of one run in `dir`.
pub struct Run {
    pub dir: PathBuf,
    pub manifest: Manifest,
}

impl Run {
    pub fn new(dir: &Path, command: &str, seed: Option<u64>, config: serde_json::Value) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            manifest: Manifest {
                command: command.into(),
                version: env!("CARGO_PKG_VERSION").into(),
                seed,
                config,
                inputs: Vec::new(),
                artifacts: Vec::new(),
                fits: BTreeMap::new(),
                values: BTreeMap::new(),
                checks: Vec::new(),
            },
        })
    }

    pub fn input(&mut self, path: &Path) -> Result<(), CliError> {
        let bytes = std::fs::read(path).map_err(|e| CliError::Runtime(format!("cannot read {}: {e}", path.display())))?;
        // File name only, so that manifests do not depend on where runs live.
        self.manifest.inputs.push(FileRecord {
            path: path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
            bytes: bytes.len() as u64,
            crc32: crc_hex(&bytes),
        });
        Ok(())
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        write_atomic(&path, bytes)?;
        self.manifest.artifacts.push(FileRecord { path: name.into(), bytes: bytes.len() as u64, crc32: crc_hex(bytes) });
        Ok(path)
    }

    pub fn write_json(&mut self, name: &str, value: &impl Serialize) -> Result<PathBuf, CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn fit(&mut self, name: impl Into<String>, fit: Option<ScalingFit>) {
        if let Some(f) = fit {
            self.manifest.fits.insert(name.into(), f);
        }
    }

    pub fn value(&mut self, name: impl Into<String>, v: f64) {
        self.manifest.values.insert(name.into(), v);
    }

    pub fn check(&mut self, name: impl Into<String>, pass: bool, detail: impl Into<String>) {
        self.manifest.checks.push(Check { name: name.into(), pass, detail: detail.into() });
    }

    pub fn failed(&self) -> bool {
        self.manifest.checks.iter().any(|c| !c.pass)
    }

    /// Writes the manifest and, separately, the wall-clock timestamp.
    pub fn finish(self) -> Result<Manifest, CliError> {
        let mut text = serde_json::to_string_pretty(&self.manifest).map_err(|e| CliError::Runtime(e.to_string()))?;
        text.push('\n');
        write_atomic(&self.dir.join(MANIFEST), text.as_bytes())?;
        let now = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        write_atomic(&self.dir.join(TIMESTAMP), format!("{now}\n").as_bytes())?;
        Ok(self.manifest)
    }
}

pub fn read_manifest(dir: &Path) -> Result<Manifest, CliError> {
    let path = dir.join(MANIFEST);
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("malformed {}: {e}", path.display())))
}
