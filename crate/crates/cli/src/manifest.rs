use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::Result;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    /// Relative to the output directory.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Full argument vector, program name first.
    pub argv: Vec<String>,
    /// Working directory the command ran in; relative inputs resolve against it.
    pub cwd: PathBuf,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub artifacts: Vec<Artifact>,
    pub wall_clock_seconds: f64,
    pub version: String,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| phnmf_io(path, e))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

/// Hashes every written file, in the given order.
pub fn artifacts(out_dir: &Path, written: &[PathBuf]) -> Result<Vec<Artifact>> {
    written
        .iter()
        .map(|p| {
            let rel = p.strip_prefix(out_dir).unwrap_or(p);
            Ok(Artifact {
                path: rel.to_string_lossy().replace('\\', "/"),
                sha256: sha256_file(p)?,
            })
        })
        .collect()
}

impl RunManifest {
    pub fn new(
        argv: &[String],
        command: &str,
        config: serde_json::Value,
        seed: Option<u64>,
        artifacts: Vec<Artifact>,
        elapsed: Duration,
    ) -> Self {
        RunManifest {
            command: command.to_string(),
            argv: argv.to_vec(),
            cwd: std::env::current_dir().unwrap_or_default(),
            config,
            seed,
            artifacts,
            wall_clock_seconds: elapsed.as_secs_f64(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    pub fn write(&self, out_dir: &Path) -> Result<PathBuf> {
        let path = out_dir.join(MANIFEST_NAME);
        let text = serde_json::to_string_pretty(self)?;
        fs::write(&path, text + "\n").map_err(|e| phnmf_io(&path, e))?;
        Ok(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| phnmf_io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| phnmf::Error::Validation(format!("{}: not a run manifest: {e}", path.display())).into())
    }
}

pub fn phnmf_io(path: &Path, source: std::io::Error) -> anyhow::Error {
    phnmf::Error::Io {
        path: path.to_path_buf(),
        source,
    }
    .into()
}
