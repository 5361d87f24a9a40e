use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult, ErrorKind};

pub const MANIFEST_FILE: &str = "manifest.json";

/// One output file with its content digest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    /// Path relative to the run directory.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

/// Record of a completed run. Everything except `started_unix` and
/// `wall_clock_seconds` is a function of the resolved config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub mode: String,
    /// Resolved configuration, every default included.
    pub config: serde_json::Value,
    pub config_sha256: String,
    /// Digest of the CSV text of every coupling matrix used, in order.
    pub coupling_sha256: String,
    pub software_version: String,
    pub started_unix: u64,
    pub wall_clock_seconds: f64,
    pub artifacts: Vec<Artifact>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn software_version() -> String {
    format!("lrtfim-cli {}", env!("CARGO_PKG_VERSION"))
}

/// Writes artifacts into a run directory and keeps their digests.
#[derive(Debug)]
pub struct ArtifactWriter {
    root: PathBuf,
    artifacts: Vec<Artifact>,
}

impl ArtifactWriter {
    pub fn create(root: &Path) -> CliResult<Self> {
        std::fs::create_dir_all(root)
            .map_err(|e| CliError::new(ErrorKind::Io, format!("cannot create {}: {e}", root.display())))?;
        Ok(Self {
            root: root.to_path_buf(),
            artifacts: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> CliResult<()> {
        let bytes = contents.as_ref();
        let path = self.root.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(&path, bytes)
            .map_err(|e| CliError::new(ErrorKind::Io, format!("cannot write {}: {e}", path.display())))?;
        self.artifacts.retain(|a| a.path != name);
        self.artifacts.push(Artifact {
            path: name.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    pub fn write_json<S: Serialize>(&mut self, name: &str, value: &S) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| CliError::new(ErrorKind::Io, format!("cannot serialize {name}: {e}")))?;
        text.push('\n');
        self.write(name, text)
    }

    pub fn into_artifacts(mut self) -> Vec<Artifact> {
        self.artifacts.sort_by(|a, b| a.path.cmp(&b.path));
        self.artifacts
    }
}

impl RunManifest {
    pub fn save(&self, dir: &Path) -> CliResult<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes") + "\n";
        std::fs::write(dir.join(MANIFEST_FILE), text)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(dir.join(MANIFEST_FILE))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::new(ErrorKind::Input, format!("malformed manifest in {}: {e}", dir.display())))
    }

    /// True when every listed artifact is present with the recorded digest.
    pub fn verify(&self, dir: &Path) -> bool {
        self.artifacts.iter().all(|a| {
            std::fs::read(dir.join(&a.path)).is_ok_and(|bytes| bytes.len() as u64 == a.bytes && sha256_hex(&bytes) == a.sha256)
        })
    }
}
