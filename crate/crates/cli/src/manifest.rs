//! Run manifest: every output file with a content hash, plus the seeds
//! that produced it. Written last, so its presence marks a complete run.

use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Serialize)]
pub struct ManifestFile {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub seed: u64,
    pub repetition_seeds: Vec<u64>,
    pub files: Vec<ManifestFile>,
    pub config: serde_json::Value,
}

pub struct OutputDir {
    root: PathBuf,
    written: Vec<PathBuf>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(root)
            .map_err(|e| CliError::Runtime(format!("creating {}: {e}", root.display())))?;
        // A stale manifest must not mark a new partial run as complete.
        let manifest = root.join("manifest.json");
        if manifest.exists() {
            std::fs::remove_file(&manifest)
                .map_err(|e| CliError::Runtime(format!("removing stale manifest: {e}")))?;
        }
        Ok(OutputDir {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<PathBuf, CliError> {
        let path = self.root.join(name);
        std::fs::write(&path, contents)
            .map_err(|e| CliError::Runtime(format!("writing {}: {e}", path.display())))?;
        self.written.push(path.clone());
        Ok(path)
    }

    /// Writes `manifest.json` listing every file produced by this run.
    pub fn finalize(
        self,
        command: &str,
        seed: u64,
        repetition_seeds: Vec<u64>,
        config: serde_json::Value,
    ) -> Result<PathBuf, CliError> {
        let mut files = Vec::with_capacity(self.written.len());
        for path in &self.written {
            let bytes = std::fs::read(path)
                .map_err(|e| CliError::Runtime(format!("hashing {}: {e}", path.display())))?;
            let mut hasher = Sha256::new();
            hasher.update(&bytes);
            let digest = hasher.finalize();
            let mut hex = String::with_capacity(64);
            for b in digest {
                hex.push_str(&format!("{b:02x}"));
            }
            files.push(ManifestFile {
                path: path
                    .file_name()
                    .map(|f| f.to_string_lossy().into_owned())
                    .unwrap_or_default(),
                sha256: hex,
                bytes: bytes.len() as u64,
            });
        }
        let manifest = Manifest {
            tool: "subsetmc",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            seed,
            repetition_seeds,
            files,
            config,
        };
        let path = self.root.join("manifest.json");
        let body = serde_json::to_string_pretty(&manifest)
            .map_err(|e| CliError::Runtime(format!("serializing manifest: {e}")))?;
        std::fs::write(&path, body)
            .map_err(|e| CliError::Runtime(format!("writing manifest: {e}")))?;
        Ok(path)
    }
}
