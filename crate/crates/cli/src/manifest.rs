//! Run manifests: enough to tell whether two runs saw the same inputs and
//! produced the same outputs.

use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use brtkrige::{Error, Result};

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub fn file_digest(path: &Path) -> Result<String> {
    Ok(sha256_hex(&std::fs::read(path)?))
}

#[derive(Debug, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub brtkrige_version: String,
    pub model_format_version: u32,
    pub seed: Option<u64>,
    /// Digest of the effective configuration after command-line overrides.
    pub config_sha256: Option<String>,
    pub inputs: Vec<FileEntry>,
    pub outputs: Vec<FileEntry>,
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            brtkrige_version: env!("CARGO_PKG_VERSION").to_string(),
            model_format_version: brtkrige::brt::FORMAT_VERSION,
            seed: None,
            config_sha256: None,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(FileEntry {
            path: path.display().to_string(),
            sha256: file_digest(path)?,
        });
        Ok(())
    }

    /// Writes the manifest next to the outputs, which are listed by file name.
    pub fn write(mut self, out_dir: &Path, outputs: &[PathBuf]) -> Result<PathBuf> {
        for p in outputs {
            let name = p
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default();
            self.outputs.push(FileEntry {
                path: name,
                sha256: file_digest(p)?,
            });
        }
        let text = toml::to_string(&self).map_err(|e| Error::Config(format!("manifest: {e}")))?;
        let path = out_dir.join(format!("{}_manifest.toml", self.command));
        std::fs::write(&path, text)?;
        Ok(path)
    }
}
