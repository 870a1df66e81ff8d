use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::PipelineConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize)]
struct FileEntry {
    path: String,
    sha256: String,
}

/// Provenance record for one stage's outputs. Contains no timestamps or
/// absolute paths, so identical runs produce identical manifests.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    stage: String,
    version: String,
    seed: u64,
    config_sha256: String,
    inputs: Vec<FileEntry>,
    outputs: Vec<FileEntry>,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex(&Sha256::digest(&bytes)))
}

/// Digest of the settings that affect results; input and output locations
/// and the thread count are excluded.
pub fn config_digest(cfg: &PipelineConfig) -> String {
    let canonical = PipelineConfig {
        expression: None,
        clinical: None,
        out_dir: PathBuf::new(),
        threads: 0,
        ..cfg.clone()
    };
    let text = toml::to_string(&canonical).expect("config serializes");
    hex(&Sha256::digest(text.as_bytes()))
}

impl Manifest {
    pub fn new(stage: &str, cfg: &PipelineConfig) -> Self {
        Manifest {
            stage: stage.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: cfg.seed,
            config_sha256: config_digest(cfg),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    /// Records an input by file name and content digest.
    pub fn input(mut self, path: &Path) -> Result<Self> {
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        self.inputs.push(FileEntry {
            path: name,
            sha256: file_digest(path)?,
        });
        Ok(self)
    }

    /// Records outputs by path relative to `base`.
    pub fn outputs(mut self, base: &Path, paths: &[PathBuf]) -> Result<Self> {
        for p in paths {
            let rel = p.strip_prefix(base).unwrap_or(p);
            self.outputs.push(FileEntry {
                path: rel.to_string_lossy().replace('\\', "/"),
                sha256: file_digest(p)?,
            });
        }
        Ok(self)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join("manifest.toml");
        let text = toml::to_string(self).map_err(|e| Error::invalid(format!("manifest: {e}")))?;
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_ignores_locations() {
        let a = PipelineConfig::default();
        let b = PipelineConfig {
            out_dir: "elsewhere".into(),
            threads: 4,
            ..Default::default()
        };
        assert_eq!(config_digest(&a), config_digest(&b));
        let c = PipelineConfig {
            seed: 2,
            ..Default::default()
        };
        assert_ne!(config_digest(&a), config_digest(&c));
    }

    #[test]
    fn known_digest() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x");
        std::fs::write(&p, "abc").unwrap();
        assert_eq!(
            file_digest(&p).unwrap(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
