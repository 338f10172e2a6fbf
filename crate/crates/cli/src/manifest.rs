//! Run manifests: what a subcommand read and wrote, with content digests.
//! They carry no timestamps, so a re-run over identical inputs reproduces
//! the manifest byte for byte.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::LoadedConfig;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    /// `"absent"` for a path that did not exist.
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub seed: u64,
    pub config_sha256: String,
    /// Effective command-line options.
    pub parameters: serde_json::Value,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn walk(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    for entry in std::fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let path = entry?.path();
        if path.is_dir() {
            walk(&path, out)?;
        } else {
            out.push(path);
        }
    }
    Ok(())
}

/// A file's digest, or for a directory the digest of its sorted
/// `relative-path NUL file-digest` lines.
pub fn sha256_path(path: &Path) -> Result<String> {
    if !path.exists() {
        return Ok("absent".into());
    }
    if !path.is_dir() {
        return sha256_file(path);
    }
    let mut files = Vec::new();
    walk(path, &mut files)?;
    let mut rows: Vec<(String, String)> = files
        .iter()
        .map(|f| {
            let rel = f.strip_prefix(path).unwrap_or(f).to_string_lossy().replace('\\', "/");
            Ok((rel, sha256_file(f)?))
        })
        .collect::<Result<_>>()?;
    rows.sort();
    let mut h = Sha256::new();
    for (rel, digest) in rows {
        h.update(rel.as_bytes());
        h.update([0]);
        h.update(digest.as_bytes());
        h.update(b"\n");
    }
    Ok(hex::encode(h.finalize()))
}

impl RunManifest {
    pub fn new(command: &str, cfg: &LoadedConfig, parameters: serde_json::Value) -> Self {
        RunManifest {
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed: cfg.config.seed,
            config_sha256: cfg.sha256.clone(),
            parameters,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    fn digest(cfg: &LoadedConfig, path: &Path) -> Result<FileDigest> {
        Ok(FileDigest {
            path: cfg.display_path(path),
            sha256: sha256_path(path)?,
        })
    }

    pub fn input(&mut self, cfg: &LoadedConfig, path: &Path) -> Result<()> {
        self.inputs.push(Self::digest(cfg, path)?);
        Ok(())
    }

    pub fn output(&mut self, cfg: &LoadedConfig, path: &Path) -> Result<()> {
        self.outputs.push(Self::digest(cfg, path)?);
        Ok(())
    }

    /// Writes `<output_dir>/manifests/<name>.json` and returns its path.
    pub fn write(&self, cfg: &LoadedConfig, name: &str) -> Result<PathBuf> {
        let dir = cfg.output_dir().join("manifests");
        std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        let path = dir.join(format!("{name}.json"));
        let mut body = serde_json::to_string_pretty(self)?;
        body.push('\n');
        std::fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}
