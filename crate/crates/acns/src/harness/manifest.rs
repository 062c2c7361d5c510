use std::path::Path;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::RunConfig;
use super::output::append_jsonl;
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.jsonl";

/// Noise seed of ensemble member `member`: word 0 of ChaCha8 stream `member`
/// under the base seed.
pub fn member_seed(base_seed: u64, member: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(member as u64);
    rng.next_u64()
}

/// Hex SHA-256 of the canonical TOML form of a configuration.
pub fn config_hash(cfg: &RunConfig) -> Result<String> {
    let digest = Sha256::digest(cfg.to_toml()?.as_bytes());
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemberSeed {
    pub member: usize,
    pub seed: u64,
}

/// Everything needed to reproduce the artifacts of a run directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub code_version: String,
    pub config: RunConfig,
    pub seeds: Vec<MemberSeed>,
    pub outputs: Vec<String>,
}

/// Closing line of a manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub status: String,
    pub wall_seconds: f64,
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ManifestLine {
    Manifest(Box<RunManifest>),
    Completion(Completion),
}

impl RunManifest {
    pub fn new(command: &str, cfg: &RunConfig, seeds: Vec<MemberSeed>, outputs: &[&str]) -> Result<Self> {
        Ok(Self {
            command: command.into(),
            config_hash: config_hash(cfg)?,
            code_version: env!("CARGO_PKG_VERSION").into(),
            config: cfg.clone(),
            seeds,
            outputs: outputs.iter().map(|s| s.to_string()).collect(),
        })
    }

    /// Creates `dir` and writes the manifest as its first file. A directory
    /// that already holds a manifest is never reused.
    pub fn start(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(MANIFEST_FILE);
        if path.exists() {
            return Err(Error::Config(format!("{} already contains a run", dir.display())));
        }
        append_jsonl(&path, &ManifestLine::Manifest(Box::new(self.clone())))
    }

    pub fn finish(dir: &Path, completion: Completion) -> Result<()> {
        append_jsonl(&dir.join(MANIFEST_FILE), &ManifestLine::Completion(completion))
    }

    pub fn read(dir: &Path) -> Result<(Self, Option<Completion>)> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path)?;
        let mut manifest = None;
        let mut completion = None;
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            match serde_json::from_str(line)? {
                ManifestLine::Manifest(m) => manifest = Some(*m),
                ManifestLine::Completion(c) => completion = Some(c),
            }
        }
        let manifest = manifest.ok_or_else(|| Error::Format {
            path: Some(path.clone()),
            reason: "no manifest line".into(),
        })?;
        Ok((manifest, completion))
    }
}
