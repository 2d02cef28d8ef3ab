//! Run manifests: the configuration, input hashes and artifact references
//! needed to replay a command. No timestamps are recorded, so a replayed
//! run writes an identical manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub artifact_version: String,
    pub seed: Option<u64>,
    /// Effective configuration after defaults, config file and flags.
    pub config: BTreeMap<String, String>,
    /// Input path to sha256 of its bytes.
    pub inputs: BTreeMap<String, String>,
    /// Vocabulary, pivot and model files this run read or wrote.
    pub references: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    /// Derived quantities worth keeping next to the outputs.
    pub stats: BTreeMap<String, String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn hash_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

impl RunManifest {
    pub fn new(command: &str, seed: Option<u64>) -> Self {
        RunManifest {
            command: command.to_string(),
            artifact_version: ARTIFACT_VERSION.to_string(),
            seed,
            ..RunManifest::default()
        }
    }

    pub fn config(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.config.insert(key.to_string(), value.to_string());
        self
    }

    pub fn input(&mut self, path: &Path) -> Result<&mut Self> {
        let hash = hash_file(path)?;
        self.inputs.insert(path.display().to_string(), hash);
        Ok(self)
    }

    pub fn reference(&mut self, role: &str, path: &Path) -> &mut Self {
        self.references.insert(role.to_string(), path.display().to_string());
        self
    }

    pub fn output(&mut self, path: &Path) -> Result<&mut Self> {
        let hash = hash_file(path)?;
        self.outputs.insert(path.display().to_string(), hash);
        Ok(self)
    }

    pub fn stat(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.stats.insert(key.to_string(), value.to_string());
        self
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Manifest path for an artifact: `<artifact>.manifest.json`.
    pub fn path_for(artifact: &Path) -> PathBuf {
        let mut name = artifact.file_name().unwrap_or_default().to_os_string();
        name.push(".manifest.json");
        artifact.with_file_name(name)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip_and_hashes() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("in.txt");
        fs::write(&input, "abc").unwrap();
        let mut m = RunManifest::new("vocab", Some(3));
        m.config("min_df", 5).input(&input).unwrap();
        assert_eq!(
            m.inputs.values().next().unwrap(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        let back = RunManifest::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
        assert_eq!(
            RunManifest::path_for(Path::new("out/vocab.tsv")),
            Path::new("out/vocab.tsv.manifest.json")
        );
    }
}
