//! Run manifests and all-or-nothing output writing.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::RunConfig;
use crate::error::{Error, Result};

/// Fully resolved description of one CLI invocation. Its hash is stamped
/// into every file the invocation writes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: RunConfig,
    /// Input file name → sha256 of its contents.
    pub inputs: BTreeMap<String, String>,
}

impl Manifest {
    /// The output directory is left out of the recorded config so that the
    /// same inputs give the same hash wherever they are written.
    pub fn new(command: &str, config: &RunConfig) -> Self {
        let mut config = config.clone();
        config.out = None;
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config,
            inputs: BTreeMap::new(),
        }
    }

    pub fn record_input(&mut self, name: &str, bytes: &[u8]) {
        self.inputs.insert(name.to_string(), hex::encode(Sha256::digest(bytes)));
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    /// First 16 hex digits of the sha256 of the manifest JSON.
    pub fn hash(&self) -> String {
        hex::encode(&Sha256::digest(self.to_json().as_bytes())[..8])
    }
}

/// Header line for CSV outputs.
pub fn csv_header(hash: &str) -> String {
    format!("# manifest: {hash}\n")
}

/// Files staged in memory and written together. If any write fails, every
/// file already written by this set is removed.
#[derive(Debug, Default)]
pub struct OutputSet {
    dir: PathBuf,
    staged: Vec<(PathBuf, Vec<u8>)>,
}

impl OutputSet {
    pub fn new(dir: &Path) -> Self {
        Self {
            dir: dir.to_path_buf(),
            staged: Vec::new(),
        }
    }

    pub fn add(&mut self, name: &str, bytes: Vec<u8>) -> PathBuf {
        let path = self.dir.join(name);
        self.staged.push((path.clone(), bytes));
        path
    }

    pub fn commit(self) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(&self.dir).map_err(|e| Error::io(&self.dir, e))?;
        let mut written = Vec::new();
        for (path, bytes) in &self.staged {
            if let Err(e) = std::fs::write(path, bytes) {
                for done in &written {
                    let _ = std::fs::remove_file(done);
                }
                let _ = std::fs::remove_file(path);
                return Err(Error::io(path, e));
            }
            written.push(path.clone());
        }
        Ok(written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_ignores_output_directory() {
        let a = RunConfig {
            out: Some("a".into()),
            ..Default::default()
        };
        let b = RunConfig {
            out: Some("b".into()),
            ..Default::default()
        };
        assert_eq!(Manifest::new("sweep", &a).hash(), Manifest::new("sweep", &b).hash());
        let mut c = Manifest::new("sweep", &a);
        c.record_input("x.csv", b"1");
        assert_ne!(c.hash(), Manifest::new("sweep", &a).hash());
    }

    #[test]
    fn failed_commit_removes_written_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut set = OutputSet::new(dir.path());
        let first = set.add("first.csv", b"ok".to_vec());
        set.add("missing/second.csv", b"no".to_vec());
        assert!(set.commit().is_err());
        assert!(!first.exists());
    }
}
