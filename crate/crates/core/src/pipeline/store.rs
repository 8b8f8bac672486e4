//! Content-addressed artifact store.
//!
//! Each artifact lives in `<root>/<kind>/<key>/` next to an `artifact.json`
//! that records the producing config, the parent keys and the sha256 of
//! every file. Keys hash (kind, config, parents), so downstream changes never
//! touch upstream keys. Wall-clock timings go to `runtime.json`, which is
//! not part of the hashed file set.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::manifest::sha256_hex;
use crate::error::{Error, Result};

pub const RECORD_FILE: &str = "artifact.json";
pub const RUNTIME_FILE: &str = "runtime.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactRecord {
    pub kind: String,
    pub key: String,
    pub parents: BTreeMap<String, String>,
    pub config: Value,
    pub files: BTreeMap<String, String>,
}

/// A verified artifact on disk.
#[derive(Debug, Clone)]
pub struct Artifact {
    pub dir: PathBuf,
    pub record: ArtifactRecord,
}

impl Artifact {
    pub fn key(&self) -> &str {
        &self.record.key
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Reads a listed file and checks its hash.
    pub fn read(&self, name: &str) -> Result<Vec<u8>> {
        let expected = self.record.files.get(name).ok_or_else(|| {
            Error::MissingArtifact(format!("{} artifact {} has no file {name}", self.record.kind, self.record.key))
        })?;
        let path = self.path(name);
        let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
        if &sha256_hex(&bytes) != expected {
            return Err(Error::Corrupt {
                path,
                reason: "content hash does not match artifact.json".into(),
            });
        }
        Ok(bytes)
    }

    pub fn read_json<T: serde::de::DeserializeOwned>(&self, name: &str) -> Result<T> {
        let bytes = self.read(name)?;
        serde_json::from_slice(&bytes).map_err(|e| Error::Corrupt {
            path: self.path(name),
            reason: e.to_string(),
        })
    }

    /// Seconds recorded when the artifact was produced, if available.
    pub fn runtime_seconds(&self) -> Option<f64> {
        let text = std::fs::read_to_string(self.path(RUNTIME_FILE)).ok()?;
        serde_json::from_str::<Value>(&text).ok()?.get("seconds")?.as_f64()
    }
}

/// Stable key for an artifact of `kind` produced by `config` from `parents`.
pub fn artifact_key(kind: &str, config: &Value, parents: &BTreeMap<String, String>) -> String {
    let doc = serde_json::json!({ "kind": kind, "config": config, "parents": parents });
    sha256_hex(serde_json::to_string(&doc).expect("json values serialize").as_bytes())
}

#[derive(Debug, Clone)]
pub struct ArtifactStore {
    root: PathBuf,
}

impl ArtifactStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        std::fs::create_dir_all(&root).map_err(|e| Error::io(&root, e))?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn dir(&self, kind: &str, key: &str) -> PathBuf {
        self.root.join(kind).join(key)
    }

    pub fn contains(&self, kind: &str, key: &str) -> bool {
        self.dir(kind, key).join(RECORD_FILE).is_file()
    }

    /// Loads an artifact and verifies every listed file.
    pub fn load(&self, kind: &str, key: &str) -> Result<Artifact> {
        let dir = self.dir(kind, key);
        let record_path = dir.join(RECORD_FILE);
        if !record_path.is_file() {
            return Err(Error::MissingArtifact(format!("{kind} artifact {key} (expected {})", dir.display())));
        }
        let bytes = std::fs::read(&record_path).map_err(|e| Error::io(&record_path, e))?;
        let record: ArtifactRecord = serde_json::from_slice(&bytes).map_err(|e| Error::Corrupt {
            path: record_path.clone(),
            reason: e.to_string(),
        })?;
        if record.kind != kind || record.key != key {
            return Err(Error::Corrupt {
                path: record_path,
                reason: format!("record describes {} {}", record.kind, record.key),
            });
        }
        let artifact = Artifact { dir, record };
        for name in artifact.record.files.keys() {
            artifact.read(name)?;
        }
        Ok(artifact)
    }

    /// Writes a new artifact atomically. An existing artifact with the same
    /// key is never overwritten; it is verified and returned instead.
    pub fn write(
        &self,
        kind: &str,
        config: Value,
        parents: BTreeMap<String, String>,
        files: Vec<(String, Vec<u8>)>,
        seconds: Option<f64>,
    ) -> Result<Artifact> {
        let key = artifact_key(kind, &config, &parents);
        if self.contains(kind, &key) {
            return self.load(kind, &key);
        }
        let final_dir = self.dir(kind, &key);
        let staging = self.root.join(kind).join(format!(".staging-{key}"));
        if staging.exists() {
            std::fs::remove_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;
        }
        std::fs::create_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;
        let mut hashes = BTreeMap::new();
        for (name, bytes) in &files {
            if name == RECORD_FILE || name == RUNTIME_FILE || name.contains(['/', '\\']) {
                return Err(Error::InvalidArgument(format!("bad artifact file name {name:?}")));
            }
            let path = staging.join(name);
            std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
            hashes.insert(name.clone(), sha256_hex(bytes));
        }
        let record = ArtifactRecord {
            kind: kind.to_string(),
            key: key.clone(),
            parents,
            config,
            files: hashes,
        };
        let record_path = staging.join(RECORD_FILE);
        std::fs::write(&record_path, serde_json::to_vec_pretty(&record)?).map_err(|e| Error::io(&record_path, e))?;
        if let Some(s) = seconds {
            let path = staging.join(RUNTIME_FILE);
            std::fs::write(&path, serde_json::to_vec(&serde_json::json!({ "seconds": s }))?)
                .map_err(|e| Error::io(&path, e))?;
        }
        std::fs::rename(&staging, &final_dir).map_err(|e| Error::io(&final_dir, e))?;
        Ok(Artifact {
            dir: final_dir,
            record,
        })
    }
}
