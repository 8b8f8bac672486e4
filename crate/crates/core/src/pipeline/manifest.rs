//! Dataset manifests: `clip_id,path,split,labels` rows plus a class vocabulary.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const VOCABULARY_FILE: &str = "vocabulary.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "train" => Some(Split::Train),
            "val" | "validation" => Some(Split::Val),
            "test" | "eval" => Some(Split::Test),
            _ => None,
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub clip_id: String,
    /// Absolute path of the audio file.
    pub path: PathBuf,
    pub split: Split,
    /// Sorted class indices into the vocabulary.
    pub labels: Vec<usize>,
    /// sha256 of the audio file at ingest time.
    pub audio_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub vocabulary: Vec<String>,
    pub entries: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestSummary {
    pub clips: usize,
    pub per_split: BTreeMap<String, usize>,
    pub per_class: BTreeMap<String, usize>,
}

#[derive(Debug, Deserialize)]
struct Row {
    clip_id: String,
    path: String,
    split: String,
    #[serde(default)]
    labels: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

/// Reads `index,name[,...]` rows; a leading header row is skipped.
pub fn parse_vocabulary(bytes: &[u8]) -> Result<Vec<String>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(bytes);
    let mut names: Vec<(usize, String)> = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let (Some(index), Some(name)) = (record.get(0), record.get(1)) else {
            return Err(Error::Validation(format!("vocabulary line {} needs index,name", line + 1)));
        };
        match index.trim().parse::<usize>() {
            Ok(i) => names.push((i, name.trim().to_string())),
            Err(_) if line == 0 => continue,
            Err(_) => return Err(Error::Validation(format!("vocabulary line {}: bad index {index:?}", line + 1))),
        }
    }
    names.sort();
    for (expected, (i, name)) in names.iter().enumerate() {
        if *i != expected {
            return Err(Error::Validation(format!("vocabulary indices must be 0..n, found {i} for {name:?}")));
        }
    }
    let vocabulary: Vec<String> = names.into_iter().map(|(_, n)| n).collect();
    let mut seen = HashSet::new();
    if let Some(dup) = vocabulary.iter().find(|n| !seen.insert(n.as_str())) {
        return Err(Error::Validation(format!("duplicate class name {dup:?}")));
    }
    if vocabulary.is_empty() {
        return Err(Error::Validation("empty vocabulary".into()));
    }
    Ok(vocabulary)
}

/// Validates the manifest CSV and its sibling `vocabulary.csv`.
///
/// Relative audio paths are resolved against the manifest's directory. All
/// problems of one kind are reported together.
pub fn ingest(manifest_path: impl AsRef<Path>) -> Result<DatasetManifest> {
    let manifest_path = manifest_path.as_ref();
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let vocabulary = parse_vocabulary(&read(&base.join(VOCABULARY_FILE))?)?;
    let index: HashMap<&str, usize> = vocabulary.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();

    let bytes = read(manifest_path)?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(bytes.as_slice());
    let mut entries = Vec::new();
    let mut seen = HashSet::new();
    let mut unknown = Vec::new();
    let mut missing = Vec::new();
    for row in reader.deserialize::<Row>() {
        let row = row?;
        if !seen.insert(row.clip_id.clone()) {
            return Err(Error::Validation(format!("duplicate clip_id {:?}", row.clip_id)));
        }
        let split = Split::parse(&row.split)
            .ok_or_else(|| Error::Validation(format!("clip {:?}: unknown split {:?}", row.clip_id, row.split)))?;
        let mut labels = Vec::new();
        for name in row.labels.split(';').map(str::trim).filter(|s| !s.is_empty()) {
            match index.get(name) {
                Some(&i) => labels.push(i),
                None => unknown.push(format!("{} ({})", name, row.clip_id)),
            }
        }
        labels.sort_unstable();
        labels.dedup();
        let path = base.join(&row.path);
        let audio_sha256 = match std::fs::read(&path) {
            Ok(audio) => sha256_hex(&audio),
            Err(_) => {
                missing.push(path.display().to_string());
                String::new()
            }
        };
        entries.push(ManifestEntry {
            clip_id: row.clip_id,
            path,
            split,
            labels,
            audio_sha256,
        });
    }
    if !unknown.is_empty() {
        return Err(Error::Validation(format!("unknown labels: {}", unknown.join(", "))));
    }
    if !missing.is_empty() {
        return Err(Error::Validation(format!("missing audio files: {}", missing.join(", "))));
    }
    if entries.is_empty() {
        return Err(Error::Validation("manifest has no rows".into()));
    }
    Ok(DatasetManifest { vocabulary, entries })
}

impl DatasetManifest {
    pub fn classes(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.split == split)
    }

    pub fn summary(&self) -> ManifestSummary {
        let mut per_split: BTreeMap<String, usize> = Split::ALL.iter().map(|s| (s.to_string(), 0)).collect();
        let mut per_class: BTreeMap<String, usize> = self.vocabulary.iter().map(|n| (n.clone(), 0)).collect();
        for e in &self.entries {
            *per_split.get_mut(e.split.as_str()).expect("all splits present") += 1;
            for &l in &e.labels {
                *per_class.get_mut(&self.vocabulary[l]).expect("validated label") += 1;
            }
        }
        ManifestSummary {
            clips: self.entries.len(),
            per_split,
            per_class,
        }
    }

    /// Fails unless train, val and test all have clips.
    pub fn require_all_splits(&self) -> Result<()> {
        for s in Split::ALL {
            if self.split(s).next().is_none() {
                return Err(Error::Validation(format!("{s} split is empty")));
            }
        }
        Ok(())
    }

    pub fn label_row(&self, entry: &ManifestEntry) -> Vec<bool> {
        let mut row = vec![false; self.classes()];
        for &l in &entry.labels {
            row[l] = true;
        }
        row
    }

    /// Re-reads an entry's audio and checks it against the ingest-time hash.
    pub fn verified_audio(&self, entry: &ManifestEntry) -> Result<()> {
        let bytes = read(&entry.path)?;
        if sha256_hex(&bytes) != entry.audio_sha256 {
            return Err(Error::Corrupt {
                path: entry.path.clone(),
                reason: "audio changed since ingest".into(),
            });
        }
        Ok(())
    }
}
