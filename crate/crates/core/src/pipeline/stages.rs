//! Stage runner: ingest, train-ae, fit-codebook, featurize, train-head, eval.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use ndarray::{Array2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::config::RunConfig;
use super::features::{ClipFeatures, FeatureTable};
use super::manifest::{self, sha256_hex, DatasetManifest, ManifestEntry, Split, VOCABULARY_FILE};
use super::store::{artifact_key, Artifact, ArtifactStore};
use crate::audio::{self, SpectrogramChunk};
use crate::classifier::{mean_rows, train_head, ClassifierHead, HeadSpec, LabeledChunks};
use crate::codebook::{Codebook, CodebookSet, FeatureVector};
use crate::encoder::{train_autoencoder, AutoencoderSpec, EncoderBank, EncoderModel};
use crate::error::{Error, Result};
use crate::metrics::{EvalTable, MetricsReport};
use crate::patching::{extract_patches, PatchFamily};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Ingest,
    TrainAe,
    FitCodebook,
    Featurize,
    TrainHead,
    Eval,
}

impl Stage {
    pub const ALL: [Stage; 6] = [
        Stage::Ingest,
        Stage::TrainAe,
        Stage::FitCodebook,
        Stage::Featurize,
        Stage::TrainHead,
        Stage::Eval,
    ];

    /// Directory name of the stage's artifacts inside the store.
    pub fn kind(self) -> &'static str {
        match self {
            Stage::Ingest => "manifest",
            Stage::TrainAe => "autoencoders",
            Stage::FitCodebook => "codebooks",
            Stage::Featurize => "features",
            Stage::TrainHead => "head",
            Stage::Eval => "eval",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::TrainAe => "train-ae",
            Stage::FitCodebook => "fit-codebook",
            Stage::Featurize => "featurize",
            Stage::TrainHead => "train-head",
            Stage::Eval => "eval",
        }
    }

    fn upstream(self) -> Option<Stage> {
        let i = Stage::ALL.iter().position(|&s| s == self).expect("listed");
        i.checked_sub(1).map(|j| Stage::ALL[j])
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown stage {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageOutcome {
    pub stage: Stage,
    pub key: String,
    /// True when the artifact already existed and was only verified.
    pub reused: bool,
    pub seconds: f64,
}

/// Corpus-scale mAP values kept in reports for comparison only; they are
/// not expected from small datasets.
pub fn reference_targets() -> Value {
    json!({
        "note": "full-corpus reference values, not attainable at fixture scale",
        "val_chunk_map_best_head": 0.35,
        "val_chunk_map_mask_0.35": 0.38,
        "test_clip_map": 0.44
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitMetrics {
    pub chunk: MetricsReport,
    pub clip: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub compression: u32,
    pub codebook_size: usize,
    pub head_width: usize,
    pub head_dropout: f64,
    pub mask_p: f64,
    pub splits: BTreeMap<String, SplitMetrics>,
    pub reference_targets: Value,
}

impl EvalReport {
    pub fn map(&self, split: Split, clip_level: bool) -> Option<f64> {
        let m = self.splits.get(split.as_str())?;
        Some(if clip_level { m.clip.map } else { m.chunk.map })
    }
}

const REPORT_FILE: &str = "report.json";
const MANIFEST_FILE: &str = "manifest.json";
const HEAD_FILE: &str = "head.model";

/// One configuration bound to a store.
#[derive(Debug, Clone)]
pub struct Pipeline {
    store: ArtifactStore,
    config: RunConfig,
}

fn parents(items: &[(&str, &str)]) -> BTreeMap<String, String> {
    items.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
}

impl Pipeline {
    pub fn new(store: ArtifactStore, config: RunConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { store, config })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn store(&self) -> &ArtifactStore {
        &self.store
    }

    fn stage_config(&self, stage: Stage) -> Result<Value> {
        let c = &self.config;
        Ok(match stage {
            Stage::Ingest => {
                let path = c.manifest_path()?;
                let read = |p: &std::path::Path| std::fs::read(p).map_err(|e| Error::io(p, e));
                let vocab = path.parent().unwrap_or(std::path::Path::new(".")).join(VOCABULARY_FILE);
                json!({
                    "manifest_sha256": sha256_hex(&read(path)?),
                    "vocabulary_sha256": sha256_hex(&read(&vocab)?),
                })
            }
            Stage::TrainAe => json!({
                "seed": c.seed,
                "compression": c.compression,
                "autoencoder": c.autoencoder,
            }),
            Stage::FitCodebook => json!({
                "seed": c.seed,
                "codebook_size": c.codebook_size,
                "kmeans": c.kmeans,
            }),
            Stage::Featurize => json!({}),
            Stage::TrainHead => json!({
                "seed": c.seed,
                "head_width": c.head_width,
                "head_dropout": c.head_dropout,
                "mask_p": c.mask_p,
                "train": c.head,
            }),
            Stage::Eval => json!({}),
        })
    }

    /// Key of every stage's artifact under the current config, computed
    /// without touching any artifact except the manifest files.
    pub fn keys(&self) -> Result<BTreeMap<Stage, String>> {
        let mut keys = BTreeMap::new();
        let mut previous: Option<String> = None;
        for stage in Stage::ALL {
            let p = match (&previous, stage.upstream()) {
                (Some(k), Some(up)) => parents(&[(up.kind(), k)]),
                _ => BTreeMap::new(),
            };
            let key = artifact_key(stage.kind(), &self.stage_config(stage)?, &p);
            keys.insert(stage, key.clone());
            previous = Some(key);
        }
        Ok(keys)
    }

    pub fn key(&self, stage: Stage) -> Result<String> {
        Ok(self.keys()?[&stage].clone())
    }

    pub fn artifact(&self, stage: Stage) -> Result<Artifact> {
        self.store.load(stage.kind(), &self.key(stage)?)
    }

    /// Runs one stage, reusing its artifact when it already exists. The
    /// upstream artifact must be present.
    pub fn run_stage(&self, stage: Stage) -> Result<StageOutcome> {
        let keys = self.keys()?;
        let key = keys[&stage].clone();
        if self.store.contains(stage.kind(), &key) {
            let start = Instant::now();
            self.store.load(stage.kind(), &key)?;
            return Ok(StageOutcome {
                stage,
                key,
                reused: true,
                seconds: start.elapsed().as_secs_f64(),
            });
        }
        let upstream = match stage.upstream() {
            Some(up) => {
                let up_key = &keys[&up];
                if !self.store.contains(up.kind(), up_key) {
                    return Err(Error::MissingArtifact(format!(
                        "{stage} needs the {up} artifact {up_key}; run `{up}` first"
                    )));
                }
                Some(self.store.load(up.kind(), up_key)?)
            }
            None => None,
        };
        let start = Instant::now();
        let files = match stage {
            Stage::Ingest => self.do_ingest()?,
            Stage::TrainAe => self.do_train_ae()?,
            Stage::FitCodebook => self.do_fit_codebook()?,
            Stage::Featurize => self.do_featurize()?,
            Stage::TrainHead => self.do_train_head()?,
            Stage::Eval => self.do_eval()?,
        };
        let seconds = start.elapsed().as_secs_f64();
        let p = match (stage.upstream(), &upstream) {
            (Some(up), Some(a)) => parents(&[(up.kind(), a.key())]),
            _ => BTreeMap::new(),
        };
        let artifact = self.store.write(stage.kind(), self.stage_config(stage)?, p, files, Some(seconds))?;
        debug_assert_eq!(artifact.key(), key);
        Ok(StageOutcome {
            stage,
            key,
            reused: false,
            seconds,
        })
    }

    /// Every stage in order; returns the outcomes and the evaluation.
    pub fn run_all(&self) -> Result<(Vec<StageOutcome>, EvalReport)> {
        let outcomes = Stage::ALL
            .into_iter()
            .map(|s| self.run_stage(s))
            .collect::<Result<Vec<_>>>()?;
        Ok((outcomes, self.eval_report()?))
    }

    pub fn manifest(&self) -> Result<DatasetManifest> {
        self.artifact(Stage::Ingest)?.read_json(MANIFEST_FILE)
    }

    pub fn encoders(&self) -> Result<EncoderBank> {
        let a = self.artifact(Stage::TrainAe)?;
        let models = PatchFamily::ALL
            .iter()
            .map(|&f| EncoderModel::from_bytes(&a.read(&crate::encoder::model_file_name(f, self.config.compression))?))
            .collect::<Result<Vec<_>>>()?;
        EncoderBank::new(models)
    }

    pub fn codebooks(&self) -> Result<CodebookSet> {
        let a = self.artifact(Stage::FitCodebook)?;
        let books = PatchFamily::ALL
            .iter()
            .map(|&f| {
                let name = crate::codebook::codebook_file_name(f, self.config.compression, self.config.codebook_size);
                Codebook::from_bytes(&a.read(&name)?)
            })
            .collect::<Result<Vec<_>>>()?;
        CodebookSet::new(books)
    }

    pub fn features(&self, split: Split) -> Result<FeatureTable> {
        FeatureTable::from_bytes(&self.artifact(Stage::Featurize)?.read(&FeatureTable::file_name(split))?)
    }

    pub fn head(&self) -> Result<ClassifierHead> {
        ClassifierHead::from_bytes(&self.artifact(Stage::TrainHead)?.read(HEAD_FILE)?)
    }

    pub fn eval_report(&self) -> Result<EvalReport> {
        self.artifact(Stage::Eval)?.read_json(REPORT_FILE)
    }

    /// Wall-clock seconds recorded by each stage that has run.
    pub fn stage_seconds(&self) -> Result<BTreeMap<String, f64>> {
        let keys = self.keys()?;
        let mut out = BTreeMap::new();
        for stage in Stage::ALL {
            if self.store.contains(stage.kind(), &keys[&stage]) {
                if let Some(s) = self.store.load(stage.kind(), &keys[&stage])?.runtime_seconds() {
                    out.insert(stage.name().to_string(), s);
                }
            }
        }
        Ok(out)
    }

    fn do_ingest(&self) -> Result<Vec<(String, Vec<u8>)>> {
        let m = manifest::ingest(self.config.manifest_path()?)?;
        m.require_all_splits()?;
        Ok(vec![
            (MANIFEST_FILE.into(), serde_json::to_vec_pretty(&m)?),
            ("summary.json".into(), serde_json::to_vec_pretty(&m.summary())?),
        ])
    }

    fn do_train_ae(&self) -> Result<Vec<(String, Vec<u8>)>> {
        let manifest = self.manifest()?;
        let chunks = load_chunks(&manifest, Split::Train)?;
        let chunks: Vec<&SpectrogramChunk> = chunks.iter().flatten().collect();
        let settings = &self.config.autoencoder;
        let trained = PatchFamily::ALL
            .par_iter()
            .map(|&family| {
                let patches = family_patches(&chunks, family)?;
                let patches = subsample(patches, settings.max_patches, seed::derive(self.config.seed, &[seed::label("ae-sample"), family.index() as u64]));
                let spec = AutoencoderSpec {
                    hidden_width: settings.hidden_width,
                    dropout: settings.dropout,
                    ..AutoencoderSpec::new(family, self.config.compression)
                };
                let s = seed::derive(self.config.seed, &[seed::label("ae"), family.index() as u64]);
                train_autoencoder(patches.view(), spec, &settings.train, s)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut files = Vec::new();
        let mut reports = Vec::new();
        for (model, report) in trained {
            files.push((model.file_name(), model.to_bytes()?));
            reports.push(report);
        }
        files.push((REPORT_FILE.into(), serde_json::to_vec_pretty(&reports)?));
        Ok(files)
    }

    fn do_fit_codebook(&self) -> Result<Vec<(String, Vec<u8>)>> {
        let manifest = self.manifest()?;
        let bank = self.encoders()?;
        let chunks = load_chunks(&manifest, Split::Train)?;
        let chunks: Vec<&SpectrogramChunk> = chunks.iter().flatten().collect();
        let fitted = PatchFamily::ALL
            .par_iter()
            .map(|&family| {
                let codes = bank.model(family).encode_batch(family_patches(&chunks, family)?.view())?;
                let s = seed::derive(self.config.seed, &[seed::label("codebook"), family.index() as u64]);
                Codebook::fit(family, self.config.compression, codes.view(), self.config.codebook_size, &self.config.kmeans, s)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut files = Vec::new();
        let mut report = Vec::new();
        for (book, fit) in fitted {
            files.push((book.file_name(), book.to_bytes()?));
            report.push(json!({
                "family": book.family(),
                "inertia": fit.inertia,
                "iterations": fit.iterations,
                "converged": fit.converged,
                "inertia_history": fit.inertia_history,
            }));
        }
        files.push((REPORT_FILE.into(), serde_json::to_vec_pretty(&report)?));
        Ok(files)
    }

    fn do_featurize(&self) -> Result<Vec<(String, Vec<u8>)>> {
        let manifest = self.manifest()?;
        let bank = self.encoders()?;
        let books = self.codebooks()?;
        let mut files = Vec::new();
        for split in Split::ALL {
            let entries: Vec<&ManifestEntry> = manifest.split(split).collect();
            let clips = entries
                .par_iter()
                .map(|e| {
                    manifest.verified_audio(e)?;
                    let chunks = audio::chunks_from_file(&e.path, &e.clip_id)?;
                    Ok(ClipFeatures {
                        clip_id: e.clip_id.clone(),
                        chunks: featurize_clip(&bank, &books, &chunks)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let table = FeatureTable {
                split,
                compression: books.compression(),
                codebook_size: books.size(),
                clips,
            };
            files.push((FeatureTable::file_name(split), table.to_bytes()?));
        }
        Ok(files)
    }

    fn do_train_head(&self) -> Result<Vec<(String, Vec<u8>)>> {
        let manifest = self.manifest()?;
        let train = chunk_labels(&manifest, &self.features(Split::Train)?)?;
        let val = chunk_labels(&manifest, &self.features(Split::Val)?)?;
        let c = &self.config;
        let spec = HeadSpec::new(c.codebook_size, c.head_width, c.head_dropout, manifest.classes());
        let s = seed::derive(c.seed, &[seed::label("head")]);
        let (head, report) = train_head(&train, &val, spec, c.compression, c.mask_p, &c.head, s)?;
        Ok(vec![
            (HEAD_FILE.into(), head.to_bytes()?),
            (REPORT_FILE.into(), serde_json::to_vec_pretty(&report)?),
        ])
    }

    fn do_eval(&self) -> Result<Vec<(String, Vec<u8>)>> {
        let manifest = self.manifest()?;
        let head = self.head()?;
        let tables = [self.features(Split::Val)?, self.features(Split::Test)?];
        let report = evaluate(&head, &manifest, &tables)?;
        let mut files = vec![(REPORT_FILE.into(), serde_json::to_vec_pretty(&report)?)];
        for (split, m) in &report.splits {
            for (level, r) in [("chunk", &m.chunk), ("clip", &m.clip)] {
                let mut csv = Vec::new();
                r.write_csv(&mut csv)?;
                files.push((format!("ap_{split}_{level}.csv"), csv));
            }
        }
        Ok(files)
    }
}

/// Decodes and chunks every clip of a split, verifying audio hashes.
/// Output order follows the manifest.
pub fn load_chunks(manifest: &DatasetManifest, split: Split) -> Result<Vec<Vec<SpectrogramChunk>>> {
    let entries: Vec<&ManifestEntry> = manifest.split(split).collect();
    entries
        .par_iter()
        .map(|e| {
            manifest.verified_audio(e)?;
            audio::chunks_from_file(&e.path, &e.clip_id)
        })
        .collect()
}

fn family_patches(chunks: &[&SpectrogramChunk], family: PatchFamily) -> Result<Array2<f64>> {
    let blocks = chunks
        .par_iter()
        .map(|c| Ok(extract_patches(c.values.view())?.family(family).to_owned()))
        .collect::<Result<Vec<_>>>()?;
    let views: Vec<_> = blocks.iter().map(|b| b.view()).collect();
    if views.is_empty() {
        return Err(Error::InsufficientData("training split has no chunks".into()));
    }
    Ok(ndarray::concatenate(Axis(0), &views).expect("equal widths"))
}

fn subsample(rows: Array2<f64>, cap: Option<usize>, seed: u64) -> Array2<f64> {
    match cap {
        Some(cap) if rows.nrows() > cap => {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut idx = rand::seq::index::sample(&mut rng, rows.nrows(), cap).into_vec();
            idx.sort_unstable();
            rows.select(Axis(0), &idx)
        }
        _ => rows,
    }
}

fn entry_map(manifest: &DatasetManifest) -> BTreeMap<&str, &ManifestEntry> {
    manifest.entries.iter().map(|e| (e.clip_id.as_str(), e)).collect()
}

/// Chunks of a table with the labels of their clips.
pub fn chunk_labels(manifest: &DatasetManifest, table: &FeatureTable) -> Result<LabeledChunks> {
    let entries = entry_map(manifest);
    let mut features = Vec::with_capacity(table.chunk_count());
    let mut labels = Vec::with_capacity(table.chunk_count() * manifest.classes());
    for clip in &table.clips {
        let entry = entries
            .get(clip.clip_id.as_str())
            .ok_or_else(|| Error::ConfigMismatch(format!("clip {} is not in the manifest", clip.clip_id)))?;
        let row = manifest.label_row(entry);
        for fv in &clip.chunks {
            features.push(fv.clone());
            labels.extend_from_slice(&row);
        }
    }
    let labels = Array2::from_shape_vec((features.len(), manifest.classes()), labels).expect("row per chunk");
    LabeledChunks::new(features, labels)
}

/// Chunk- and clip-level metrics for each table; rejects tables whose
/// (F, D) differ from the head's.
pub fn evaluate(head: &ClassifierHead, manifest: &DatasetManifest, tables: &[FeatureTable]) -> Result<EvalReport> {
    let mut splits = BTreeMap::new();
    for table in tables {
        if table.codebook_size != head.spec.codebook_size || table.compression != head.compression {
            return Err(Error::ConfigMismatch(format!(
                "head was trained on F={} D={} features, {} features have F={} D={}",
                head.compression, head.spec.codebook_size, table.split, table.compression, table.codebook_size
            )));
        }
        if manifest.classes() != head.spec.classes {
            return Err(Error::ConfigMismatch(format!(
                "head predicts {} classes, manifest has {}",
                head.spec.classes,
                manifest.classes()
            )));
        }
        let chunks = chunk_labels(manifest, table)?;
        let chunk_probs = head.predict_chunks(&chunks.features)?;
        let mut clip_probs = Array2::zeros((table.clips.len(), head.spec.classes));
        let mut clip_labels = Array2::from_elem((table.clips.len(), head.spec.classes), false);
        let entries = entry_map(manifest);
        let mut start = 0;
        for (i, clip) in table.clips.iter().enumerate() {
            let n = clip.chunks.len();
            if n == 0 {
                return Err(Error::Validation(format!("clip {} has no chunks", clip.clip_id)));
            }
            let mean = mean_rows(&chunk_probs.slice(ndarray::s![start..start + n, ..]).to_owned());
            clip_probs.row_mut(i).assign(&ndarray::Array1::from(mean));
            let row = manifest.label_row(entries[clip.clip_id.as_str()]);
            clip_labels.row_mut(i).assign(&ndarray::Array1::from(row));
            start += n;
        }
        let chunk_table = EvalTable::new(chunk_probs, chunks.labels)?;
        let clip_table = EvalTable::new(clip_probs, clip_labels)?;
        splits.insert(
            table.split.to_string(),
            SplitMetrics {
                chunk: MetricsReport::from_table("chunk", &chunk_table, &manifest.vocabulary)?,
                clip: MetricsReport::from_table("clip", &clip_table, &manifest.vocabulary)?,
            },
        );
    }
    Ok(EvalReport {
        compression: head.compression,
        codebook_size: head.spec.codebook_size,
        head_width: head.spec.width,
        head_dropout: head.spec.dropout,
        mask_p: head.mask_p,
        splits,
        reference_targets: reference_targets(),
    })
}

/// Chunk features of a single clip, using in-memory models.
pub fn featurize_clip(bank: &EncoderBank, books: &CodebookSet, chunks: &[SpectrogramChunk]) -> Result<Vec<FeatureVector>> {
    chunks
        .iter()
        .map(|c| books.featurize(&bank.encode_chunk(&extract_patches(c.values.view())?)?))
        .collect()
}
