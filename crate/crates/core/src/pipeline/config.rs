//! Run configuration with its declared grids.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classifier::HeadTrainConfig;
use crate::codebook::KMeansConfig;
use crate::encoder::AeTrainConfig;
use crate::error::{Error, Result};

pub const COMPRESSION_GRID: &[u32] = &[10, 20];
pub const CODEBOOK_SIZE_GRID: &[usize] = &[16, 64, 256, 1024];
pub const HEAD_WIDTH_GRID: &[usize] = &[256, 512, 2048, 4096];
pub const HEAD_DROPOUT_GRID: &[f64] = &[0.1, 0.4];
pub const MASK_P_GRID: &[f64] = &[0.0, 0.10, 0.20, 0.25, 0.30, 0.35, 0.40, 0.50];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AutoencoderSettings {
    pub hidden_width: usize,
    pub dropout: f64,
    /// Cap on training patches per family, sampled uniformly from the
    /// training split.
    pub max_patches: Option<usize>,
    pub train: AeTrainConfig,
}

impl Default for AutoencoderSettings {
    fn default() -> Self {
        Self {
            hidden_width: 2048,
            dropout: 0.5,
            max_patches: Some(200_000),
            train: AeTrainConfig::default(),
        }
    }
}

/// Axes of a sweep; `F` comes from the enclosing [`RunConfig`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepGrid {
    pub codebook_sizes: Vec<usize>,
    pub head_widths: Vec<usize>,
    pub head_dropouts: Vec<f64>,
    pub mask_ps: Vec<f64>,
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self {
            codebook_sizes: CODEBOOK_SIZE_GRID.to_vec(),
            head_widths: HEAD_WIDTH_GRID.to_vec(),
            head_dropouts: HEAD_DROPOUT_GRID.to_vec(),
            mask_ps: vec![0.0, 0.35],
        }
    }
}

impl SweepGrid {
    pub fn cells(&self) -> usize {
        self.codebook_sizes.len() * self.head_widths.len() * self.head_dropouts.len() * self.mask_ps.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub manifest: Option<PathBuf>,
    pub seed: u64,
    pub compression: u32,
    pub codebook_size: usize,
    pub head_width: usize,
    pub head_dropout: f64,
    pub mask_p: f64,
    pub autoencoder: AutoencoderSettings,
    pub kmeans: KMeansConfig,
    pub head: HeadTrainConfig,
    pub sweep: SweepGrid,
    /// Grid-bound fields allowed to take values outside their grid, by name
    /// (`compression`, `codebook_size`, `head_width`, `head_dropout`, `mask_p`).
    pub overrides: Vec<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            manifest: None,
            seed: 0,
            compression: 10,
            codebook_size: 256,
            head_width: 512,
            head_dropout: 0.1,
            mask_p: 0.0,
            autoencoder: AutoencoderSettings::default(),
            kmeans: KMeansConfig::default(),
            head: HeadTrainConfig::default(),
            sweep: SweepGrid::default(),
            overrides: Vec::new(),
        }
    }
}

fn in_grid<T: PartialEq + std::fmt::Debug>(name: &str, value: &T, grid: &[T], overrides: &[String]) -> Result<()> {
    if grid.contains(value) || overrides.iter().any(|o| o == name) {
        Ok(())
    } else {
        Err(Error::Validation(format!(
            "{name} = {value:?} is outside {grid:?}; list {name:?} in overrides to allow it"
        )))
    }
}

const OVERRIDABLE: &[&str] = &["compression", "codebook_size", "head_width", "head_dropout", "mask_p"];

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Validation(format!("config {}: {e}", path.display())))?;
        if let Some(m) = &cfg.manifest {
            if m.is_relative() {
                cfg.manifest = Some(path.parent().unwrap_or(Path::new(".")).join(m));
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(bad) = self.overrides.iter().find(|o| !OVERRIDABLE.contains(&o.as_str())) {
            return Err(Error::Validation(format!("unknown override {bad:?}; allowed: {OVERRIDABLE:?}")));
        }
        let o = &self.overrides;
        in_grid("compression", &self.compression, COMPRESSION_GRID, o)?;
        in_grid("codebook_size", &self.codebook_size, CODEBOOK_SIZE_GRID, o)?;
        in_grid("head_width", &self.head_width, HEAD_WIDTH_GRID, o)?;
        in_grid("head_dropout", &self.head_dropout, HEAD_DROPOUT_GRID, o)?;
        in_grid("mask_p", &self.mask_p, MASK_P_GRID, o)?;
        for d in &self.sweep.codebook_sizes {
            in_grid("codebook_size", d, CODEBOOK_SIZE_GRID, o)?;
        }
        for w in &self.sweep.head_widths {
            in_grid("head_width", w, HEAD_WIDTH_GRID, o)?;
        }
        for d in &self.sweep.head_dropouts {
            in_grid("head_dropout", d, HEAD_DROPOUT_GRID, o)?;
        }
        for p in &self.sweep.mask_ps {
            in_grid("mask_p", p, MASK_P_GRID, o)?;
        }
        if self.compression == 0 || self.codebook_size < 2 || self.head_width == 0 {
            return Err(Error::Validation("compression, codebook_size and head_width must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.head_dropout) || !(0.0..=1.0).contains(&self.mask_p) {
            return Err(Error::Validation("head_dropout must be in [0, 1) and mask_p in [0, 1]".into()));
        }
        if self.autoencoder.hidden_width == 0 || !(0.0..1.0).contains(&self.autoencoder.dropout) {
            return Err(Error::Validation("autoencoder width must be positive and dropout in [0, 1)".into()));
        }
        Ok(())
    }

    /// The manifest path, or a validation error when none is configured.
    pub fn manifest_path(&self) -> Result<&Path> {
        self.manifest
            .as_deref()
            .ok_or_else(|| Error::Validation("no manifest configured (use --manifest or the config file)".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        RunConfig::default().validate().unwrap();
        assert_eq!(SweepGrid::default().cells(), 64);
    }

    #[test]
    fn grid_values_need_overrides() {
        let cfg = RunConfig {
            codebook_size: 32,
            ..Default::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::Validation(_))));
        let cfg = RunConfig {
            overrides: vec!["codebook_size".into()],
            ..cfg
        };
        cfg.validate().unwrap();
        let cfg = RunConfig {
            overrides: vec!["seed".into()],
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = RunConfig {
            mask_p: 0.33,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn partial_json_uses_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"codebook_size": 64, "manifest": "data/m.csv", "head": {"patience": 3}}"#).unwrap();
        let cfg = RunConfig::load(&path).unwrap();
        assert_eq!(cfg.codebook_size, 64);
        assert_eq!(cfg.head.patience, 3);
        assert_eq!(cfg.head.batch_size, HeadTrainConfig::default().batch_size);
        assert_eq!(cfg.manifest.unwrap(), dir.path().join("data/m.csv"));
        std::fs::write(&path, r#"{"codebook_size": "big"}"#).unwrap();
        assert!(matches!(RunConfig::load(&path), Err(Error::Validation(_))));
    }
}
