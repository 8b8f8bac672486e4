//! Multi-label MLP head over bag-of-codewords counts.
//!
//! Inputs are the `4 * D` counts divided by 143; outputs are per-class
//! sigmoid probabilities trained with a Huber loss against 0/1 targets.

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::codebook::{mask_counts, FeatureVector};
use crate::error::{Error, Result};
use crate::metrics::{macro_map, EvalTable};
use crate::neural::{read_model, write_model, Activation, Adam, AdamConfig, DenseNet, LayerSpec, LossSpec, Mode};
use crate::patching::PATCHES_PER_CHUNK;
use crate::seed;

/// Divisor applied to raw counts before they reach the network.
pub const COUNT_SCALE: f64 = PATCHES_PER_CHUNK as f64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeadSpec {
    pub codebook_size: usize,
    pub width: usize,
    pub dropout: f64,
    pub classes: usize,
}

impl HeadSpec {
    pub fn new(codebook_size: usize, width: usize, dropout: f64, classes: usize) -> Self {
        Self {
            codebook_size,
            width,
            dropout,
            classes,
        }
    }

    pub fn input_dim(&self) -> usize {
        4 * self.codebook_size
    }

    pub fn layers(&self) -> Vec<LayerSpec> {
        let hidden = LayerSpec::new(self.width, Activation::Relu, self.dropout);
        vec![hidden, hidden, LayerSpec::new(self.classes, Activation::Sigmoid, 0.0)]
    }

    fn validate(&self) -> Result<()> {
        if self.codebook_size < 2 || self.width == 0 || self.classes == 0 || !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidArgument(format!("bad head spec {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HeadTrainConfig {
    pub max_epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub huber_delta: f64,
    /// Epochs without a validation mAP improvement before stopping.
    pub patience: usize,
}

impl Default for HeadTrainConfig {
    fn default() -> Self {
        Self {
            max_epochs: 200,
            batch_size: 64,
            learning_rate: 1e-3,
            huber_delta: 1.0,
            patience: 10,
        }
    }
}

/// Chunk features with their (clip-inherited) labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledChunks {
    pub features: Vec<FeatureVector>,
    pub labels: Array2<bool>,
}

impl LabeledChunks {
    pub fn new(features: Vec<FeatureVector>, labels: Array2<bool>) -> Result<Self> {
        if features.len() != labels.nrows() {
            return Err(Error::shape(format!("{} label rows", features.len()), labels.nrows()));
        }
        if let Some(first) = features.first() {
            let d = first.codebook_size();
            if let Some(bad) = features.iter().find(|f| f.codebook_size() != d) {
                return Err(Error::ConfigMismatch(format!(
                    "mixed codebook sizes {d} and {}",
                    bad.codebook_size()
                )));
            }
        }
        Ok(Self { features, labels })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }
}

pub fn scale_counts(fv: &FeatureVector, out: &mut [f32]) {
    for (o, &c) in out.iter_mut().zip(fv.counts()) {
        *o = (c as f64 / COUNT_SCALE) as f32;
    }
}

fn input_batch<'a>(features: impl ExactSizeIterator<Item = &'a FeatureVector>, dim: usize) -> Array2<f32> {
    let mut batch = Array2::zeros((features.len(), dim));
    for (mut row, fv) in batch.outer_iter_mut().zip(features) {
        scale_counts(fv, row.as_slice_mut().expect("standard layout"));
    }
    batch
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_map: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadTrainReport {
    pub epochs: Vec<EpochLog>,
    pub best_epoch: usize,
    pub best_val_map: f64,
    pub stopped_early: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct HeadMetadata {
    kind: String,
    spec: HeadSpec,
    compression: u32,
    mask_p: f64,
    count_scale: f64,
}

/// A trained head together with the configuration it expects.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierHead {
    pub spec: HeadSpec,
    pub compression: u32,
    pub mask_p: f64,
    pub seed: u64,
    net: DenseNet<f32>,
}

impl ClassifierHead {
    pub fn network(&self) -> &DenseNet<f32> {
        &self.net
    }

    fn check(&self, fv: &FeatureVector) -> Result<()> {
        if fv.codebook_size() != self.spec.codebook_size {
            return Err(Error::ConfigMismatch(format!(
                "head expects D={} features, got D={}",
                self.spec.codebook_size,
                fv.codebook_size()
            )));
        }
        Ok(())
    }

    /// Eval-mode probabilities, one row per feature vector.
    pub fn predict_chunks(&self, features: &[FeatureVector]) -> Result<Array2<f64>> {
        for fv in features {
            self.check(fv)?;
        }
        let batch = input_batch(features.iter(), self.spec.input_dim());
        Ok(self.net.predict(batch.view())?.mapv(|v| v as f64))
    }

    pub fn predict_chunk(&self, fv: &FeatureVector) -> Result<Vec<f64>> {
        Ok(self.predict_chunks(std::slice::from_ref(fv))?.row(0).to_vec())
    }

    /// Mean of the chunk probabilities.
    pub fn predict_clip(&self, chunks: &[FeatureVector]) -> Result<Vec<f64>> {
        if chunks.is_empty() {
            return Err(Error::InvalidArgument("clip has no chunks".into()));
        }
        Ok(mean_rows(&self.predict_chunks(chunks)?))
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let meta = HeadMetadata {
            kind: "classifier_head".into(),
            spec: self.spec,
            compression: self.compression,
            mask_p: self.mask_p,
            count_scale: COUNT_SCALE,
        };
        write_model(&self.net, self.seed, serde_json::to_value(meta)?)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (net, header) = read_model::<f32>(bytes)?;
        let meta: HeadMetadata = serde_json::from_value(header.metadata).map_err(|e| Error::Corrupt {
            path: Default::default(),
            reason: format!("head metadata: {e}"),
        })?;
        if meta.kind != "classifier_head" || meta.spec.layers() != header.layers || meta.count_scale != COUNT_SCALE {
            return Err(Error::Corrupt {
                path: Default::default(),
                reason: "model file is not a classifier head".into(),
            });
        }
        Ok(Self {
            spec: meta.spec,
            compression: meta.compression,
            mask_p: meta.mask_p,
            seed: header.seed,
            net,
        })
    }
}

/// Column-wise mean; rows are summed in order.
pub fn mean_rows(probs: &Array2<f64>) -> Vec<f64> {
    let n = probs.nrows() as f64;
    probs.sum_axis(Axis(0)).iter().map(|s| s / n).collect()
}

/// Trains a head with Adam, masking each training example afresh every
/// epoch, and keeps the parameters from the epoch with the best validation
/// mAP at chunk level.
#[allow(clippy::too_many_arguments)]
pub fn train_head(
    train: &LabeledChunks,
    val: &LabeledChunks,
    spec: HeadSpec,
    compression: u32,
    mask_p: f64,
    cfg: &HeadTrainConfig,
    seed: u64,
) -> Result<(ClassifierHead, HeadTrainReport)> {
    spec.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::Validation("train and validation splits must be non-empty".into()));
    }
    if !(0.0..=1.0).contains(&mask_p) {
        return Err(Error::InvalidArgument(format!("mask probability {mask_p} outside [0, 1]")));
    }
    if cfg.batch_size == 0 || cfg.max_epochs == 0 {
        return Err(Error::InvalidArgument("batch size and epoch budget must be positive".into()));
    }
    for split in [train, val] {
        if split.labels.ncols() != spec.classes {
            return Err(Error::shape(format!("{} classes", spec.classes), split.labels.ncols()));
        }
        if split.features[0].codebook_size() != spec.codebook_size {
            return Err(Error::ConfigMismatch(format!(
                "head D={} but features have D={}",
                spec.codebook_size,
                split.features[0].codebook_size()
            )));
        }
    }

    let targets = train.labels.mapv(|l| if l { 1.0f32 } else { 0.0 });
    let val_inputs = input_batch(val.features.iter(), spec.input_dim());
    let loss = LossSpec::huber(cfg.huber_delta);
    let mut head = ClassifierHead {
        spec,
        compression,
        mask_p,
        seed,
        net: DenseNet::init(spec.input_dim(), &spec.layers(), seed)?,
    };
    let mut adam = Adam::new(&head.net, AdamConfig::with_learning_rate(cfg.learning_rate));
    let mut best = (f64::NEG_INFINITY, 0usize, head.net.clone());
    let mut epochs = Vec::new();
    let mut stopped_early = false;
    let mut improved = 0usize;
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut batch = Array2::<f32>::zeros((cfg.batch_size, spec.input_dim()));
    let mut batch_targets = Array2::<f32>::zeros((cfg.batch_size, spec.classes));

    for epoch in 1..=cfg.max_epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(seed, &[epoch as u64]));
        order.sort_unstable();
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for rows in order.chunks(cfg.batch_size) {
            let n = rows.len();
            for (k, &i) in rows.iter().enumerate() {
                let fv = mask_counts(&train.features[i], mask_p, seed::derive(seed, &[epoch as u64, i as u64]))?;
                scale_counts(&fv, batch.row_mut(k).as_slice_mut().expect("standard layout"));
                batch_targets.row_mut(k).assign(&targets.row(i));
            }
            let inputs = batch.slice(ndarray::s![..n, ..]);
            let goal = batch_targets.slice(ndarray::s![..n, ..]);
            let (value, grads) = head.net.loss_and_grad(inputs, goal, loss, Mode::Train { seed: rng.random() })?;
            if !value.is_finite() {
                return Err(Error::Divergence(format!("head loss {value} in epoch {epoch}")));
            }
            adam.step(&mut head.net, &grads)?;
            loss_sum += value * n as f64;
        }
        let probs = head.net.predict(val_inputs.view())?.mapv(|v| v as f64);
        if probs.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence(format!("non-finite validation outputs in epoch {epoch}")));
        }
        let val_map = macro_map(&EvalTable::new(probs, val.labels.clone())?)?;
        epochs.push(EpochLog {
            epoch,
            train_loss: loss_sum / train.len() as f64,
            val_map,
        });
        // ties keep the later parameters; only strict gains reset patience
        if val_map > best.0 {
            improved = epoch;
        }
        if val_map >= best.0 {
            best = (val_map, epoch, head.net.clone());
        }
        if epoch - improved >= cfg.patience {
            stopped_early = true;
            break;
        }
    }
    let (best_val_map, best_epoch, net) = best;
    head.net = net;
    Ok((
        head,
        HeadTrainReport {
            epochs,
            best_epoch,
            best_val_map,
            stopped_early,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fv(d: usize, seed: u64) -> FeatureVector {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut codes: [Vec<usize>; 4] = Default::default();
        for (b, n) in [120usize, 12, 10, 1].into_iter().enumerate() {
            codes[b] = (0..n).map(|_| rng.random_range(0..d)).collect();
        }
        FeatureVector::from_codes(d, [&codes[0], &codes[1], &codes[2], &codes[3]]).unwrap()
    }

    fn toy_split(n: usize, d: usize, classes: usize, seed: u64) -> LabeledChunks {
        // class c is present iff pat-block code c has a nonzero count
        let features: Vec<FeatureVector> = (0..n).map(|i| fv(d, seed * 1000 + i as u64)).collect();
        let labels = Array2::from_shape_fn((n, classes), |(i, c)| features[i].counts()[c] > 7);
        LabeledChunks::new(features, labels).unwrap()
    }

    fn quick_cfg() -> HeadTrainConfig {
        HeadTrainConfig {
            max_epochs: 40,
            batch_size: 16,
            learning_rate: 3e-3,
            ..Default::default()
        }
    }

    #[test]
    fn memorizes_a_single_example() {
        let x = fv(8, 1);
        let targets = [true, false, true, true, false];
        let labels = Array2::from_shape_fn((32, 5), |(_, c)| targets[c]);
        let split = LabeledChunks::new(vec![x.clone(); 32], labels).unwrap();
        let cfg = HeadTrainConfig {
            max_epochs: 150,
            patience: 150,
            ..quick_cfg()
        };
        let (head, _) = train_head(&split, &split, HeadSpec::new(8, 32, 0.0, 5), 10, 0.0, &cfg, 3).unwrap();
        let p = head.predict_chunk(&x).unwrap();
        for (pi, &t) in p.iter().zip(&targets) {
            assert!((pi - if t { 1.0 } else { 0.0 }).abs() < 0.05, "{p:?}");
        }
    }

    #[test]
    fn learns_a_separable_task_and_is_deterministic() {
        let train = toy_split(400, 8, 3, 1);
        let val = toy_split(100, 8, 3, 2);
        let spec = HeadSpec::new(8, 64, 0.1, 3);
        let (a, report) = train_head(&train, &val, spec, 10, 0.2, &quick_cfg(), 5).unwrap();
        let (b, _) = train_head(&train, &val, spec, 10, 0.2, &quick_cfg(), 5).unwrap();
        assert_eq!(a, b);
        assert!(report.best_val_map > 0.9, "{report:?}");
        assert_eq!(report.epochs[report.best_epoch - 1].val_map, report.best_val_map);
        assert!(report.epochs.iter().all(|e| e.val_map <= report.best_val_map));
    }

    #[test]
    fn predictions_are_probabilities_and_clip_is_the_mean() {
        let train = toy_split(64, 4, 2, 3);
        let (head, _) = train_head(&train, &train, HeadSpec::new(4, 16, 0.4, 2), 20, 0.0, &quick_cfg(), 1).unwrap();
        let zero = FeatureVector::new(4, vec![0; 16]).unwrap();
        assert_eq!(head.predict_chunk(&zero).unwrap(), head.predict_chunk(&zero).unwrap());
        let chunks: Vec<FeatureVector> = (0..5).map(|i| fv(4, 100 + i)).collect();
        let each: Vec<Vec<f64>> = chunks.iter().map(|c| head.predict_chunk(c).unwrap()).collect();
        assert!(each.iter().flatten().all(|&p| p > 0.0 && p < 1.0));
        let clip = head.predict_clip(&chunks).unwrap();
        let mut reversed = chunks.clone();
        reversed.reverse();
        let back = head.predict_clip(&reversed).unwrap();
        for c in 0..2 {
            let mean = each.iter().map(|p| p[c]).sum::<f64>() / 5.0;
            assert!((clip[c] - mean).abs() < 1e-15);
            assert!((back[c] - mean).abs() < 1e-15);
        }
        assert_eq!(head.predict_clip(&chunks[..1]).unwrap(), each[0]);
        assert!(head.predict_clip(&[]).is_err());
        assert!(matches!(head.predict_chunk(&fv(8, 0)), Err(Error::ConfigMismatch(_))));

        let restored = ClassifierHead::from_bytes(&head.to_bytes().unwrap()).unwrap();
        assert_eq!(restored, head);
    }

    #[test]
    fn rejects_bad_inputs() {
        let split = toy_split(10, 4, 2, 3);
        let empty = LabeledChunks::new(vec![], Array2::from_elem((0, 2), false)).unwrap();
        let spec = HeadSpec::new(4, 8, 0.1, 2);
        let cfg = quick_cfg();
        assert!(matches!(train_head(&empty, &split, spec, 10, 0.0, &cfg, 0), Err(Error::Validation(_))));
        assert!(train_head(&split, &split, spec, 10, 1.5, &cfg, 0).is_err());
        assert!(train_head(&split, &split, HeadSpec::new(8, 8, 0.1, 2), 10, 0.0, &cfg, 0).is_err());
        assert!(train_head(&split, &split, HeadSpec::new(4, 8, 1.0, 2), 10, 0.0, &cfg, 0).is_err());
        let diverge = HeadTrainConfig {
            learning_rate: f64::INFINITY,
            ..cfg
        };
        assert!(matches!(train_head(&split, &split, spec, 10, 0.0, &diverge, 0), Err(Error::Divergence(_))));
    }
}
