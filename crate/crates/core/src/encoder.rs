//! Per-family autoencoders and the bottleneck encoders they yield.

use std::cmp::Ordering;

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::{seq::SliceRandom, Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::audio;
use crate::error::{Error, Result};
use crate::neural::{
    read_model, write_model, Activation, Adam, AdamConfig, DenseNet, LayerSpec, LossSpec, Mode,
};
use crate::patching::{PatchFamily, PatchSet};

const STD_FLOOR: f64 = 1e-6;

/// Architecture of one autoencoder: `in -> h -> h -> bottleneck -> h -> h -> in`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AutoencoderSpec {
    pub family: PatchFamily,
    pub compression: u32,
    pub hidden_width: usize,
    pub dropout: f64,
}

impl AutoencoderSpec {
    pub fn new(family: PatchFamily, compression: u32) -> Self {
        Self {
            family,
            compression,
            hidden_width: 2048,
            dropout: 0.5,
        }
    }

    pub fn with_hidden_width(mut self, width: usize) -> Self {
        self.hidden_width = width;
        self
    }

    pub fn input_dim(&self) -> usize {
        self.family.input_dim()
    }

    pub fn bottleneck_dim(&self) -> usize {
        let d = (self.input_dim() as f64 / self.compression.max(1) as f64).round() as usize;
        d.max(1)
    }

    fn validate(&self) -> Result<()> {
        if self.compression == 0 || self.hidden_width == 0 || !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidArgument(format!("bad autoencoder spec {self:?}")));
        }
        Ok(())
    }

    /// Dropout applies to the two encoder hidden layers only; with it on the
    /// decoder side as well, training settles on the mean patch.
    pub fn layers(&self) -> Vec<LayerSpec> {
        let enc = LayerSpec::new(self.hidden_width, Activation::Relu, self.dropout);
        let dec = LayerSpec::new(self.hidden_width, Activation::Relu, 0.0);
        vec![
            enc,
            enc,
            LayerSpec::new(self.bottleneck_dim(), Activation::Identity, 0.0),
            dec,
            dec,
            LayerSpec::new(self.input_dim(), Activation::Identity, 0.0),
        ]
    }

    pub fn encoder_depth(&self) -> usize {
        3
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AeTrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub checkpoint_every: usize,
    /// Fraction of patches held out for reconstruction reporting.
    pub holdout_fraction: f64,
    /// Rows used to measure reconstruction error at each checkpoint.
    pub eval_rows: usize,
}

impl Default for AeTrainConfig {
    fn default() -> Self {
        Self {
            steps: 2000,
            batch_size: 64,
            learning_rate: 1e-4,
            checkpoint_every: 100,
            holdout_fraction: 0.05,
            eval_rows: 1024,
        }
    }
}

/// Per-dimension standardization fitted on training patches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    fn fit(data: ArrayView2<'_, f64>, rows: &[usize]) -> Self {
        let dim = data.ncols();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; dim];
        for &r in rows {
            for (m, v) in mean.iter_mut().zip(data.row(r)) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        // second pass removes the rounding left by the first
        let mut correction = vec![0.0; dim];
        for &r in rows {
            for ((c, v), m) in correction.iter_mut().zip(data.row(r)).zip(&mean) {
                *c += v - m;
            }
        }
        for (m, c) in mean.iter_mut().zip(correction) {
            *m += c / n;
        }
        let mut var = vec![0.0; dim];
        for &r in rows {
            for ((s, v), m) in var.iter_mut().zip(data.row(r)).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var.into_iter().map(|s| (s / n).sqrt().max(STD_FLOOR)).collect();
        Self { mean, std }
    }

    pub fn apply_row(&self, row: ArrayView1<'_, f64>, out: &mut [f32]) {
        for (((o, v), m), s) in out.iter_mut().zip(row).zip(&self.mean).zip(&self.std) {
            *o = ((v - m) / s) as f32;
        }
    }

    pub fn apply(&self, data: ArrayView2<'_, f64>) -> Array2<f32> {
        let mut out = Array2::zeros(data.dim());
        for (src, mut dst) in data.outer_iter().zip(out.outer_iter_mut()) {
            self.apply_row(src, dst.as_slice_mut().expect("row-major"));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub step: usize,
    pub train_mse: f64,
    pub holdout_mse: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AeTrainReport {
    pub family: PatchFamily,
    pub compression: u32,
    pub patches: usize,
    pub checkpoints: Vec<Checkpoint>,
}

impl AeTrainReport {
    pub fn initial_train_mse(&self) -> f64 {
        self.checkpoints.first().map_or(f64::NAN, |c| c.train_mse)
    }

    pub fn final_train_mse(&self) -> f64 {
        self.checkpoints.last().map_or(f64::NAN, |c| c.train_mse)
    }

    pub fn final_holdout_mse(&self) -> Option<f64> {
        self.checkpoints.last().and_then(|c| c.holdout_mse)
    }
}

/// A trained encoder half plus the standardization it expects.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderModel {
    pub spec: AutoencoderSpec,
    pub standardizer: Standardizer,
    pub encoder: DenseNet<f32>,
    pub seed: u64,
}

fn row_order(data: ArrayView2<'_, f64>) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..data.nrows()).collect();
    idx.sort_by(|&a, &b| {
        data.row(a)
            .iter()
            .zip(data.row(b))
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| *o != Ordering::Equal)
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    idx
}

fn gather(data: &Array2<f32>, rows: &[usize]) -> Array2<f32> {
    data.select(Axis(0), rows)
}

fn reconstruction_mse(net: &DenseNet<f32>, data: &Array2<f32>, rows: &[usize]) -> Result<f64> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for chunk in rows.chunks(256) {
        let batch = gather(data, chunk);
        let out = net.predict(batch.view())?;
        sum += LossSpec::mse().value(out.view(), batch.view()) * batch.len() as f64;
        count += batch.len();
    }
    Ok(sum / count.max(1) as f64)
}

/// Trains one autoencoder on the rows of `patches` and returns its encoder.
///
/// Rows are put in a canonical order before anything else, so the result
/// does not depend on the order in which patches were collected. Minibatch
/// indices and dropout masks for step `s` are drawn from streams keyed by
/// `(seed, s)`.
pub fn train_autoencoder(
    patches: ArrayView2<'_, f64>,
    spec: AutoencoderSpec,
    cfg: &AeTrainConfig,
    seed: u64,
) -> Result<(EncoderModel, AeTrainReport)> {
    spec.validate()?;
    if patches.ncols() != spec.input_dim() {
        return Err(Error::shape(
            format!("{} patch dims for {}", spec.input_dim(), spec.family),
            patches.ncols(),
        ));
    }
    if patches.nrows() < spec.bottleneck_dim().max(2) {
        return Err(Error::InsufficientData(format!(
            "{} patches for a {}-dim bottleneck",
            patches.nrows(),
            spec.bottleneck_dim()
        )));
    }
    if patches.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("{} training patches", spec.family)));
    }
    if cfg.batch_size == 0 {
        return Err(Error::InvalidArgument("batch size must be positive".into()));
    }

    let mut order = row_order(patches);
    let canonical = patches.select(Axis(0), &order);
    order.clear();
    let mut shuffled: Vec<usize> = (0..canonical.nrows()).collect();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let holdout_len = if canonical.nrows() >= 20 {
        ((canonical.nrows() as f64 * cfg.holdout_fraction).ceil() as usize).min(canonical.nrows() / 2)
    } else {
        0
    };
    let (holdout, train) = shuffled.split_at(holdout_len);
    let mut train = train.to_vec();
    train.sort_unstable();

    let standardizer = Standardizer::fit(canonical.view(), &train);
    let data = standardizer.apply(canonical.view());
    drop(canonical);

    let eval_train: Vec<usize> = train.iter().copied().step_by((train.len() / cfg.eval_rows.max(1)).max(1)).take(cfg.eval_rows).collect();
    let eval_holdout: Vec<usize> = holdout.iter().copied().take(cfg.eval_rows).collect();

    let mut net = DenseNet::<f32>::init(spec.input_dim(), &spec.layers(), seed)?;
    let mut adam = Adam::new(&net, AdamConfig::with_learning_rate(cfg.learning_rate));
    let mut checkpoints = Vec::new();
    let mut checkpoint = |net: &DenseNet<f32>, step: usize| -> Result<()> {
        let train_mse = reconstruction_mse(net, &data, &eval_train)?;
        let holdout_mse = if eval_holdout.is_empty() {
            None
        } else {
            Some(reconstruction_mse(net, &data, &eval_holdout)?)
        };
        if !train_mse.is_finite() {
            return Err(Error::Divergence(format!(
                "{} autoencoder: reconstruction error {train_mse} at step {step}",
                spec.family
            )));
        }
        checkpoints.push(Checkpoint {
            step,
            train_mse,
            holdout_mse,
        });
        Ok(())
    };
    checkpoint(&net, 0)?;
    let mut batch_rows = vec![0usize; cfg.batch_size];
    for step in 0..cfg.steps {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(step as u64 + 1);
        for r in batch_rows.iter_mut() {
            *r = train[rng.random_range(0..train.len())];
        }
        let batch = gather(&data, &batch_rows);
        let (loss, grads) = net.loss_and_grad(
            batch.view(),
            batch.view(),
            LossSpec::mse(),
            Mode::Train { seed: rng.random() },
        )?;
        if !loss.is_finite() {
            return Err(Error::Divergence(format!(
                "{} autoencoder: loss {loss} at step {step}",
                spec.family
            )));
        }
        adam.step(&mut net, &grads)?;
        let done = step + 1;
        if done == cfg.steps || (cfg.checkpoint_every > 0 && done % cfg.checkpoint_every == 0) {
            checkpoint(&net, done)?;
        }
    }

    let report = AeTrainReport {
        family: spec.family,
        compression: spec.compression,
        patches: patches.nrows(),
        checkpoints,
    };
    let model = EncoderModel {
        spec,
        standardizer,
        encoder: net.truncated(spec.encoder_depth())?,
        seed,
    };
    Ok((model, report))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct EncoderMetadata {
    kind: String,
    spec: AutoencoderSpec,
    bottleneck_dim: usize,
    standardizer: Standardizer,
    frontend: serde_json::Value,
}

/// Frontend and layout conventions recorded in every encoder file.
pub fn frontend_description() -> serde_json::Value {
    serde_json::json!({
        "sample_rate": audio::SAMPLE_RATE,
        "window": format!("periodic hann, {} samples", audio::WINDOW_LEN),
        "hop": audio::HOP_LEN,
        "fft_size": audio::FFT_SIZE,
        "mel_bins": audio::MEL_BINS,
        "mel_scale": "htk",
        "mel_filters": "triangular, peak-normalized, 0-8000 Hz",
        "compression": format!("ln(1 + {} * magnitude)", audio::LOG_GAIN),
        "chunk_frames": audio::CHUNK_FRAMES,
        "chunk_padding": "zeros on the right",
        "flatten": "row-major, mel bin major",
        "spectral_patch_order": "band-major",
        "thumbnail": "bicubic a=-0.5, half-pixel centers, clamp-to-edge, 8x10",
    })
}

impl EncoderModel {
    pub fn family(&self) -> PatchFamily {
        self.spec.family
    }

    pub fn bottleneck_dim(&self) -> usize {
        self.encoder.output_dim()
    }

    /// Encodes a batch of raw patches (`[n x input_dim]`).
    pub fn encode_batch(&self, patches: ArrayView2<'_, f64>) -> Result<Array2<f32>> {
        if patches.ncols() != self.spec.input_dim() {
            return Err(Error::shape(self.spec.input_dim(), patches.ncols()));
        }
        if patches.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("patch".into()));
        }
        self.encoder.predict(self.standardizer.apply(patches).view())
    }

    pub fn encode(&self, patch: &[f64]) -> Result<Vec<f32>> {
        let view = ArrayView2::from_shape((1, patch.len()), patch).expect("one row");
        Ok(self.encode_batch(view)?.into_raw_vec_and_offset().0)
    }

    pub fn file_name(&self) -> String {
        model_file_name(self.spec.family, self.spec.compression)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let meta = EncoderMetadata {
            kind: "encoder".into(),
            spec: self.spec,
            bottleneck_dim: self.bottleneck_dim(),
            standardizer: self.standardizer.clone(),
            frontend: frontend_description(),
        };
        write_model(&self.encoder, self.seed, serde_json::to_value(meta)?)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (encoder, header) = read_model::<f32>(bytes)?;
        let meta: EncoderMetadata = serde_json::from_value(header.metadata)?;
        if meta.kind != "encoder" || encoder.output_dim() != meta.spec.bottleneck_dim() {
            return Err(Error::Corrupt {
                path: Default::default(),
                reason: "not an encoder model".into(),
            });
        }
        Ok(Self {
            spec: meta.spec,
            standardizer: meta.standardizer,
            encoder,
            seed: header.seed,
        })
    }
}

pub fn model_file_name(family: PatchFamily, compression: u32) -> String {
    format!("ae_{}_F{}.model", family.tag(), compression)
}

/// Bottleneck vectors of one chunk, grouped by family.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedChunk {
    pub blocks: [Array2<f32>; 4],
}

impl EncodedChunk {
    pub fn family(&self, family: PatchFamily) -> ArrayView2<'_, f32> {
        self.blocks[family.index()].view()
    }
}

/// The four encoders of one compression factor.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderBank {
    models: [EncoderModel; 4],
}

impl EncoderBank {
    /// Accepts models in any order; all four families must be present once
    /// and share a compression factor.
    pub fn new(models: Vec<EncoderModel>) -> Result<Self> {
        let mut slots: [Option<EncoderModel>; 4] = Default::default();
        let compression = models.first().map(|m| m.spec.compression);
        for m in models {
            if Some(m.spec.compression) != compression {
                return Err(Error::ConfigMismatch(format!(
                    "encoder bank mixes compression factors {compression:?} and {}",
                    m.spec.compression
                )));
            }
            let slot = &mut slots[m.family().index()];
            if slot.is_some() {
                return Err(Error::ConfigMismatch(format!("duplicate {} encoder", m.family())));
            }
            *slot = Some(m);
        }
        let [a, b, c, d] = slots;
        match (a, b, c, d) {
            (Some(a), Some(b), Some(c), Some(d)) => Ok(Self { models: [a, b, c, d] }),
            _ => Err(Error::ConfigMismatch("encoder bank must cover all four families".into())),
        }
    }

    pub fn compression(&self) -> u32 {
        self.models[0].spec.compression
    }

    pub fn model(&self, family: PatchFamily) -> &EncoderModel {
        &self.models[family.index()]
    }

    pub fn models(&self) -> &[EncoderModel; 4] {
        &self.models
    }

    pub fn encode_chunk(&self, patches: &PatchSet) -> Result<EncodedChunk> {
        let encode = |f: PatchFamily| self.model(f).encode_batch(patches.family(f));
        Ok(EncodedChunk {
            blocks: [
                encode(PatchFamily::SpectralPatch)?,
                encode(PatchFamily::FreqBandEnvelope)?,
                encode(PatchFamily::SpectralEnvelope)?,
                encode(PatchFamily::WholeSpectrogram)?,
            ],
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::patching::extract_patches;

    fn small_cfg(steps: usize) -> AeTrainConfig {
        AeTrainConfig {
            steps,
            batch_size: 32,
            learning_rate: 1e-3,
            checkpoint_every: 50,
            holdout_fraction: 0.1,
            eval_rows: 256,
        }
    }

    fn random_rows(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-1.0..1.0))
    }

    #[test]
    fn bottleneck_dims() {
        let dims = |f| PatchFamily::ALL.map(|fam| AutoencoderSpec::new(fam, f).bottleneck_dim());
        assert_eq!(dims(10), [8, 80, 96, 8]);
        assert_eq!(dims(20), [4, 40, 48, 4]);
        let spec = AutoencoderSpec::new(PatchFamily::SpectralEnvelope, 10);
        let layers = spec.layers();
        assert_eq!(layers.len(), 6);
        assert_eq!(layers.iter().map(|l| l.units).collect::<Vec<_>>(), [2048, 2048, 96, 2048, 2048, 960]);
        assert_eq!(layers[2].activation, Activation::Identity);
        assert_eq!(layers.iter().map(|l| l.dropout).collect::<Vec<_>>(), [0.5, 0.5, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn constant_patches_reconstruct_exactly() {
        let spec = AutoencoderSpec::new(PatchFamily::SpectralPatch, 10).with_hidden_width(32);
        let row: Vec<f64> = (0..80).map(|i| i as f64 * 0.1).collect();
        let patches = Array2::from_shape_fn((64, 80), |(_, c)| row[c]);
        let (model, report) = train_autoencoder(patches.view(), spec, &small_cfg(20), 1).unwrap();
        assert!(report.final_train_mse() < 1e-12, "{:?}", report.checkpoints);
        let codes = model.encode_batch(patches.view()).unwrap();
        assert!(codes.outer_iter().all(|r| r == codes.row(0)));
    }

    #[test]
    fn low_rank_data_is_learned() {
        // rows live on a 4-dim subspace of R^80; an 8-dim bottleneck suffices
        let basis = random_rows(4, 80, 3);
        let coeffs = random_rows(2000, 4, 4);
        let patches = coeffs.dot(&basis);
        let spec = AutoencoderSpec::new(PatchFamily::SpectralPatch, 10).with_hidden_width(128);
        let cfg = AeTrainConfig {
            steps: 2500,
            batch_size: 64,
            learning_rate: 5e-4,
            ..small_cfg(0)
        };
        let (_, report) = train_autoencoder(patches.view(), spec, &cfg, 7).unwrap();
        // standardized inputs have unit variance per dimension
        let tail: Vec<f64> = report.checkpoints.iter().rev().take(5).map(|c| c.train_mse).collect();
        let tail_mean = tail.iter().sum::<f64>() / tail.len() as f64;
        assert!(tail_mean < 0.08, "{:?}", report.checkpoints.last());
        assert!(report.final_holdout_mse().unwrap() < 0.1);
        assert!(report.initial_train_mse() > 10.0 * tail_mean);
        let head: Vec<f64> = report.checkpoints.iter().take(5).map(|c| c.train_mse).collect();
        assert!(head.iter().sum::<f64>() / head.len() as f64 > tail_mean);
    }

    #[test]
    fn training_ignores_patch_order() {
        let patches = random_rows(200, 80, 9);
        let mut reversed = patches.clone();
        reversed.invert_axis(Axis(0));
        let spec = AutoencoderSpec::new(PatchFamily::WholeSpectrogram, 20).with_hidden_width(16);
        let (a, ra) = train_autoencoder(patches.view(), spec, &small_cfg(30), 5).unwrap();
        let (b, rb) = train_autoencoder(reversed.view(), spec, &small_cfg(30), 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(ra, rb);
    }

    #[test]
    fn rejects_bad_input() {
        let spec = AutoencoderSpec::new(PatchFamily::SpectralPatch, 10).with_hidden_width(8);
        let few = random_rows(5, 80, 1);
        assert!(matches!(
            train_autoencoder(few.view(), spec, &small_cfg(1), 0),
            Err(Error::InsufficientData(_))
        ));
        let wrong = random_rows(50, 81, 1);
        assert!(matches!(
            train_autoencoder(wrong.view(), spec, &small_cfg(1), 0),
            Err(Error::Shape { .. })
        ));
        let mut nan = random_rows(50, 80, 1);
        nan[[3, 3]] = f64::NAN;
        assert!(matches!(
            train_autoencoder(nan.view(), spec, &small_cfg(1), 0),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn huge_learning_rate_reports_divergence() {
        let spec = AutoencoderSpec::new(PatchFamily::SpectralPatch, 10).with_hidden_width(64);
        let patches = random_rows(500, 80, 2).mapv(|v| v * 1e3);
        let cfg = AeTrainConfig {
            learning_rate: 1e30,
            ..small_cfg(200)
        };
        let err = train_autoencoder(patches.view(), spec, &cfg, 0).unwrap_err();
        assert!(matches!(err, Error::Divergence(_)), "{err}");
    }

    fn tiny_bank(compression: u32) -> EncoderBank {
        let models = PatchFamily::ALL
            .iter()
            .map(|&f| {
                let spec = AutoencoderSpec::new(f, compression).with_hidden_width(16);
                let data = random_rows(100, f.input_dim(), f.index() as u64);
                train_autoencoder(data.view(), spec, &small_cfg(5), 3).unwrap().0
            })
            .collect();
        EncoderBank::new(models).unwrap()
    }

    #[test]
    fn encode_chunk_matches_per_patch_encode() {
        let bank = tiny_bank(10);
        let chunk = random_rows(96, 100, 77);
        let set = extract_patches(chunk.view()).unwrap();
        let encoded = bank.encode_chunk(&set).unwrap();
        for f in PatchFamily::ALL {
            let block = encoded.family(f);
            assert_eq!(block.nrows(), f.count_per_chunk());
            assert_eq!(block.ncols(), bank.model(f).bottleneck_dim());
            for (i, patch) in set.family(f).outer_iter().enumerate() {
                let single = bank.model(f).encode(patch.as_slice().unwrap()).unwrap();
                assert_eq!(block.row(i).to_vec(), single);
                assert_eq!(single, bank.model(f).encode(patch.as_slice().unwrap()).unwrap());
            }
        }
    }

    #[test]
    fn encoding_the_mean_is_finite() {
        let bank = tiny_bank(20);
        for model in bank.models() {
            let code = model.encode(&model.standardizer.mean).unwrap();
            assert!(code.iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn bank_validation_and_round_trip() {
        let bank = tiny_bank(10);
        let mut models: Vec<_> = bank.models().to_vec();
        models.reverse();
        assert_eq!(EncoderBank::new(models.clone()).unwrap(), bank);
        assert!(EncoderBank::new(models[..3].to_vec()).is_err());
        let other = tiny_bank(20);
        models[0] = other.models()[3].clone();
        assert!(matches!(EncoderBank::new(models), Err(Error::ConfigMismatch(_))));

        for m in bank.models() {
            let bytes = m.to_bytes().unwrap();
            assert_eq!(&EncoderModel::from_bytes(&bytes).unwrap(), m);
        }
        assert_eq!(bank.model(PatchFamily::FreqBandEnvelope).file_name(), "ae_fenv_F10.model");
        assert!(bank.model(PatchFamily::SpectralPatch).encode(&[0.0; 79]).is_err());
    }
}
