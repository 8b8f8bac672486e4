//! Audio ingestion and the log-mel frontend.
//!
//! Clips are decoded from PCM WAV, down-mixed to mono and resampled to
//! [`SAMPLE_RATE`]. The frontend turns a clip into a 96-band log-mel grid
//! (30 ms Hann window, 10 ms hop, 2048-point FFT) which is then sliced into
//! one-second chunks of [`CHUNK_FRAMES`] frames.

mod mel;
mod resample;

use std::path::Path;

use ndarray::{s, Array2};

use crate::error::{Error, Result};

pub use mel::{hz_to_mel, mel_to_hz, MelFilterBank, MelFrontend};
pub use resample::Resampler;

/// Working sample rate of every clip after ingestion.
pub const SAMPLE_RATE: u32 = 16_000;
/// Number of mel bands.
pub const MEL_BINS: usize = 96;
/// Analysis window length in samples (30 ms).
pub const WINDOW_LEN: usize = 480;
/// Hop between frames in samples (10 ms).
pub const HOP_LEN: usize = 160;
/// FFT size; the window is zero-padded up to this length.
pub const FFT_SIZE: usize = 2048;
/// Upper edge of the mel filter bank in Hz.
pub const MEL_FMAX: f64 = 8_000.0;
/// Gain inside `log(1 + gain * magnitude)`.
pub const LOG_GAIN: f64 = 10_000.0;
/// Frames per one-second chunk.
pub const CHUNK_FRAMES: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub clip_id: String,
    pub sample_rate: u32,
    pub samples: Vec<f32>,
}

impl AudioClip {
    pub fn new(clip_id: impl Into<String>, sample_rate: u32, samples: Vec<f32>) -> Result<Self> {
        let clip_id = clip_id.into();
        if samples.is_empty() {
            return Err(Error::EmptyAudio(clip_id));
        }
        if sample_rate == 0 {
            return Err(Error::InvalidArgument("sample rate must be positive".into()));
        }
        Ok(Self {
            clip_id,
            sample_rate,
            samples,
        })
    }

    /// Resamples to [`SAMPLE_RATE`], leaving 16 kHz input untouched.
    pub fn into_working_rate(self) -> Self {
        if self.sample_rate == SAMPLE_RATE {
            return self;
        }
        let samples = Resampler::new(self.sample_rate, SAMPLE_RATE).process(&self.samples);
        Self {
            clip_id: self.clip_id,
            sample_rate: SAMPLE_RATE,
            samples,
        }
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

/// Log-mel magnitudes, `MEL_BINS` rows by `frames` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct MelSpectrogram {
    pub values: Array2<f64>,
}

impl MelSpectrogram {
    pub fn frames(&self) -> usize {
        self.values.ncols()
    }
}

/// One second of spectrogram, always `MEL_BINS x CHUNK_FRAMES`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrogramChunk {
    pub clip_id: String,
    pub chunk_index: usize,
    pub values: Array2<f64>,
}

/// Decodes a PCM WAV file into a mono clip at [`SAMPLE_RATE`].
///
/// Channels are averaged. Integer samples are scaled by `2^(bits-1)`;
/// 32-bit float samples are taken as-is and clamped to [-1, 1].
pub fn decode_and_resample(path: impl AsRef<Path>) -> Result<AudioClip> {
    let path = path.as_ref();
    let reader = hound::WavReader::open(path).map_err(|source| Error::Wav {
        path: path.to_path_buf(),
        source,
    })?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if channels == 0 {
        return Err(Error::UnsupportedEncoding(format!("{}: zero channels", path.display())));
    }
    let wav_err = |source| Error::Wav {
        path: path.to_path_buf(),
        source,
    };
    let interleaved: Vec<f32> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(|v| v.clamp(-1.0, 1.0)))
            .collect::<std::result::Result<_, _>>()
            .map_err(wav_err)?,
        (hound::SampleFormat::Int, bits @ (8 | 16 | 24 | 32)) => {
            let scale = 1.0 / (1u64 << (bits - 1)) as f64;
            reader
                .into_samples::<i32>()
                .map(|s| s.map(|v| (v as f64 * scale) as f32))
                .collect::<std::result::Result<_, _>>()
                .map_err(wav_err)?
        }
        (format, bits) => {
            return Err(Error::UnsupportedEncoding(format!(
                "{}: {format:?} with {bits} bits",
                path.display()
            )))
        }
    };
    let frames = interleaved.len() / channels;
    if frames == 0 {
        return Err(Error::EmptyAudio(path.display().to_string()));
    }
    let mono: Vec<f32> = interleaved
        .chunks_exact(channels)
        .map(|frame| (frame.iter().map(|&v| v as f64).sum::<f64>() / channels as f64) as f32)
        .collect();
    let clip_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(AudioClip::new(clip_id, spec.sample_rate, mono)?.into_working_rate())
}

/// Number of STFT frames produced for `samples` input samples.
pub fn frame_count(samples: usize) -> Option<usize> {
    (samples >= WINDOW_LEN).then(|| (samples - WINDOW_LEN) / HOP_LEN + 1)
}

/// Log-mel spectrogram using the shared default frontend.
pub fn melspectrogram(clip: &AudioClip) -> Result<MelSpectrogram> {
    MelFrontend::shared().compute(clip)
}

/// Slices a spectrogram into consecutive, non-overlapping one-second chunks.
/// The last chunk is zero-padded on the right.
pub fn chunk(spec: &MelSpectrogram, clip_id: &str) -> Vec<SpectrogramChunk> {
    let frames = spec.frames();
    let count = frames.div_ceil(CHUNK_FRAMES).max(1);
    (0..count)
        .map(|index| {
            let start = index * CHUNK_FRAMES;
            let end = (start + CHUNK_FRAMES).min(frames);
            let mut values = Array2::zeros((MEL_BINS, CHUNK_FRAMES));
            if end > start {
                values
                    .slice_mut(s![.., ..end - start])
                    .assign(&spec.values.slice(s![.., start..end]));
            }
            SpectrogramChunk {
                clip_id: clip_id.to_string(),
                chunk_index: index,
                values,
            }
        })
        .collect()
}

/// Decode, frontend and chunking in one call.
pub fn chunks_from_file(path: impl AsRef<Path>, clip_id: &str) -> Result<Vec<SpectrogramChunk>> {
    let clip = decode_and_resample(path)?;
    let spec = melspectrogram(&clip)?;
    Ok(chunk(&spec, clip_id))
}
