use std::sync::{Arc, OnceLock};

use ndarray::Array2;
use realfft::{RealFftPlanner, RealToComplex};

use super::{
    AudioClip, MelSpectrogram, FFT_SIZE, HOP_LEN, LOG_GAIN, MEL_BINS, MEL_FMAX, SAMPLE_RATE,
    WINDOW_LEN,
};
use crate::error::{Error, Result};

/// HTK mel scale.
pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular, peak-normalized filters on the HTK mel scale.
///
/// Band `i` rises from edge `i` to a peak of 1.0 at edge `i + 1` and falls to
/// zero at edge `i + 2`, where the `bands + 2` edges are equally spaced in mel
/// between `fmin` and `fmax`.
#[derive(Debug, Clone)]
pub struct MelFilterBank {
    edges_hz: Vec<f64>,
    // (first FFT bin, weights) per band
    filters: Vec<(usize, Vec<f64>)>,
}

impl MelFilterBank {
    pub fn new(bands: usize, fmin: f64, fmax: f64, sample_rate: f64, fft_size: usize) -> Self {
        let (lo, hi) = (hz_to_mel(fmin), hz_to_mel(fmax));
        let edges_hz: Vec<f64> = (0..bands + 2)
            .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (bands + 1) as f64))
            .collect();
        let bin_hz = sample_rate / fft_size as f64;
        let n_bins = fft_size / 2 + 1;
        let filters = (0..bands)
            .map(|b| {
                let (left, center, right) = (edges_hz[b], edges_hz[b + 1], edges_hz[b + 2]);
                let mut first = None;
                let mut weights = Vec::new();
                for k in 0..n_bins {
                    let f = k as f64 * bin_hz;
                    let w = ((f - left) / (center - left)).min((right - f) / (right - center));
                    if w > 0.0 {
                        first.get_or_insert(k);
                        weights.push(w);
                    } else if first.is_some() {
                        break;
                    }
                }
                (first.unwrap_or(0), weights)
            })
            .collect();
        Self { edges_hz, filters }
    }

    pub fn bands(&self) -> usize {
        self.filters.len()
    }

    /// Peak frequency of each band in Hz.
    pub fn center_frequencies(&self) -> Vec<f64> {
        self.edges_hz[1..self.edges_hz.len() - 1].to_vec()
    }

    pub fn apply(&self, magnitudes: &[f64], out: &mut [f64]) {
        for ((start, weights), o) in self.filters.iter().zip(out.iter_mut()) {
            *o = weights
                .iter()
                .zip(&magnitudes[*start..])
                .map(|(w, m)| w * m)
                .sum();
        }
    }
}

/// Reusable STFT + mel projection with the fixed frontend constants.
pub struct MelFrontend {
    window: Vec<f64>,
    bank: MelFilterBank,
    fft: Arc<dyn RealToComplex<f64>>,
}

impl MelFrontend {
    pub fn new() -> Self {
        // periodic Hann
        let window = (0..WINDOW_LEN)
            .map(|n| {
                0.5 - 0.5 * (2.0 * std::f64::consts::PI * n as f64 / WINDOW_LEN as f64).cos()
            })
            .collect();
        let bank = MelFilterBank::new(MEL_BINS, 0.0, MEL_FMAX, SAMPLE_RATE as f64, FFT_SIZE);
        let fft = RealFftPlanner::<f64>::new().plan_fft_forward(FFT_SIZE);
        Self { window, bank, fft }
    }

    pub fn shared() -> &'static MelFrontend {
        static SHARED: OnceLock<MelFrontend> = OnceLock::new();
        SHARED.get_or_init(MelFrontend::new)
    }

    pub fn filter_bank(&self) -> &MelFilterBank {
        &self.bank
    }

    pub fn compute(&self, clip: &AudioClip) -> Result<MelSpectrogram> {
        if clip.sample_rate != SAMPLE_RATE {
            return Err(Error::InvalidArgument(format!(
                "clip {} is at {} Hz, expected {SAMPLE_RATE}",
                clip.clip_id, clip.sample_rate
            )));
        }
        let frames = super::frame_count(clip.samples.len()).ok_or(Error::TooShort {
            samples: clip.samples.len(),
            required: WINDOW_LEN,
        })?;
        let mut values = Array2::zeros((MEL_BINS, frames));
        let mut buffer = self.fft.make_input_vec();
        let mut spectrum = self.fft.make_output_vec();
        let mut scratch = self.fft.make_scratch_vec();
        let mut magnitudes = vec![0.0; spectrum.len()];
        let mut mel = vec![0.0; MEL_BINS];
        for t in 0..frames {
            let start = t * HOP_LEN;
            buffer.iter_mut().for_each(|v| *v = 0.0);
            for (i, (&x, &w)) in clip.samples[start..start + WINDOW_LEN]
                .iter()
                .zip(&self.window)
                .enumerate()
            {
                buffer[i] = x as f64 * w;
            }
            self.fft
                .process_with_scratch(&mut buffer, &mut spectrum, &mut scratch)
                .expect("fft buffers sized by the planner");
            for (m, c) in magnitudes.iter_mut().zip(&spectrum) {
                *m = c.norm();
            }
            self.bank.apply(&magnitudes, &mut mel);
            for (b, &m) in mel.iter().enumerate() {
                values[[b, t]] = (LOG_GAIN * m).ln_1p();
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("spectrogram of {}", clip.clip_id)));
        }
        Ok(MelSpectrogram { values })
    }
}

impl Default for MelFrontend {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clip(samples: Vec<f32>) -> AudioClip {
        AudioClip::new("t", SAMPLE_RATE, samples).unwrap()
    }

    #[test]
    fn silence_maps_to_exact_zero() {
        let spec = MelFrontend::shared().compute(&clip(vec![0.0; 16_000])).unwrap();
        assert_eq!(spec.values.dim(), (96, 98));
        assert!(spec.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn tone_peaks_at_nearest_mel_center() {
        let tone: Vec<f32> = (0..16_000)
            .map(|n| (2.0 * std::f64::consts::PI * 1000.0 * n as f64 / 16_000.0).sin() as f32)
            .collect();
        let frontend = MelFrontend::shared();
        let spec = frontend.compute(&clip(tone)).unwrap();

        // closed-form centers: equally spaced mel points between 0 and 8 kHz
        let top = hz_to_mel(8000.0);
        let expected = (1..=96)
            .map(|i| mel_to_hz(top * i as f64 / 97.0))
            .enumerate()
            .min_by(|a, b| (a.1 - 1000.0).abs().total_cmp(&(b.1 - 1000.0).abs()))
            .unwrap()
            .0;
        for t in 0..spec.frames() {
            let col = spec.values.column(t);
            let argmax = (0..96).max_by(|&a, &b| col[a].total_cmp(&col[b])).unwrap();
            assert_eq!(argmax, expected, "frame {t}");
        }
    }

    #[test]
    fn too_short_is_rejected() {
        let err = MelFrontend::shared().compute(&clip(vec![0.0; 479])).unwrap_err();
        assert!(matches!(err, Error::TooShort { samples: 479, required: 480 }));
    }

    #[test]
    fn wrong_rate_is_rejected() {
        let c = AudioClip::new("t", 8_000, vec![0.0; 1000]).unwrap();
        assert!(MelFrontend::shared().compute(&c).is_err());
    }

    #[test]
    fn output_is_nonnegative_for_noise() {
        let mut state = 12345u64;
        let noise: Vec<f32> = (0..16_000)
            .map(|_| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((state >> 33) as f64 / (1u64 << 31) as f64 - 1.0) as f32
            })
            .collect();
        let spec = MelFrontend::shared().compute(&clip(noise)).unwrap();
        assert_eq!(spec.frames(), 98);
        assert!(spec.values.iter().all(|&v| v.is_finite() && v >= 0.0));
    }

    #[test]
    fn filter_bank_spans_the_band() {
        let bank = MelFilterBank::new(96, 0.0, 8000.0, 16000.0, 2048);
        assert_eq!(bank.bands(), 96);
        let centers = bank.center_frequencies();
        assert!(centers.windows(2).all(|w| w[0] < w[1]));
        assert!(centers[0] > 0.0 && centers[95] < 8000.0);
        // every band sees at least one FFT bin
        assert!(bank.filters.iter().all(|(_, w)| !w.is_empty()));
        assert!(bank.filters.iter().flat_map(|(_, w)| w).all(|&w| w > 0.0 && w <= 1.0));
    }
}
