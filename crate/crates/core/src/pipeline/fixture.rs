//! Synthetic multi-label dataset: each clip mixes one to three of eight
//! sound generators, and its labels are exactly the generators used.

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::manifest::{Split, VOCABULARY_FILE};
use crate::audio::SAMPLE_RATE;
use crate::error::{Error, Result};
use crate::seed;

pub const FIXTURE_CLASSES: [&str; 8] = [
    "low_tone",
    "high_tone",
    "up_chirp",
    "down_chirp",
    "low_noise_band",
    "high_noise_band",
    "am_tone",
    "click_train",
];

pub const FIXTURE_CLIPS: usize = 600;
pub const MANIFEST_FILE: &str = "manifest.csv";

/// Everything needed to regenerate one clip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipRecipe {
    pub index: usize,
    pub samples: usize,
    /// Sorted class indices.
    pub classes: Vec<usize>,
    pub gains: Vec<f64>,
    /// Per-class frequency-like parameter (Hz).
    pub params: Vec<f64>,
    pub noise_seed: u64,
}

impl ClipRecipe {
    pub fn clip_id(&self) -> String {
        format!("clip_{:04}", self.index)
    }
}

pub fn fixture_recipe(seed: u64, index: usize) -> ClipRecipe {
    let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(seed, &[seed::label("fixture-clip"), index as u64]));
    let samples = rng.random_range(SAMPLE_RATE as usize..=3 * SAMPLE_RATE as usize);
    let n = rng.random_range(1..=3);
    let mut classes: Vec<usize> = rand::seq::index::sample(&mut rng, FIXTURE_CLASSES.len(), n).into_vec();
    classes.sort_unstable();
    let gains = classes.iter().map(|_| rng.random_range(0.12..0.3)).collect();
    let params = classes
        .iter()
        .map(|&c| match c {
            0 => rng.random_range(250.0..450.0),
            1 => rng.random_range(2500.0..3500.0),
            2 | 3 => rng.random_range(1.5..2.5),
            4 => rng.random_range(150.0..250.0),
            5 => rng.random_range(5000.0..5500.0),
            6 => rng.random_range(1200.0..1800.0),
            _ => rng.random_range(8.0..14.0),
        })
        .collect();
    ClipRecipe {
        index,
        samples,
        classes,
        gains,
        params,
        noise_seed: rng.random(),
    }
}

fn noise_band(rng: &mut ChaCha8Rng, lo: f64, hi: f64, n: usize) -> Vec<f32> {
    const PARTIALS: usize = 40;
    let partials: Vec<(f64, f64)> = (0..PARTIALS)
        .map(|_| (rng.random_range(lo..hi), rng.random_range(0.0..TAU)))
        .collect();
    let norm = (PARTIALS as f64).sqrt().recip();
    (0..n)
        .map(|i| {
            let t = i as f64 / SAMPLE_RATE as f64;
            (partials.iter().map(|(f, p)| (TAU * f * t + p).sin()).sum::<f64>() * norm) as f32
        })
        .collect()
}

/// Sweeps between 500 Hz and 4 kHz, restarting every `1 / rate` seconds.
fn chirp(rate: f64, rising: bool, n: usize) -> Vec<f32> {
    let (lo, hi) = (500.0, 4000.0);
    let mut phase = 0.0;
    (0..n)
        .map(|i| {
            let t = i as f64 / SAMPLE_RATE as f64;
            let frac = (t * rate).fract();
            let f = if rising { lo + (hi - lo) * frac } else { hi - (hi - lo) * frac };
            phase += TAU * f / SAMPLE_RATE as f64;
            phase.sin() as f32
        })
        .collect()
}

fn generator(class: usize, param: f64, n: usize, rng: &mut ChaCha8Rng) -> Vec<f32> {
    let sr = SAMPLE_RATE as f64;
    let phase = rng.random_range(0.0..TAU);
    match class {
        0 | 1 => (0..n).map(|i| (TAU * param * i as f64 / sr + phase).sin() as f32).collect(),
        2 => chirp(param, true, n),
        3 => chirp(param, false, n),
        4 => noise_band(rng, param, param + 400.0, n),
        5 => noise_band(rng, param, param + 1500.0, n),
        6 => (0..n)
            .map(|i| {
                let t = i as f64 / sr;
                (0.5 + 0.5 * (TAU * 4.0 * t).sin()) * (TAU * param * t + phase).sin()
            })
            .map(|v| v as f32)
            .collect(),
        _ => {
            let period = (sr / param) as usize;
            let offset = rng.random_range(0..period);
            (0..n)
                .map(|i| {
                    let k = (i + period - offset) % period;
                    let decay = (-(k as f64) / (0.002 * sr)).exp();
                    (decay * rng.random_range(-1.0..1.0) * 2.5) as f32
                })
                .collect()
        }
    }
}

/// Renders a recipe to 16 kHz samples in [-1, 1].
pub fn synthesize(recipe: &ClipRecipe) -> Vec<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(recipe.noise_seed);
    let mut mix: Vec<f32> = (0..recipe.samples).map(|_| rng.random_range(-0.003f32..0.003)).collect();
    for ((&class, &gain), &param) in recipe.classes.iter().zip(&recipe.gains).zip(&recipe.params) {
        for (m, s) in mix.iter_mut().zip(generator(class, param, recipe.samples, &mut rng)) {
            *m += gain as f32 * s;
        }
    }
    for m in mix.iter_mut() {
        *m = m.clamp(-1.0, 1.0);
    }
    mix
}

/// Split of each clip: a seeded 70/15/15 partition of the indices.
pub fn fixture_splits(seed: u64, clips: usize) -> Vec<Split> {
    let mut order: Vec<usize> = (0..clips).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed::derive(seed, &[seed::label("fixture-split")])));
    let n_train = clips * 70 / 100;
    let n_val = clips * 15 / 100;
    let mut splits = vec![Split::Test; clips];
    for (rank, &i) in order.iter().enumerate() {
        if rank < n_train {
            splits[i] = Split::Train;
        } else if rank < n_train + n_val {
            splits[i] = Split::Val;
        }
    }
    splits
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureSummary {
    pub manifest: PathBuf,
    pub clips: usize,
    pub positives_per_class: Vec<usize>,
}

fn write_wav(path: &Path, samples: &[f32]) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: SAMPLE_RATE,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let wav_err = |source| Error::Wav {
        path: path.to_path_buf(),
        source,
    };
    let mut w = hound::WavWriter::create(path, spec).map_err(wav_err)?;
    for &s in samples {
        w.write_sample((s * 32767.0).round() as i16).map_err(wav_err)?;
    }
    w.finalize().map_err(wav_err)
}

/// Writes `clips` WAV files plus `manifest.csv`, `vocabulary.csv` and
/// `recipes.json` into `dir`.
pub fn make_synthetic_fixture(dir: impl AsRef<Path>, seed: u64, clips: usize) -> Result<FixtureSummary> {
    let dir = dir.as_ref();
    let audio_dir = dir.join("audio");
    std::fs::create_dir_all(&audio_dir).map_err(|e| Error::io(&audio_dir, e))?;
    let splits = fixture_splits(seed, clips);
    let recipes: Vec<ClipRecipe> = (0..clips).map(|i| fixture_recipe(seed, i)).collect();
    {
        use rayon::prelude::*;
        recipes
            .par_iter()
            .map(|r| write_wav(&audio_dir.join(format!("{}.wav", r.clip_id())), &synthesize(r)))
            .collect::<Result<Vec<()>>>()?;
    }
    let mut vocab = csv::Writer::from_writer(Vec::new());
    vocab.write_record(["index", "name"])?;
    for (i, name) in FIXTURE_CLASSES.iter().enumerate() {
        vocab.write_record([i.to_string().as_str(), name])?;
    }
    let mut manifest = csv::Writer::from_writer(Vec::new());
    manifest.write_record(["clip_id", "path", "split", "labels"])?;
    let mut positives = vec![0usize; FIXTURE_CLASSES.len()];
    for (r, split) in recipes.iter().zip(&splits) {
        let labels: Vec<&str> = r.classes.iter().map(|&c| FIXTURE_CLASSES[c]).collect();
        for &c in &r.classes {
            positives[c] += 1;
        }
        let path = format!("audio/{}.wav", r.clip_id());
        manifest.write_record([r.clip_id().as_str(), &path, split.as_str(), &labels.join(";")])?;
    }
    let into_bytes = |w: csv::Writer<Vec<u8>>| w.into_inner().map_err(|e| Error::Validation(e.to_string()));
    let writes = [
        (dir.join(VOCABULARY_FILE), into_bytes(vocab)?),
        (dir.join(MANIFEST_FILE), into_bytes(manifest)?),
        (dir.join("recipes.json"), serde_json::to_vec_pretty(&recipes)?),
    ];
    for (path, bytes) in writes {
        std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    }
    Ok(FixtureSummary {
        manifest: dir.join(MANIFEST_FILE),
        clips,
        positives_per_class: positives,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recipes_are_deterministic_and_varied() {
        assert_eq!(fixture_recipe(3, 10), fixture_recipe(3, 10));
        assert_ne!(fixture_recipe(3, 10), fixture_recipe(4, 10));
        for i in 0..200 {
            let r = fixture_recipe(1, i);
            assert!((1..=3).contains(&r.classes.len()));
            assert!(r.classes.windows(2).all(|w| w[0] < w[1]));
            assert!((16_000..=48_000).contains(&r.samples));
        }
    }

    #[test]
    fn splits_are_70_15_15() {
        let s = fixture_splits(0, 600);
        let count = |x| s.iter().filter(|&&v| v == x).count();
        assert_eq!((count(Split::Train), count(Split::Val), count(Split::Test)), (420, 90, 90));
    }

    #[test]
    fn synthesized_audio_is_bounded() {
        let r = fixture_recipe(7, 3);
        let a = synthesize(&r);
        assert_eq!(a.len(), r.samples);
        assert!(a.iter().all(|v| v.abs() <= 1.0));
        assert_eq!(a, synthesize(&r));
        let energy = a.iter().map(|v| (*v as f64).powi(2)).sum::<f64>() / a.len() as f64;
        assert!(energy > 1e-4);
    }
}
