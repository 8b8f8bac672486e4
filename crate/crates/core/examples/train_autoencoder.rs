//! Trains a spectral-patch autoencoder on synthetic clips and encodes a
//! few patches with the resulting encoder.

use bowtag::audio::{chunk, melspectrogram, AudioClip, SAMPLE_RATE};
use bowtag::encoder::{train_autoencoder, AeTrainConfig, AutoencoderSpec};
use bowtag::patching::{extract_patches, PatchFamily};
use bowtag::pipeline::fixture::{fixture_recipe, synthesize};
use ndarray::{concatenate, Axis};

fn main() -> bowtag::Result<()> {
    let family = PatchFamily::SpectralPatch;
    let mut blocks = Vec::new();
    for i in 0..20 {
        let clip = AudioClip::new(format!("c{i}"), SAMPLE_RATE, synthesize(&fixture_recipe(0, i)))?;
        for c in chunk(&melspectrogram(&clip)?, &clip.clip_id) {
            blocks.push(extract_patches(c.values.view())?.family(family).to_owned());
        }
    }
    let views: Vec<_> = blocks.iter().map(|b| b.view()).collect();
    let patches = concatenate(Axis(0), &views).unwrap();
    println!("{} patches of dim {}", patches.nrows(), patches.ncols());

    let spec = AutoencoderSpec::new(family, 10).with_hidden_width(128);
    let cfg = AeTrainConfig {
        steps: 800,
        learning_rate: 1e-3,
        checkpoint_every: 100,
        ..Default::default()
    };
    let (model, report) = train_autoencoder(patches.view(), spec, &cfg, 7)?;
    for cp in &report.checkpoints {
        println!("step {:4}  train mse {:.4}  holdout mse {:.4}", cp.step, cp.train_mse, cp.holdout_mse.unwrap_or(f64::NAN));
    }

    let codes = model.encode_batch(patches.slice(ndarray::s![..3, ..]))?;
    println!("bottleneck dim {}", model.bottleneck_dim());
    for row in codes.outer_iter() {
        println!("  {}", row.iter().map(|v| format!("{v:6.2}")).collect::<Vec<_>>().join(" "));
    }
    let bytes = model.to_bytes()?;
    println!("serialized encoder: {} bytes, file name {}", bytes.len(), model.file_name());
    Ok(())
}
