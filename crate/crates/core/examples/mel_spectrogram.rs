//! Log-mel frontend on a synthetic 44.1 kHz sweep: resample, STFT, mel
//! filter bank, then one-second chunks.

use bowtag::audio::{chunk, melspectrogram, AudioClip, MelFrontend, HOP_LEN, SAMPLE_RATE};

fn main() -> bowtag::Result<()> {
    let rate = 44_100u32;
    let seconds = 2.5;
    let n = (rate as f64 * seconds) as usize;
    // exponential sweep 200 Hz -> 6 kHz
    let (f0, f1) = (200.0f64, 6000.0f64);
    let k = (f1 / f0).ln() / seconds;
    let samples: Vec<f32> = (0..n)
        .map(|i| {
            let t = i as f64 / rate as f64;
            (0.5 * (2.0 * std::f64::consts::PI * f0 * ((k * t).exp() - 1.0) / k).sin()) as f32
        })
        .collect();

    let clip = AudioClip::new("sweep", rate, samples)?.into_working_rate();
    println!("{} samples at {} Hz ({:.2} s)", clip.samples.len(), clip.sample_rate, clip.duration_s());

    let mel = melspectrogram(&clip)?;
    println!("log-mel: {} bands x {} frames", mel.values.nrows(), mel.frames());

    let centers = MelFrontend::shared().filter_bank().center_frequencies();
    for frame in (0..mel.frames()).step_by(40) {
        let col = mel.values.column(frame);
        let (band, peak) = col.iter().enumerate().fold((0, f64::MIN), |b, (i, &v)| if v > b.1 { (i, v) } else { b });
        let t = frame as f64 * HOP_LEN as f64 / SAMPLE_RATE as f64;
        let expected = f0 * (k * t).exp();
        println!("t={t:.2}s  peak band {band:2} ({:6.0} Hz, sweep at {expected:6.0} Hz)  level {peak:.2}", centers[band]);
    }

    let chunks = chunk(&mel, &clip.clip_id);
    for c in &chunks {
        println!("chunk {}: {:?}", c.chunk_index, c.values.dim());
    }
    Ok(())
}
