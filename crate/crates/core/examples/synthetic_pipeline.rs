//! End to end on the synthetic fixture: generate clips, run every stage into
//! a content-addressed store, rerun to show reuse, then sweep D.
//!
//! `cargo run --release --example synthetic_pipeline -- [clips]`

use bowtag::pipeline::config::AutoencoderSettings;
use bowtag::pipeline::fixture::make_synthetic_fixture;
use bowtag::pipeline::sweep::sweep;
use bowtag::pipeline::{ArtifactStore, Pipeline, RunConfig, Split};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let clips: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(200);
    let dir = tempfile::tempdir()?;
    let fixture = make_synthetic_fixture(dir.path().join("fixture"), 0, clips)?;
    println!("{} clips, positives per class {:?}", fixture.clips, fixture.positives_per_class);

    let mut cfg = RunConfig {
        manifest: Some(fixture.manifest.clone()),
        codebook_size: 64,
        head_width: 256,
        autoencoder: AutoencoderSettings {
            hidden_width: 128,
            max_patches: Some(20_000),
            ..Default::default()
        },
        ..Default::default()
    };
    cfg.autoencoder.train.steps = 600;
    cfg.autoencoder.train.learning_rate = 1e-3;
    cfg.head.batch_size = 32;

    let store = ArtifactStore::open(dir.path().join("store"))?;
    let pipeline = Pipeline::new(store.clone(), cfg.clone())?;
    let (outcomes, report) = pipeline.run_all()?;
    for o in &outcomes {
        println!("{:<13} {}  {:.1}s", o.stage.name(), &o.key[..12], o.seconds);
    }
    for split in [Split::Val, Split::Test] {
        println!(
            "{split:?}: chunk mAP {:.3}, clip mAP {:.3}",
            report.map(split, false).unwrap_or(f64::NAN),
            report.map(split, true).unwrap_or(f64::NAN)
        );
    }

    let reused = pipeline.run_all()?.0.iter().filter(|o| o.reused).count();
    println!("second run reused {reused}/{} stages", outcomes.len());

    cfg.sweep.codebook_sizes = vec![16, 64];
    cfg.sweep.head_widths = vec![256];
    cfg.sweep.head_dropouts = vec![0.1];
    cfg.sweep.mask_ps = vec![0.0];
    let result = sweep(&cfg, &store)?;
    println!("sweep: {} computed, {} reused -> {}", result.computed, result.skipped, result.csv.display());
    for row in &result.rows {
        println!("  D={:<5} val chunk mAP {:.3}  test clip mAP {:.3}", row.codebook_size, row.val_chunk_map, row.test_clip_map);
    }
    Ok(())
}
