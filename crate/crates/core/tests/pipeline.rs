mod common;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::OnceLock;

use bowtag::classifier::HeadTrainConfig;
use bowtag::codebook::KMeansConfig;
use bowtag::encoder::AeTrainConfig;
use bowtag::pipeline::config::AutoencoderSettings;
use bowtag::pipeline::fixture::{fixture_recipe, make_synthetic_fixture, FIXTURE_CLASSES, FIXTURE_CLIPS};
use bowtag::pipeline::manifest::sha256_hex;
use bowtag::pipeline::stages::evaluate;
use bowtag::pipeline::sweep::sweep;
use bowtag::pipeline::{ingest, ArtifactStore, Pipeline, RunConfig, Split, Stage, SweepGrid};
use bowtag::Error;

const CLIPS: usize = 80;

fn fixture_dir() -> &'static Path {
    static DIR: OnceLock<PathBuf> = OnceLock::new();
    DIR.get_or_init(|| {
        let dir = std::env::temp_dir().join(format!("bowtag-pipeline-fixture-{}", std::process::id()));
        make_synthetic_fixture(&dir, 5, CLIPS).unwrap();
        dir
    })
}

fn small_config(manifest: PathBuf) -> RunConfig {
    RunConfig {
        manifest: Some(manifest),
        seed: 3,
        compression: 10,
        codebook_size: 16,
        head_width: 256,
        head_dropout: 0.1,
        mask_p: 0.0,
        autoencoder: AutoencoderSettings {
            hidden_width: 32,
            dropout: 0.5,
            max_patches: Some(4000),
            train: AeTrainConfig {
                steps: 150,
                batch_size: 32,
                learning_rate: 1e-3,
                checkpoint_every: 50,
                ..Default::default()
            },
        },
        kmeans: KMeansConfig {
            max_iters: 50,
            ..Default::default()
        },
        head: HeadTrainConfig {
            max_epochs: 30,
            batch_size: 32,
            patience: 5,
            ..Default::default()
        },
        sweep: SweepGrid {
            codebook_sizes: vec![16],
            head_widths: vec![256],
            head_dropouts: vec![0.1],
            mask_ps: vec![0.0],
        },
        overrides: vec![],
    }
}

fn pipeline(store: &Path) -> Pipeline {
    Pipeline::new(ArtifactStore::open(store).unwrap(), small_config(fixture_dir().join("manifest.csv"))).unwrap()
}

/// sha256 of every hashed artifact file, keyed by relative path.
fn artifact_hashes(store: &Path) -> BTreeMap<String, String> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, String>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else if path.file_name().unwrap() != "runtime.json" {
                let rel = path.strip_prefix(root).unwrap().display().to_string();
                out.insert(rel, sha256_hex(&std::fs::read(&path).unwrap()));
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(store, store, &mut out);
    out
}

#[test]
fn fixture_labels_follow_recipes() {
    let m = ingest(fixture_dir().join("manifest.csv")).unwrap();
    assert_eq!(m.entries.len(), CLIPS);
    for (i, e) in m.entries.iter().enumerate() {
        assert_eq!(e.labels, fixture_recipe(5, i).classes, "{}", e.clip_id);
    }
}

#[test]
fn label_histogram_matches_csv_recount() {
    let m = ingest(fixture_dir().join("manifest.csv")).unwrap();
    let text = std::fs::read_to_string(fixture_dir().join("manifest.csv")).unwrap();
    let mut recount: BTreeMap<String, usize> = FIXTURE_CLASSES.iter().map(|c| (c.to_string(), 0)).collect();
    for line in text.lines().skip(1) {
        for label in line.rsplit(',').next().unwrap().split(';').filter(|s| !s.is_empty()) {
            *recount.get_mut(label).unwrap() += 1;
        }
    }
    assert_eq!(m.summary().per_class, recount);
}

#[test]
fn full_fixture_has_enough_positives() {
    let mut positives = [0usize; 8];
    for i in 0..FIXTURE_CLIPS {
        for c in fixture_recipe(0, i).classes {
            positives[c] += 1;
        }
    }
    assert!(positives.iter().all(|&p| p >= 30), "{positives:?}");
}

#[test]
fn fixture_files_are_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    make_synthetic_fixture(a.path(), 9, 12).unwrap();
    make_synthetic_fixture(b.path(), 9, 12).unwrap();
    assert_eq!(artifact_hashes(a.path()), artifact_hashes(b.path()));
    let c = tempfile::tempdir().unwrap();
    make_synthetic_fixture(c.path(), 10, 12).unwrap();
    assert_ne!(artifact_hashes(a.path()), artifact_hashes(c.path()));
}

#[test]
fn stages_are_deterministic_isolated_and_checked() {
    let s1 = tempfile::tempdir().unwrap();
    let s2 = tempfile::tempdir().unwrap();
    let p1 = pipeline(s1.path());
    let p2 = pipeline(s2.path());

    // stages refuse to run before their inputs exist
    assert!(matches!(p1.run_stage(Stage::FitCodebook), Err(Error::MissingArtifact(_))));

    let (outcomes, r1) = p1.run_all().unwrap();
    assert!(outcomes.iter().all(|o| !o.reused));
    let (_, r2) = p2.run_all().unwrap();
    assert_eq!(r1, r2);
    assert_eq!(artifact_hashes(s1.path()), artifact_hashes(s2.path()));

    for split in Split::ALL {
        for clip in p1.features(split).unwrap().clips {
            for fv in clip.chunks {
                assert_eq!(fv.block_sums(), [120, 12, 10, 1]);
            }
        }
    }

    // rerun reuses everything
    let again = p1.run_all().unwrap().0;
    assert!(again.iter().all(|o| o.reused));

    // deleting downstream artifacts leaves upstream hashes alone
    let before = artifact_hashes(s1.path());
    for stage in [Stage::Featurize, Stage::TrainHead, Stage::Eval] {
        std::fs::remove_dir_all(s1.path().join(stage.kind())).unwrap();
    }
    p1.run_all().unwrap();
    assert_eq!(artifact_hashes(s1.path()), before);

    // tampering is detected on load
    let head_dir = s1.path().join(Stage::TrainHead.kind()).join(p1.key(Stage::TrainHead).unwrap());
    std::fs::write(head_dir.join("head.model"), b"junk").unwrap();
    assert!(matches!(p1.head(), Err(Error::Corrupt { .. })));

    // a head evaluated against features of another D is rejected
    let other = Pipeline::new(
        ArtifactStore::open(s2.path()).unwrap(),
        RunConfig {
            codebook_size: 64,
            ..p2.config().clone()
        },
    )
    .unwrap();
    for stage in [Stage::FitCodebook, Stage::Featurize] {
        other.run_stage(stage).unwrap();
    }
    let err = evaluate(&p2.head().unwrap(), &p2.manifest().unwrap(), &[other.features(Split::Test).unwrap()]).unwrap_err();
    assert!(matches!(err, Error::ConfigMismatch(_)), "{err}");
    // upstream keys do not depend on D
    assert_eq!(other.key(Stage::TrainAe).unwrap(), p2.key(Stage::TrainAe).unwrap());
    assert_ne!(other.key(Stage::FitCodebook).unwrap(), p2.key(Stage::FitCodebook).unwrap());

    // a 1x1 sweep reproduces the stage-level evaluation
    let result = sweep(p2.config(), &ArtifactStore::open(s2.path()).unwrap()).unwrap();
    assert_eq!(result.rows.len(), 1);
    assert_eq!((result.computed, result.skipped), (0, 1));
    assert_eq!(result.rows[0].test_clip_map, r2.map(Split::Test, true).unwrap());
    assert_eq!(result.rows[0].val_chunk_map, r2.map(Split::Val, false).unwrap());
}

#[test]
fn shuffled_labels_give_chance_level_map() {
    let dir = tempfile::tempdir().unwrap();
    let src = fixture_dir();
    std::fs::copy(src.join("vocabulary.csv"), dir.path().join("vocabulary.csv")).unwrap();
    let text = std::fs::read_to_string(src.join("manifest.csv")).unwrap();
    let mut lines: Vec<Vec<String>> = text.lines().skip(1).map(|l| l.split(',').map(String::from).collect()).collect();
    // rotate labels by a prime offset, keeping each clip's audio and split
    let labels: Vec<String> = lines.iter().map(|l| l[3].clone()).collect();
    for (i, line) in lines.iter_mut().enumerate() {
        line[3] = labels[(i + 37) % labels.len()].clone();
        line[1] = src.join(&line[1]).display().to_string();
    }
    let body: String = lines.iter().map(|l| l.join(",") + "\n").collect();
    std::fs::write(dir.path().join("manifest.csv"), format!("clip_id,path,split,labels\n{body}")).unwrap();

    let store = tempfile::tempdir().unwrap();
    let p = Pipeline::new(ArtifactStore::open(store.path()).unwrap(), small_config(dir.path().join("manifest.csv"))).unwrap();
    let (_, report) = p.run_all().unwrap();
    let manifest = p.manifest().unwrap();
    let test: Vec<_> = manifest.split(Split::Test).collect();
    let labels = ndarray::Array2::from_shape_fn((test.len(), manifest.classes()), |(i, c)| test[i].labels.contains(&c));
    let base = common::prevalence_baseline(&labels);
    let map = report.map(Split::Test, true).unwrap();
    assert!(map < 2.0 * base, "clip mAP {map} vs prevalence {base}");
}

#[test]
fn sweep_resumes_only_missing_cells() {
    let full = tempfile::tempdir().unwrap();
    let resumed = tempfile::tempdir().unwrap();
    let mut cfg = small_config(fixture_dir().join("manifest.csv"));
    cfg.sweep.mask_ps = vec![0.0, 0.35];
    cfg.sweep.head_dropouts = vec![0.1, 0.4];

    let fresh = sweep(&cfg, &ArtifactStore::open(full.path()).unwrap()).unwrap();
    assert_eq!(fresh.rows.len(), 4);
    assert_eq!(fresh.computed, 4);

    let mut partial = cfg.clone();
    partial.sweep.mask_ps = vec![0.35];
    let first = sweep(&partial, &ArtifactStore::open(resumed.path()).unwrap()).unwrap();
    assert_eq!((first.rows.len(), first.computed), (2, 2));
    let second = sweep(&cfg, &ArtifactStore::open(resumed.path()).unwrap()).unwrap();
    assert_eq!((second.computed, second.skipped), (2, 2));

    let maps = |rows: &[bowtag::pipeline::sweep::SweepRow]| -> Vec<(usize, f64, f64, f64, f64)> {
        rows.iter().map(|r| (r.codebook_size, r.head_dropout, r.mask_p, r.val_chunk_map, r.test_clip_map)).collect()
    };
    assert_eq!(maps(&second.rows), maps(&fresh.rows));
    assert_eq!(bowtag::pipeline::sweep::read_csv(&second.csv).unwrap().len(), 4);
    for plot in &second.plots {
        assert!(std::fs::read_to_string(plot).unwrap().contains("<svg"));
    }
}

fn cli(args: &[&str]) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_bowtag")).args(args).output().unwrap().status.code().unwrap()
}

#[test]
fn cli_exit_codes() {
    let store = tempfile::tempdir().unwrap();
    let s = store.path().to_str().unwrap();
    let manifest = fixture_dir().join("manifest.csv");
    let m = manifest.to_str().unwrap();
    assert_eq!(cli(&["eval", "--store", s, "--manifest", m, "--codebook-size", "16", "--head-width", "256"]), 3);
    assert_eq!(cli(&["train-ae", "--store", s, "--manifest", m, "--codebook-size", "17"]), 2);
    assert_eq!(cli(&["ingest", "--store", s, "--manifest", "/nonexistent/m.csv"]), 1);
    assert_eq!(cli(&["ingest", "--store", s, "--manifest", m]), 0);
    assert_eq!(cli(&["no-such-command"]), 2);

    let mut cfg = small_config(manifest.clone());
    cfg.head.learning_rate = 1e30;
    let path = store.path().join("diverge.json");
    std::fs::write(&path, serde_json::to_vec(&cfg).unwrap()).unwrap();
    let c = path.to_str().unwrap();
    for stage in ["train-ae", "fit-codebook", "featurize"] {
        assert_eq!(cli(&[stage, "--store", s, "--config", c]), 0, "{stage}");
    }
    assert_eq!(cli(&["train-head", "--store", s, "--config", c]), 4);

    let fx = store.path().join("fx");
    assert_eq!(cli(&["fixture", "--out", fx.to_str().unwrap(), "--clips", "3", "--seed", "2"]), 0);
    assert!(fx.join("manifest.csv").is_file());
}
