//! Trains the MLP head on synthetic count vectors where each class is
//! signalled by a few codewords, then scores chunks and a clip.

use bowtag::classifier::{train_head, HeadSpec, HeadTrainConfig, LabeledChunks};
use bowtag::codebook::FeatureVector;
use bowtag::metrics::{macro_map, EvalTable};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const D: usize = 16;
const CLASSES: usize = 3;

fn split(n: usize, rng: &mut ChaCha8Rng) -> bowtag::Result<LabeledChunks> {
    let mut features = Vec::with_capacity(n);
    let mut labels = Array2::from_elem((n, CLASSES), false);
    for i in 0..n {
        let active: Vec<usize> = (0..CLASSES).filter(|_| rng.random_bool(0.4)).collect();
        // class c favours codewords 4c..4c+3 in the patch block
        let mut draw = |count: usize| -> Vec<usize> {
            (0..count)
                .map(|_| match active.get(rng.random_range(0..active.len() + 1)) {
                    Some(&c) if rng.random_bool(0.5) => 4 * c + rng.random_range(0..4),
                    _ => rng.random_range(0..D),
                })
                .collect()
        };
        let (a, b, c, d) = (draw(120), draw(12), draw(10), draw(1));
        features.push(FeatureVector::from_codes(D, [&a, &b, &c, &d])?);
        for &c in &active {
            labels[[i, c]] = true;
        }
    }
    LabeledChunks::new(features, labels)
}

fn main() -> bowtag::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let train = split(600, &mut rng)?;
    let val = split(200, &mut rng)?;
    let test = split(200, &mut rng)?;

    let cfg = HeadTrainConfig {
        max_epochs: 60,
        batch_size: 32,
        ..Default::default()
    };
    let (head, report) = train_head(&train, &val, HeadSpec::new(D, 64, 0.1, CLASSES), 10, 0.2, &cfg, 9)?;
    for e in report.epochs.iter().step_by(5) {
        println!("epoch {:3}  train loss {:.4}  val mAP {:.4}", e.epoch, e.train_loss, e.val_map);
    }
    println!("best epoch {} (val mAP {:.4}), stopped early: {}", report.best_epoch, report.best_val_map, report.stopped_early);

    let scores = head.predict_chunks(&test.features)?;
    let table = EvalTable::new(scores, test.labels.clone())?;
    println!("test chunk mAP {:.4}", macro_map(&table)?);

    let clip = head.predict_clip(&test.features[..5])?;
    println!("clip scores over 5 chunks: {:?}", clip.iter().map(|p| format!("{p:.3}")).collect::<Vec<_>>());
    Ok(())
}
