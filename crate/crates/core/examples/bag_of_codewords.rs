//! Code histograms: four blocks of D counts, 143 codes per chunk, and
//! input masking.

use bowtag::codebook::{mask_counts, FeatureVector};
use bowtag::patching::PatchFamily;

fn main() -> bowtag::Result<()> {
    let d = 8;
    let pat: Vec<usize> = (0..120).map(|i| (i * 7) % d).collect();
    let fenv: Vec<usize> = (0..12).map(|i| i % 3).collect();
    let env: Vec<usize> = (0..10).map(|i| (i / 2) % d).collect();
    let whole = [5];
    let fv = FeatureVector::from_codes(d, [&pat, &fenv, &env, &whole])?;

    for f in PatchFamily::ALL {
        println!("{:<5} {:?}", f.tag(), fv.block(f));
    }
    println!("block sums {:?}, total {}", fv.block_sums(), fv.total());

    for p in [0.0, 0.35, 1.0] {
        let masked = mask_counts(&fv, p, 3)?;
        let kept = masked.counts().iter().filter(|&&c| c > 0).count();
        let nonzero = fv.counts().iter().filter(|&&c| c > 0).count();
        println!("mask p={p:.2}: {kept}/{nonzero} nonzero entries kept, total {}", masked.total());
    }
    Ok(())
}
