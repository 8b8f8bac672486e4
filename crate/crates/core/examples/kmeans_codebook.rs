//! k-means on three 2-D blobs, then the same data as a codebook.

use bowtag::codebook::{fit_kmeans, Codebook, KMeansConfig};
use bowtag::patching::PatchFamily;
use ndarray::{array, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> bowtag::Result<()> {
    let centers = [[0.0f32, 0.0], [6.0, 1.0], [2.0, 7.0]];
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let data = Array2::from_shape_fn((300, 2), |(i, d)| centers[i % 3][d] + rng.random_range(-1.0f32..1.0));

    let fit = fit_kmeans(data.view(), 3, &KMeansConfig::default(), 42)?;
    println!("converged={} after {} iterations, inertia {:.3}", fit.converged, fit.iterations, fit.inertia);
    println!("inertia per iteration: {:?}", fit.inertia_history.iter().map(|v| format!("{v:.1}")).collect::<Vec<_>>());
    for c in fit.centroids.outer_iter() {
        println!("  centroid ({:6.3}, {:6.3})", c[0], c[1]);
    }

    // codebooks carry the family and compression they were fitted for;
    // the whole-chunk family at F=40 has a 2-dim bottleneck
    let (book, _) = Codebook::fit(PatchFamily::WholeSpectrogram, 40, data.view(), 3, &KMeansConfig::default(), 42)?;
    for probe in [array![0.5f32, -0.2], array![5.0, 2.0], array![2.5, 6.0]] {
        println!("{probe} -> codeword {}", book.assign(probe.view())?);
    }
    let bytes = book.to_bytes()?;
    let back = Codebook::from_bytes(&bytes)?;
    println!("{} round-trips: {}", book.file_name(), back == book);
    Ok(())
}
