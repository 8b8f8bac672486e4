//! The four views of one 96x100 chunk, and the bicubic resize behind the
//! whole-chunk view.

use bowtag::patching::{extract_patches, resize_bicubic, PatchFamily};
use ndarray::Array2;

fn main() -> bowtag::Result<()> {
    // a diagonal ridge on a gentle gradient
    let chunk = Array2::from_shape_fn((96, 100), |(r, c)| {
        let ridge = (-((r as f64 - c as f64 * 0.96).powi(2)) / 18.0).exp();
        4.0 * ridge + r as f64 / 96.0
    });
    let patches = extract_patches(chunk.view())?;
    for f in PatchFamily::ALL {
        let block = patches.family(f);
        println!(
            "{:<5} {:>2}x{:<3} -> {:>3} patches of dim {:>3}",
            f.tag(),
            f.patch_rows(),
            f.patch_cols(),
            block.nrows(),
            block.ncols()
        );
    }
    println!("total patches per chunk: {}", patches.total());

    let small = patches.family(PatchFamily::WholeSpectrogram).to_shape((8, 10)).unwrap().to_owned();
    println!("\nwhole chunk at 8x10:");
    for row in small.outer_iter() {
        println!("  {}", row.iter().map(|v| format!("{v:5.2}")).collect::<Vec<_>>().join(" "));
    }

    // upsampling a checkerboard; the negative lobe overshoots at the corners
    let tiny = ndarray::array![[0.0, 1.0], [1.0, 0.0]];
    println!("\n2x2 -> 4x4:");
    for row in resize_bicubic(tiny.view(), 4, 4).outer_iter() {
        println!("  {}", row.iter().map(|v| format!("{v:6.3}")).collect::<Vec<_>>().join(" "));
    }
    Ok(())
}
