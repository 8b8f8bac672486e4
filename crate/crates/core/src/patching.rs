//! The four patch families cut from a 96x100 chunk.
//!
//! | family               | patch    | per chunk | dim |
//! |----------------------|----------|-----------|-----|
//! | `SpectralPatch`      | 8 x 10   | 120       | 80  |
//! | `FreqBandEnvelope`   | 8 x 100  | 12        | 800 |
//! | `SpectralEnvelope`   | 96 x 10  | 10        | 960 |
//! | `WholeSpectrogram`   | 8 x 10   | 1         | 80  |
//!
//! Every patch is flattened row-major (mel bin major, frame minor). Spectral
//! patches are ordered band-major: index `band * 10 + slot`. The whole
//! spectrogram thumbnail is a Catmull-Rom bicubic resize with half-pixel
//! centers and clamp-to-edge sampling.

use ndarray::{s, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::audio::{CHUNK_FRAMES, MEL_BINS};
use crate::error::{Error, Result};

/// Total patches per chunk across the four families.
pub const PATCHES_PER_CHUNK: usize = 143;

const BAND_ROWS: usize = 8;
const SLOT_COLS: usize = 10;
const THUMB_ROWS: usize = 8;
const THUMB_COLS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatchFamily {
    SpectralPatch,
    FreqBandEnvelope,
    SpectralEnvelope,
    WholeSpectrogram,
}

impl PatchFamily {
    /// Fixed family order used for feature blocks and encoder banks.
    pub const ALL: [PatchFamily; 4] = [
        PatchFamily::SpectralPatch,
        PatchFamily::FreqBandEnvelope,
        PatchFamily::SpectralEnvelope,
        PatchFamily::WholeSpectrogram,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn patch_rows(self) -> usize {
        match self {
            PatchFamily::SpectralPatch | PatchFamily::FreqBandEnvelope => BAND_ROWS,
            PatchFamily::SpectralEnvelope => MEL_BINS,
            PatchFamily::WholeSpectrogram => THUMB_ROWS,
        }
    }

    pub fn patch_cols(self) -> usize {
        match self {
            PatchFamily::SpectralPatch | PatchFamily::SpectralEnvelope => SLOT_COLS,
            PatchFamily::FreqBandEnvelope => CHUNK_FRAMES,
            PatchFamily::WholeSpectrogram => THUMB_COLS,
        }
    }

    pub fn count_per_chunk(self) -> usize {
        match self {
            PatchFamily::SpectralPatch => (MEL_BINS / BAND_ROWS) * (CHUNK_FRAMES / SLOT_COLS),
            PatchFamily::FreqBandEnvelope => MEL_BINS / BAND_ROWS,
            PatchFamily::SpectralEnvelope => CHUNK_FRAMES / SLOT_COLS,
            PatchFamily::WholeSpectrogram => 1,
        }
    }

    pub fn input_dim(self) -> usize {
        self.patch_rows() * self.patch_cols()
    }

    /// Short tag used in file names and reports.
    pub fn tag(self) -> &'static str {
        match self {
            PatchFamily::SpectralPatch => "pat",
            PatchFamily::FreqBandEnvelope => "fenv",
            PatchFamily::SpectralEnvelope => "env",
            PatchFamily::WholeSpectrogram => "o",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.tag() == tag)
    }
}

impl std::fmt::Display for PatchFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

/// Flattened patches of one chunk, one `count x dim` matrix per family.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchSet {
    blocks: [Array2<f64>; 4],
}

impl PatchSet {
    pub fn family(&self, family: PatchFamily) -> ArrayView2<'_, f64> {
        self.blocks[family.index()].view()
    }

    pub fn total(&self) -> usize {
        self.blocks.iter().map(|b| b.nrows()).sum()
    }
}

fn check_chunk(chunk: &ArrayView2<'_, f64>) -> Result<()> {
    if chunk.dim() != (MEL_BINS, CHUNK_FRAMES) {
        return Err(Error::shape(
            format!("{MEL_BINS}x{CHUNK_FRAMES} chunk"),
            format!("{}x{}", chunk.nrows(), chunk.ncols()),
        ));
    }
    Ok(())
}

/// Tiles `chunk` into non-overlapping `rows x cols` blocks, row-major over
/// the block grid, each block flattened row-major.
fn tile(chunk: &ArrayView2<'_, f64>, rows: usize, cols: usize) -> Array2<f64> {
    let grid_rows = chunk.nrows() / rows;
    let grid_cols = chunk.ncols() / cols;
    let mut out = Array2::zeros((grid_rows * grid_cols, rows * cols));
    for gr in 0..grid_rows {
        for gc in 0..grid_cols {
            let block = chunk.slice(s![gr * rows..(gr + 1) * rows, gc * cols..(gc + 1) * cols]);
            let mut dst = out.row_mut(gr * grid_cols + gc);
            for (d, &v) in dst.iter_mut().zip(block.iter()) {
                *d = v;
            }
        }
    }
    out
}

/// 120 patches of 8 bins x 10 frames, band-major.
pub fn extract_spectral_patches(chunk: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    check_chunk(&chunk)?;
    Ok(tile(&chunk, BAND_ROWS, SLOT_COLS))
}

/// 12 strips of 8 bins across all 100 frames, ascending frequency.
pub fn extract_freq_band_envelopes(chunk: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    check_chunk(&chunk)?;
    Ok(tile(&chunk, BAND_ROWS, CHUNK_FRAMES))
}

/// 10 slabs of all 96 bins across 10 frames, ascending time.
pub fn extract_spectral_envelopes(chunk: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    check_chunk(&chunk)?;
    Ok(tile(&chunk, MEL_BINS, SLOT_COLS))
}

/// The 8x10 bicubic thumbnail as a single 80-dim row.
pub fn downsample_whole(chunk: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    check_chunk(&chunk)?;
    let thumb = resize_bicubic(chunk, THUMB_ROWS, THUMB_COLS);
    Ok(thumb
        .into_shape_with_order((1, THUMB_ROWS * THUMB_COLS))
        .expect("contiguous thumbnail"))
}

pub fn extract_patches(chunk: ArrayView2<'_, f64>) -> Result<PatchSet> {
    Ok(PatchSet {
        blocks: [
            extract_spectral_patches(chunk)?,
            extract_freq_band_envelopes(chunk)?,
            extract_spectral_envelopes(chunk)?,
            downsample_whole(chunk)?,
        ],
    })
}

/// Keys cubic convolution kernel with `a = -0.5` (Catmull-Rom).
pub fn cubic_kernel(x: f64) -> f64 {
    const A: f64 = -0.5;
    let x = x.abs();
    if x <= 1.0 {
        ((A + 2.0) * x - (A + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((A * x - 5.0 * A) * x + 8.0 * A) * x - 4.0 * A
    } else {
        0.0
    }
}

/// Four (clamped index, weight) taps for each output position.
fn axis_taps(input: usize, output: usize) -> Vec<[(usize, f64); 4]> {
    let scale = input as f64 / output as f64;
    (0..output)
        .map(|o| {
            let src = (o as f64 + 0.5) * scale - 0.5;
            let base = src.floor();
            let t = src - base;
            let mut taps = [(0usize, 0.0f64); 4];
            for (k, tap) in taps.iter_mut().enumerate() {
                let idx = (base as isize + k as isize - 1).clamp(0, input as isize - 1) as usize;
                *tap = (idx, cubic_kernel(t + 1.0 - k as f64));
            }
            taps
        })
        .collect()
}

/// Separable bicubic resize (rows pass, then columns).
pub fn resize_bicubic(grid: ArrayView2<'_, f64>, out_rows: usize, out_cols: usize) -> Array2<f64> {
    let row_taps = axis_taps(grid.nrows(), out_rows);
    let col_taps = axis_taps(grid.ncols(), out_cols);
    let mut rows_done = Array2::<f64>::zeros((out_rows, grid.ncols()));
    for (r, taps) in row_taps.iter().enumerate() {
        for c in 0..grid.ncols() {
            rows_done[[r, c]] = taps.iter().map(|&(i, w)| w * grid[[i, c]]).sum();
        }
    }
    let mut out = Array2::<f64>::zeros((out_rows, out_cols));
    for r in 0..out_rows {
        for (c, taps) in col_taps.iter().enumerate() {
            out[[r, c]] = taps.iter().map(|&(j, w)| w * rows_done[[r, j]]).sum();
        }
    }
    out
}
