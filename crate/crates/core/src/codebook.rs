//! k-means codebooks over bottleneck vectors and bag-of-codewords features.
//!
//! Each family gets one codebook of `D` centroids shared by all of its
//! patch positions. A chunk's feature vector is the concatenation of the
//! four per-family code histograms in the order (pat | fenv | env | o), so
//! its blocks sum to (120, 12, 10, 1).

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encoder::EncodedChunk;
use crate::error::{Error, Result};
use crate::format::{self, PayloadReader};
use crate::patching::PatchFamily;
use crate::seed;

const MAGIC: &[u8; 8] = b"BOWTAGCB";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KMeansConfig {
    pub max_iters: usize,
    /// Convergence when the summed squared centroid shift falls below
    /// `tolerance` times the mean per-dimension variance of the data.
    pub tolerance: f64,
    /// Optional cap on the number of vectors used for fitting, drawn
    /// uniformly without replacement.
    pub max_samples: Option<usize>,
    /// Independent k-means++ seedings; the run with the lowest inertia wins.
    pub restarts: usize,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            max_iters: 300,
            tolerance: 1e-4,
            max_samples: None,
            restarts: 3,
        }
    }
}

/// Result of a k-means run.
#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    /// `[D x dim]`, rounded to `f32` precision.
    pub centroids: Array2<f32>,
    /// Within-cluster sum of squares of the fitting data under `centroids`.
    pub inertia: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Inertia after each Lloyd assignment step.
    pub inertia_history: Vec<f64>,
}

#[inline]
fn sq_dist(a: ArrayView1<'_, f32>, b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(&x, &c)| (x as f64 - c) * (x as f64 - c)).sum()
}

/// Nearest centroid by squared Euclidean distance, lowest index on ties.
fn nearest(v: ArrayView1<'_, f32>, centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = sq_dist(v, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn assign_all(data: ArrayView2<'_, f32>, centroids: &[Vec<f64>]) -> Vec<(usize, f64)> {
    (0..data.nrows())
        .into_par_iter()
        .map(|i| nearest(data.row(i), centroids))
        .collect()
}

fn sample_weighted(rng: &mut ChaCha8Rng, weights: &[f64], total: f64) -> usize {
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        acc += w;
        if acc > target {
            return i;
        }
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

/// Greedy k-means++ seeding with `2 + ln k` candidates per step.
fn kmeans_plus_plus(data: ArrayView2<'_, f32>, k: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<f64>>> {
    let n = data.nrows();
    let row = |i: usize| data.row(i).iter().map(|&v| v as f64).collect::<Vec<f64>>();
    let trials = 2 + (k as f64).ln().floor() as usize;
    let mut centroids = vec![row(rng.random_range(0..n))];
    let mut closest: Vec<f64> = (0..n).into_par_iter().map(|i| sq_dist(data.row(i), &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = closest.iter().sum();
        if total <= 0.0 {
            return Err(Error::InsufficientData(format!(
                "only {} distinct vectors for {k} clusters",
                centroids.len()
            )));
        }
        let mut best: Option<(f64, usize, Vec<f64>)> = None;
        for _ in 0..trials {
            let candidate = sample_weighted(rng, &closest, total);
            let c = row(candidate);
            let updated: Vec<f64> = (0..n)
                .into_par_iter()
                .map(|i| closest[i].min(sq_dist(data.row(i), &c)))
                .collect();
            let potential: f64 = updated.iter().sum();
            if best.as_ref().is_none_or(|(p, _, _)| potential < *p) {
                best = Some((potential, candidate, updated));
            }
        }
        let (_, chosen, updated) = best.expect("at least one trial");
        closest = updated;
        centroids.push(row(chosen));
    }
    Ok(centroids)
}

fn round_f32(centroids: &[Vec<f64>]) -> Vec<Vec<f64>> {
    centroids
        .iter()
        .map(|c| c.iter().map(|&v| v as f32 as f64).collect())
        .collect()
}

/// k-means++ initialization followed by Lloyd iterations.
///
/// Empty clusters are re-seeded with the points farthest from their current
/// centroid. Deterministic for a given `seed`.
pub fn fit_kmeans(vectors: ArrayView2<'_, f32>, k: usize, cfg: &KMeansConfig, seed: u64) -> Result<KMeansFit> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("codebook size {k} must be at least 2")));
    }
    if vectors.nrows() < k {
        return Err(Error::InsufficientData(format!(
            "{} vectors for {k} clusters",
            vectors.nrows()
        )));
    }
    if vectors.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("k-means input".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let subset;
    let data = match cfg.max_samples {
        Some(m) if m >= k && m < vectors.nrows() => {
            let mut rows = rand::seq::index::sample(&mut rng, vectors.nrows(), m).into_vec();
            rows.sort_unstable();
            subset = vectors.select(ndarray::Axis(0), &rows);
            subset.view()
        }
        _ => vectors,
    };
    let n = data.nrows();
    let dim = data.ncols();

    let mean_var = {
        let mut total = 0.0;
        for col in data.columns() {
            let m = col.iter().map(|&v| v as f64).sum::<f64>() / n as f64;
            total += col.iter().map(|&v| (v as f64 - m).powi(2)).sum::<f64>() / n as f64;
        }
        total / dim.max(1) as f64
    };
    let threshold = cfg.tolerance * mean_var;

    let mut best = lloyd(data, k, cfg.max_iters, threshold, &mut rng)?;
    for r in 1..cfg.restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(seed, &[r as u64]));
        let fit = lloyd(data, k, cfg.max_iters, threshold, &mut rng)?;
        if fit.inertia < best.inertia {
            best = fit;
        }
    }
    Ok(best)
}

fn lloyd(data: ArrayView2<'_, f32>, k: usize, max_iters: usize, threshold: f64, rng: &mut ChaCha8Rng) -> Result<KMeansFit> {
    let (n, dim) = data.dim();
    let mut centroids = kmeans_plus_plus(data, k, rng)?;
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iters {
        iterations += 1;
        let assigned = assign_all(data, &centroids);
        history.push(assigned.iter().map(|a| a.1).sum());

        let mut sums = vec![vec![0.0f64; dim]; k];
        let mut counts = vec![0usize; k];
        for (i, &(label, _)) in assigned.iter().enumerate() {
            counts[label] += 1;
            for (s, &v) in sums[label].iter_mut().zip(data.row(i)) {
                *s += v as f64;
            }
        }
        let mut farthest: Vec<usize> = Vec::new();
        if counts.contains(&0) {
            farthest = (0..n).collect();
            farthest.sort_by(|&a, &b| assigned[b].1.total_cmp(&assigned[a].1).then(a.cmp(&b)));
        }
        let mut next_far = farthest.into_iter();
        let mut shift = 0.0;
        for j in 0..k {
            let updated: Vec<f64> = if counts[j] > 0 {
                sums[j].iter().map(|s| s / counts[j] as f64).collect()
            } else {
                let p = next_far.next().expect("more points than clusters");
                data.row(p).iter().map(|&v| v as f64).collect()
            };
            shift += updated.iter().zip(&centroids[j]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
            centroids[j] = updated;
        }
        if shift <= threshold {
            converged = true;
            break;
        }
    }

    let centroids = round_f32(&centroids);
    let inertia = assign_all(data, &centroids).iter().map(|a| a.1).sum();
    let flat: Vec<f32> = centroids.iter().flatten().map(|&v| v as f32).collect();
    Ok(KMeansFit {
        centroids: Array2::from_shape_vec((k, dim), flat).expect("k x dim"),
        inertia,
        iterations,
        converged,
        inertia_history: history,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodebookHeader {
    pub family: PatchFamily,
    pub compression: u32,
    pub size: usize,
    pub dim: usize,
    pub seed: u64,
    pub inertia: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    pub header: CodebookHeader,
    centroids: Array2<f32>,
    centroids_f64: Vec<Vec<f64>>,
}

impl Codebook {
    pub fn fit(
        family: PatchFamily,
        compression: u32,
        vectors: ArrayView2<'_, f32>,
        size: usize,
        cfg: &KMeansConfig,
        seed: u64,
    ) -> Result<(Self, KMeansFit)> {
        let fit = fit_kmeans(vectors, size, cfg, seed)?;
        let header = CodebookHeader {
            family,
            compression,
            size,
            dim: vectors.ncols(),
            seed,
            inertia: fit.inertia,
            iterations: fit.iterations,
            converged: fit.converged,
        };
        Ok((Self::from_parts(header, fit.centroids.clone()), fit))
    }

    fn from_parts(header: CodebookHeader, centroids: Array2<f32>) -> Self {
        let centroids_f64 = centroids
            .outer_iter()
            .map(|r| r.iter().map(|&v| v as f64).collect())
            .collect();
        Self {
            header,
            centroids,
            centroids_f64,
        }
    }

    pub fn family(&self) -> PatchFamily {
        self.header.family
    }

    pub fn size(&self) -> usize {
        self.header.size
    }

    pub fn dim(&self) -> usize {
        self.header.dim
    }

    pub fn centroids(&self) -> ArrayView2<'_, f32> {
        self.centroids.view()
    }

    /// Code of the nearest centroid; ties go to the lowest index.
    pub fn assign(&self, vector: ArrayView1<'_, f32>) -> Result<usize> {
        if vector.len() != self.dim() {
            return Err(Error::shape(format!("{}-dim vector", self.dim()), vector.len()));
        }
        Ok(nearest(vector, &self.centroids_f64).0)
    }

    /// Sum of squared distances of `vectors` to their nearest centroids.
    pub fn inertia(&self, vectors: ArrayView2<'_, f32>) -> Result<f64> {
        if vectors.ncols() != self.dim() {
            return Err(Error::shape(format!("{}-dim vectors", self.dim()), vectors.ncols()));
        }
        Ok(assign_all(vectors, &self.centroids_f64).iter().map(|a| a.1).sum())
    }

    pub fn file_name(&self) -> String {
        codebook_file_name(self.header.family, self.header.compression, self.header.size)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut payload = Vec::with_capacity(self.centroids.len() * 4);
        format::push_f32s(&mut payload, self.centroids.iter().copied());
        format::encode(MAGIC, &self.header, &payload)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (header, payload): (CodebookHeader, _) = format::decode(MAGIC, bytes)?;
        let mut reader = PayloadReader::new(payload);
        let values = reader.f32s(header.size * header.dim)?;
        reader.finish()?;
        let centroids = Array2::from_shape_vec((header.size, header.dim), values).expect("sized by reader");
        Ok(Self::from_parts(header, centroids))
    }
}

pub fn codebook_file_name(family: PatchFamily, compression: u32, size: usize) -> String {
    format!("cb_{}_F{}_D{}.codebook", family.tag(), compression, size)
}

/// The four per-family codebooks of one (F, D) configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct CodebookSet {
    books: [Codebook; 4],
}

impl CodebookSet {
    pub fn new(books: Vec<Codebook>) -> Result<Self> {
        let mut slots: [Option<Codebook>; 4] = Default::default();
        let key = books.first().map(|b| (b.header.compression, b.size()));
        for b in books {
            if Some((b.header.compression, b.size())) != key {
                return Err(Error::ConfigMismatch(format!(
                    "codebooks disagree on (F, D): {key:?} vs ({}, {})",
                    b.header.compression,
                    b.size()
                )));
            }
            let slot = &mut slots[b.family().index()];
            if slot.is_some() {
                return Err(Error::ConfigMismatch(format!("duplicate {} codebook", b.family())));
            }
            *slot = Some(b);
        }
        match slots {
            [Some(a), Some(b), Some(c), Some(d)] => Ok(Self { books: [a, b, c, d] }),
            _ => Err(Error::ConfigMismatch("codebook set must cover all four families".into())),
        }
    }

    pub fn size(&self) -> usize {
        self.books[0].size()
    }

    pub fn compression(&self) -> u32 {
        self.books[0].header.compression
    }

    pub fn book(&self, family: PatchFamily) -> &Codebook {
        &self.books[family.index()]
    }

    pub fn books(&self) -> &[Codebook; 4] {
        &self.books
    }

    /// Per-family code histograms of one encoded chunk.
    pub fn featurize(&self, encoded: &EncodedChunk) -> Result<FeatureVector> {
        let d = self.size();
        let mut counts = vec![0u32; 4 * d];
        for family in PatchFamily::ALL {
            let book = self.book(family);
            let block = encoded.family(family);
            if block.ncols() != book.dim() {
                return Err(Error::ConfigMismatch(format!(
                    "{family} codes are {}-dim but the codebook is {}-dim",
                    block.ncols(),
                    book.dim()
                )));
            }
            let offset = family.index() * d;
            for v in block.outer_iter() {
                counts[offset + book.assign(v)?] += 1;
            }
        }
        Ok(FeatureVector { size: d, counts })
    }
}

/// Concatenated bag-of-codewords counts, `4 * size` entries.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureVector {
    size: usize,
    counts: Vec<u32>,
}

impl FeatureVector {
    pub fn new(size: usize, counts: Vec<u32>) -> Result<Self> {
        if counts.len() != 4 * size {
            return Err(Error::shape(4 * size, counts.len()));
        }
        Ok(Self { size, counts })
    }

    /// Histogram from explicit per-family code lists.
    pub fn from_codes(size: usize, codes: [&[usize]; 4]) -> Result<Self> {
        let mut counts = vec![0u32; 4 * size];
        for (block, list) in codes.iter().enumerate() {
            for &c in *list {
                if c >= size {
                    return Err(Error::InvalidArgument(format!("code {c} outside [0, {size})")));
                }
                counts[block * size + c] += 1;
            }
        }
        Ok(Self { size, counts })
    }

    pub fn codebook_size(&self) -> usize {
        self.size
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn block(&self, family: PatchFamily) -> &[u32] {
        let start = family.index() * self.size;
        &self.counts[start..start + self.size]
    }

    pub fn block_sums(&self) -> [u32; 4] {
        PatchFamily::ALL.map(|f| self.block(f).iter().sum())
    }

    pub fn total(&self) -> u32 {
        self.counts.iter().sum()
    }

    /// Zeroes each entry independently with probability `p`.
    pub fn mask(&self, p: f64, seed: u64) -> Result<FeatureVector> {
        mask_counts(self, p, seed)
    }
}

/// Zeroes each of the `4 * D` positions independently with probability `p`.
/// Unmasked entries are left untouched.
pub fn mask_counts(fv: &FeatureVector, p: f64, seed: u64) -> Result<FeatureVector> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("mask probability {p} outside [0, 1]")));
    }
    let mut out = fv.clone();
    if p == 0.0 {
        return Ok(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for c in out.counts.iter_mut() {
        if rng.random::<f64>() < p {
            *c = 0;
        }
    }
    Ok(out)
}
