//! Independent reference implementations used by the integration and
//! acceptance tests.
#![allow(dead_code)]

use bowtag::neural::{Activation, DenseNet, LossSpec, Mode};
use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rows: usize, cols: usize, lo: f64, hi: f64, seed: u64) -> Array2<f64> {
    let mut r = rng(seed);
    Array2::from_shape_simple_fn((rows, cols), || r.random_range(lo..hi))
}

/// A random 96x100 log-mel-like chunk.
pub fn random_chunk(seed: u64) -> Array2<f64> {
    random_matrix(96, 100, 0.0, 12.0, seed)
}

// ---------------------------------------------------------------- gradients

/// One parameter coordinate: layer, weight `(row, col)` or bias `row`.
#[derive(Debug, Clone, Copy)]
pub enum Coord {
    Weight(usize, usize, usize),
    Bias(usize, usize),
}

fn param(net: &mut DenseNet<f64>, c: Coord) -> &mut f64 {
    match c {
        Coord::Weight(l, r, k) => &mut net.layers_mut()[l].weights[[r, k]],
        Coord::Bias(l, r) => &mut net.layers_mut()[l].bias[r],
    }
}

/// Moves zero-initialised biases off the ReLU kink. A row whose previous
/// layer was dropped entirely otherwise sits exactly at z = 0.
pub fn jitter_biases(net: &mut DenseNet<f64>, seed: u64) {
    let mut r = rng(seed);
    for layer in net.layers_mut() {
        layer.bias.mapv_inplace(|b| b + r.random_range(0.05..0.2) * if r.random_bool(0.5) { 1.0 } else { -1.0 });
    }
}

/// Central difference of the loss with respect to one coordinate.
pub fn central_difference(
    net: &mut DenseNet<f64>,
    c: Coord,
    x: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
    loss: LossSpec,
    mode: Mode,
    h: f64,
) -> f64 {
    let original = *param(net, c);
    *param(net, c) = original + h;
    let plus = net.loss(x, y, loss, mode).unwrap();
    *param(net, c) = original - h;
    let minus = net.loss(x, y, loss, mode).unwrap();
    *param(net, c) = original;
    (plus - minus) / (2.0 * h)
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-7)
}

/// Central difference, or `None` when some ReLU unit changes side between
/// the two evaluations; the loss is not differentiable across that step.
pub fn smooth_central_difference(
    net: &mut DenseNet<f64>,
    c: Coord,
    x: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
    loss: LossSpec,
    mode: Mode,
    h: f64,
) -> Option<f64> {
    let relu_layers: Vec<usize> =
        net.layers().iter().enumerate().filter(|(_, l)| l.activation == Activation::Relu).map(|(i, _)| i).collect();
    let eval = |net: &mut DenseNet<f64>, delta: f64| {
        let original = *param(net, c);
        *param(net, c) = original + delta;
        let trace = net.forward(x, mode).unwrap();
        *param(net, c) = original;
        let active: Vec<bool> = relu_layers.iter().flat_map(|&i| trace.activated[i].iter().map(|&v| v > 0.0)).collect();
        (loss.value(trace.output().view(), y), active)
    };
    let (plus, a) = eval(net, h);
    let (minus, b) = eval(net, -h);
    (a == b).then(|| (plus - minus) / (2.0 * h))
}

/// Result of [`sampled_gradient_check`].
#[derive(Debug, Clone, Copy)]
pub struct GradCheck {
    pub worst: f64,
    pub checked: usize,
    /// Candidates passed over because a step of h crossed a ReLU kink.
    pub kinks: usize,
}

/// Max relative error over `per_layer` weight and bias coordinates of every
/// layer. Coordinates are the largest-magnitude analytic entries among
/// `candidates` random draws, so finite-difference roundoff (about 1e-10
/// absolute in f64 at h = 1e-5) stays far below the tolerance.
#[allow(clippy::too_many_arguments)]
pub fn sampled_gradient_check(
    net: &mut DenseNet<f64>,
    x: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
    loss: LossSpec,
    mode: Mode,
    per_layer: usize,
    candidates: usize,
    seed: u64,
) -> GradCheck {
    let (_, grads) = net.loss_and_grad(x, y, loss, mode).unwrap();
    let mut r = rng(seed);
    let mut out = GradCheck {
        worst: 0.0,
        checked: 0,
        kinks: 0,
    };
    for (l, g) in grads.layers.iter().enumerate() {
        let mut weights: Vec<(f64, Coord)> = (0..candidates)
            .map(|_| {
                let (i, k) = (r.random_range(0..g.weights.nrows()), r.random_range(0..g.weights.ncols()));
                (g.weights[[i, k]].abs(), Coord::Weight(l, i, k))
            })
            .collect();
        let mut biases: Vec<(f64, Coord)> = (0..candidates.min(g.bias.len() * 4))
            .map(|_| {
                let i = r.random_range(0..g.bias.len());
                (g.bias[i].abs(), Coord::Bias(l, i))
            })
            .collect();
        weights.sort_by(|a, b| b.0.total_cmp(&a.0));
        biases.sort_by(|a, b| b.0.total_cmp(&a.0));
        for (pool, want) in [(weights, per_layer), (biases, per_layer.div_ceil(2))] {
            let mut done = 0;
            for &(_, c) in &pool {
                if done == want {
                    break;
                }
                let analytic = match c {
                    Coord::Weight(l, i, k) => grads.layers[l].weights[[i, k]],
                    Coord::Bias(l, i) => grads.layers[l].bias[i],
                };
                match smooth_central_difference(net, c, x, y, loss, mode, 1e-5) {
                    Some(numeric) => {
                        out.worst = out.worst.max(relative_error(analytic, numeric));
                        out.checked += 1;
                        done += 1;
                    }
                    None => out.kinks += 1,
                }
            }
        }
    }
    out
}

/// Every coordinate of a small network.
pub fn full_gradient_check(
    net: &mut DenseNet<f64>,
    x: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
    loss: LossSpec,
    mode: Mode,
) -> f64 {
    let (_, grads) = net.loss_and_grad(x, y, loss, mode).unwrap();
    let mut worst = 0.0f64;
    for (l, g) in grads.layers.iter().enumerate() {
        for ((i, k), &a) in g.weights.indexed_iter() {
            let n = central_difference(net, Coord::Weight(l, i, k), x, y, loss, mode, 1e-5);
            worst = worst.max(relative_error(a, n));
        }
        for (i, &a) in g.bias.iter().enumerate() {
            let n = central_difference(net, Coord::Bias(l, i), x, y, loss, mode, 1e-5);
            worst = worst.max(relative_error(a, n));
        }
    }
    worst
}

// ---------------------------------------------------------------- patching

/// Rebuilds a 96x100 chunk from a tiling family's rows.
pub fn reassemble(patches: ArrayView2<'_, f64>, rows: usize, cols: usize) -> Array2<f64> {
    let per_row = 100 / cols;
    let mut out = Array2::from_elem((96, 100), f64::NAN);
    for (p, patch) in patches.outer_iter().enumerate() {
        let (gr, gc) = (p / per_row, p % per_row);
        for (k, &v) in patch.iter().enumerate() {
            out[[gr * rows + k / cols, gc * cols + k % cols]] = v;
        }
    }
    out
}

fn keys_kernel(t: f64) -> f64 {
    // (a + 2)|t|^3 - (a + 3)|t|^2 + 1 and a|t|^3 - 5a|t|^2 + 8a|t| - 4a, a = -1/2
    let t = t.abs();
    if t < 1.0 {
        1.5 * t.powi(3) - 2.5 * t.powi(2) + 1.0
    } else if t < 2.0 {
        -0.5 * t.powi(3) + 2.5 * t.powi(2) - 4.0 * t + 2.0
    } else {
        0.0
    }
}

/// Direct non-separable bicubic resize: each output pixel sums kernel
/// weights over the whole edge-replicated input.
pub fn direct_bicubic(grid: ArrayView2<'_, f64>, out_rows: usize, out_cols: usize) -> Array2<f64> {
    let (h, w) = grid.dim();
    let (sy, sx) = (h as f64 / out_rows as f64, w as f64 / out_cols as f64);
    let mut out = Array2::zeros((out_rows, out_cols));
    for i in 0..out_rows {
        let y = (i as f64 + 0.5) * sy - 0.5;
        for j in 0..out_cols {
            let x = (j as f64 + 0.5) * sx - 0.5;
            let mut acc = 0.0;
            for r in -2..h as isize + 2 {
                let wy = keys_kernel(y - r as f64);
                if wy == 0.0 {
                    continue;
                }
                let rr = r.clamp(0, h as isize - 1) as usize;
                for c in -2..w as isize + 2 {
                    let wx = keys_kernel(x - c as f64);
                    if wx != 0.0 {
                        acc += wy * wx * grid[[rr, c.clamp(0, w as isize - 1) as usize]];
                    }
                }
            }
            out[[i, j]] = acc;
        }
    }
    out
}

// ---------------------------------------------------------------- clustering

/// Isotropic Gaussian blobs with centers on a scaled grid of random points.
pub fn blobs(k: usize, per_blob: usize, dim: usize, separation: f64, spread: f64, seed: u64) -> (Array2<f32>, Vec<usize>) {
    use rand_distr::{Distribution, Normal};
    let mut r = rng(seed);
    // centers: random points re-drawn until pairwise distance >= separation
    let mut centers: Vec<Vec<f64>> = Vec::new();
    let box_side = separation * (k as f64).powf(1.0 / dim as f64) * 3.0;
    while centers.len() < k {
        let c: Vec<f64> = (0..dim).map(|_| r.random_range(0.0..box_side)).collect();
        if centers
            .iter()
            .all(|o| o.iter().zip(&c).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() >= separation)
        {
            centers.push(c);
        }
    }
    let noise = Normal::new(0.0, spread).unwrap();
    let mut data = Array2::zeros((k * per_blob, dim));
    let mut labels = Vec::with_capacity(k * per_blob);
    for i in 0..k * per_blob {
        let b = i % k;
        for d in 0..dim {
            data[[i, d]] = (centers[b][d] + noise.sample(&mut r)) as f32;
        }
        labels.push(b);
    }
    (data, labels)
}

fn choose2(n: u64) -> f64 {
    (n * n.saturating_sub(1)) as f64 / 2.0
}

/// Hubert-Arabie adjusted Rand index from the contingency table.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    use std::collections::HashMap;
    let mut table: HashMap<(usize, usize), u64> = HashMap::new();
    let mut ra: HashMap<usize, u64> = HashMap::new();
    let mut rb: HashMap<usize, u64> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *ra.entry(x).or_default() += 1;
        *rb.entry(y).or_default() += 1;
    }
    let index: f64 = table.values().map(|&n| choose2(n)).sum();
    let sa: f64 = ra.values().map(|&n| choose2(n)).sum();
    let sb: f64 = rb.values().map(|&n| choose2(n)).sum();
    let expected = sa * sb / choose2(a.len() as u64);
    let max = 0.5 * (sa + sb);
    if max == expected {
        return 1.0;
    }
    (index - expected) / (max - expected)
}

/// Exhaustive nearest centroid, lowest index on ties.
pub fn brute_nearest(v: &[f32], centroids: ArrayView2<'_, f32>) -> usize {
    let mut best = (usize::MAX, f64::INFINITY);
    for (j, c) in centroids.outer_iter().enumerate() {
        let d: f64 = v.iter().zip(c).map(|(&a, &b)| (a as f64 - b as f64).powi(2)).sum();
        if d < best.1 {
            best = (j, d);
        }
    }
    best.0
}

/// Histogram by direct counting.
pub fn count_codes(codes: &[usize], d: usize) -> Vec<u32> {
    (0..d).map(|k| codes.iter().filter(|&&c| c == k).count() as u32).collect()
}

// ---------------------------------------------------------------- metrics

/// AP straight from the definition: for each positive, precision over all
/// items ranked at or above it (ties resolved by input position).
pub fn brute_force_ap(scores: &[f64], labels: &[bool]) -> Option<f64> {
    let n = scores.len();
    let above = |i: usize, j: usize| scores[j] > scores[i] || (scores[j] == scores[i] && j <= i);
    let positives: Vec<usize> = (0..n).filter(|&i| labels[i]).collect();
    if positives.is_empty() {
        return None;
    }
    let total: f64 = positives
        .iter()
        .map(|&i| {
            let ranked: Vec<usize> = (0..n).filter(|&j| above(i, j)).collect();
            ranked.iter().filter(|&&j| labels[j]).count() as f64 / ranked.len() as f64
        })
        .sum();
    Some(total / positives.len() as f64)
}

pub fn brute_force_macro_map(scores: &Array2<f64>, labels: &Array2<bool>) -> Option<f64> {
    let aps: Vec<f64> = (0..scores.ncols())
        .filter_map(|c| brute_force_ap(&scores.column(c).to_vec(), &labels.column(c).to_vec()))
        .collect();
    (!aps.is_empty()).then(|| aps.iter().sum::<f64>() / aps.len() as f64)
}

/// Mean class prevalence, the expected AP of a random ranking.
pub fn prevalence_baseline(labels: &Array2<bool>) -> f64 {
    let prevalences: Vec<f64> = labels
        .columns()
        .into_iter()
        .map(|c| c.iter().filter(|&&l| l).count() as f64 / c.len() as f64)
        .filter(|&p| p > 0.0)
        .collect();
    prevalences.iter().sum::<f64>() / prevalences.len() as f64
}
