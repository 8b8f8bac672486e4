//! Grid sweeps over (D, head width, head dropout, mask_p) with resumption.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use plotters::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::manifest::{sha256_hex, Split};
use super::stages::{Pipeline, Stage};
use super::store::ArtifactStore;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub codebook_size: usize,
    pub head_width: usize,
    pub head_dropout: f64,
    pub mask_p: f64,
    pub val_chunk_map: f64,
    pub val_clip_map: f64,
    pub test_chunk_map: f64,
    pub test_clip_map: f64,
    pub head_seconds: f64,
    pub eval_seconds: f64,
    pub eval_key: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    /// Cells whose evaluation already existed in the store.
    pub skipped: usize,
    pub computed: usize,
    pub csv: PathBuf,
    pub plots: Vec<PathBuf>,
}

/// Runs every cell of `base.sweep` at `base.compression`, skipping cells
/// whose evaluation artifact already exists, and writes `results.csv` plus
/// two SVG plots under `<store>/sweeps/<grid hash>/`.
pub fn sweep(base: &RunConfig, store: &ArtifactStore) -> Result<SweepResult> {
    base.validate()?;
    let grid = &base.sweep;
    if grid.cells() == 0 {
        return Err(Error::Validation("sweep grid has an empty axis".into()));
    }
    let mut rows = Vec::with_capacity(grid.cells());
    let (mut skipped, mut computed) = (0, 0);
    for &d in &grid.codebook_sizes {
        for &width in &grid.head_widths {
            for &dropout in &grid.head_dropouts {
                for &mask_p in &grid.mask_ps {
                    let cfg = RunConfig {
                        codebook_size: d,
                        head_width: width,
                        head_dropout: dropout,
                        mask_p,
                        ..base.clone()
                    };
                    let p = Pipeline::new(store.clone(), cfg)?;
                    let eval_key = p.key(Stage::Eval)?;
                    if store.contains(Stage::Eval.kind(), &eval_key) {
                        skipped += 1;
                    } else {
                        for stage in Stage::ALL {
                            p.run_stage(stage)?;
                        }
                        computed += 1;
                    }
                    let report = p.eval_report()?;
                    let seconds = p.stage_seconds()?;
                    let get = |s: Split, clip| report.map(s, clip).unwrap_or(f64::NAN);
                    rows.push(SweepRow {
                        codebook_size: d,
                        head_width: width,
                        head_dropout: dropout,
                        mask_p,
                        val_chunk_map: get(Split::Val, false),
                        val_clip_map: get(Split::Val, true),
                        test_chunk_map: get(Split::Test, false),
                        test_clip_map: get(Split::Test, true),
                        head_seconds: seconds.get(Stage::TrainHead.name()).copied().unwrap_or(0.0),
                        eval_seconds: seconds.get(Stage::Eval.name()).copied().unwrap_or(0.0),
                        eval_key,
                    });
                }
            }
        }
    }

    let grid_id = sha256_hex(serde_json::to_string(&serde_json::json!({
        "base": Pipeline::new(store.clone(), base.clone())?.key(Stage::Featurize)?,
        "grid": grid,
        "head": base.head,
        "seed": base.seed,
    }))?.as_bytes());
    let dir = store.root().join("sweeps").join(&grid_id[..16]);
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let csv_path = dir.join("results.csv");
    write_csv(&rows, &csv_path)?;
    let plots = vec![
        plot_map_vs_codebook_size(&rows, &dir.join("map_vs_codebook_size.svg"))?,
        plot_map_vs_mask(&rows, &dir.join("map_vs_mask_p.svg"))?,
    ];
    Ok(SweepResult {
        rows,
        skipped,
        computed,
        csv: csv_path,
        plots,
    })
}

fn write_csv(rows: &[SweepRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_csv(path: &Path) -> Result<Vec<SweepRow>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<Vec<SweepRow>, _>>()?)
}

fn plot_err<E: std::fmt::Display>(e: E) -> Error {
    Error::Plot(e.to_string())
}

type Series = BTreeMap<String, Vec<(f64, f64)>>;

fn draw(path: &Path, title: &str, x_desc: &str, log_x: bool, series: &Series) -> Result<PathBuf> {
    let xs = series.values().flatten().map(|p| p.0);
    let (lo, hi) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    let root = SVGBackend::new(path, (900, 600)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let mut builder = ChartBuilder::on(&root);
    builder
        .caption(title, ("sans-serif", 22))
        .margin(16)
        .x_label_area_size(45)
        .y_label_area_size(55);
    let palette = |i: usize| Palette99::pick(i).to_rgba();
    macro_rules! finish {
        ($chart:expr) => {{
            let mut chart = $chart;
            chart
                .configure_mesh()
                .x_desc(x_desc)
                .y_desc("validation mAP (chunk level)")
                .draw()
                .map_err(plot_err)?;
            for (i, (name, points)) in series.iter().enumerate() {
                let color = palette(i);
                chart
                    .draw_series(LineSeries::new(points.iter().copied(), color.stroke_width(2)))
                    .map_err(plot_err)?
                    .label(name.as_str())
                    .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], color.stroke_width(2)));
                chart
                    .draw_series(points.iter().map(|&p| Circle::new(p, 4, color.filled())))
                    .map_err(plot_err)?;
            }
            chart
                .configure_series_labels()
                .background_style(WHITE.mix(0.85))
                .border_style(BLACK)
                .position(SeriesLabelPosition::LowerRight)
                .draw()
                .map_err(plot_err)?;
        }};
    }
    if log_x {
        let chart = builder
            .build_cartesian_2d((lo / 1.5..hi * 1.5).log_scale(), 0.0..1.0)
            .map_err(plot_err)?;
        finish!(chart);
    } else {
        let pad = ((hi - lo) * 0.05).max(0.01);
        let chart = builder.build_cartesian_2d(lo - pad..hi + pad, 0.0..1.0).map_err(plot_err)?;
        finish!(chart);
    }
    root.present().map_err(plot_err)?;
    Ok(path.to_path_buf())
}

/// mAP against codebook size, one line per head configuration.
fn plot_map_vs_codebook_size(rows: &[SweepRow], path: &Path) -> Result<PathBuf> {
    let mut series = Series::new();
    for r in rows {
        let name = format!("width {} dropout {} mask {}", r.head_width, r.head_dropout, r.mask_p);
        series.entry(name).or_default().push((r.codebook_size as f64, r.val_chunk_map));
    }
    draw(path, "mAP vs codebook size D", "codebook size D", true, &series)
}

/// mAP against mask probability, one line per (D, head) configuration.
fn plot_map_vs_mask(rows: &[SweepRow], path: &Path) -> Result<PathBuf> {
    let mut series = Series::new();
    for r in rows {
        let name = format!("D {} width {} dropout {}", r.codebook_size, r.head_width, r.head_dropout);
        series.entry(name).or_default().push((r.mask_p, r.val_chunk_map));
    }
    for points in series.values_mut() {
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    draw(path, "mAP vs input mask probability", "mask probability p", false, &series)
}
