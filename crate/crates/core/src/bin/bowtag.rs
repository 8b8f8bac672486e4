use std::path::PathBuf;
use std::process::ExitCode;

use bowtag::pipeline::fixture::{make_synthetic_fixture, FIXTURE_CLIPS};
use bowtag::pipeline::sweep::sweep;
use bowtag::pipeline::{ArtifactStore, Pipeline, RunConfig, Stage};
use bowtag::{Error, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

#[derive(Parser)]
#[command(name = "bowtag", version, about = "Bag-of-codewords audio tagging pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Artifact store directory.
    #[arg(long, default_value = "store")]
    store: PathBuf,
    /// JSON run configuration; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Dataset manifest CSV (clip_id,path,split,labels).
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Compression factor F.
    #[arg(long)]
    compression: Option<u32>,
    /// Codebook size D.
    #[arg(long)]
    codebook_size: Option<usize>,
    #[arg(long)]
    head_width: Option<usize>,
    #[arg(long)]
    head_dropout: Option<f64>,
    #[arg(long)]
    mask_p: Option<f64>,
    /// Allow a grid-bound field outside its grid (repeatable).
    #[arg(long = "override")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a manifest and record it in the store.
    Ingest(Common),
    /// Train the four autoencoders.
    TrainAe(Common),
    /// Fit the four k-means codebooks.
    FitCodebook(Common),
    /// Compute bag-of-codewords features for every split.
    Featurize(Common),
    /// Train the classification head.
    TrainHead(Common),
    /// Evaluate the head at chunk and clip level.
    Eval(Common),
    /// Run every stage in order.
    Run(Common),
    /// Run the configured grid over D, head width, dropout and mask_p.
    Sweep(Common),
    /// Write the synthetic fixture dataset.
    Fixture {
        #[arg(long, default_value = "fixture")]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = FIXTURE_CLIPS)]
        clips: usize,
    },
}

fn config(c: &Common) -> Result<RunConfig> {
    let mut cfg = match &c.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(v) = c.seed {
        cfg.seed = v;
    }
    if let Some(v) = &c.manifest {
        cfg.manifest = Some(v.clone());
    }
    if let Some(v) = c.compression {
        cfg.compression = v;
    }
    if let Some(v) = c.codebook_size {
        cfg.codebook_size = v;
    }
    if let Some(v) = c.head_width {
        cfg.head_width = v;
    }
    if let Some(v) = c.head_dropout {
        cfg.head_dropout = v;
    }
    if let Some(v) = c.mask_p {
        cfg.mask_p = v;
    }
    cfg.overrides.extend(c.overrides.iter().cloned());
    Ok(cfg)
}

fn pipeline(c: &Common) -> Result<Pipeline> {
    Pipeline::new(ArtifactStore::open(&c.store)?, config(c)?)
}

fn print(value: serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(&value).expect("json values serialize"));
}

fn stage(c: &Common, stage: Stage) -> Result<()> {
    let p = pipeline(c)?;
    let outcome = p.run_stage(stage)?;
    let mut out = serde_json::to_value(&outcome)?;
    match stage {
        Stage::Ingest => out["summary"] = serde_json::to_value(p.manifest()?.summary())?,
        Stage::Eval => {
            out["report"] = serde_json::to_value(p.eval_report()?)?;
            out["stage_seconds"] = serde_json::to_value(p.stage_seconds()?)?;
        }
        _ => {}
    }
    print(out);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest(c) => stage(&c, Stage::Ingest),
        Command::TrainAe(c) => stage(&c, Stage::TrainAe),
        Command::FitCodebook(c) => stage(&c, Stage::FitCodebook),
        Command::Featurize(c) => stage(&c, Stage::Featurize),
        Command::TrainHead(c) => stage(&c, Stage::TrainHead),
        Command::Eval(c) => stage(&c, Stage::Eval),
        Command::Run(c) => {
            let p = pipeline(&c)?;
            let (outcomes, report) = p.run_all()?;
            print(json!({ "stages": outcomes, "report": report }));
            Ok(())
        }
        Command::Sweep(c) => {
            let result = sweep(&config(&c)?, &ArtifactStore::open(&c.store)?)?;
            print(json!({
                "cells": result.rows.len(),
                "computed": result.computed,
                "skipped": result.skipped,
                "csv": result.csv,
                "plots": result.plots,
            }));
            Ok(())
        }
        Command::Fixture { out, seed, clips } => {
            if clips == 0 {
                return Err(Error::Validation("--clips must be positive".into()));
            }
            print(serde_json::to_value(make_synthetic_fixture(&out, seed, clips)?)?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
