//! Dataset handling, configuration, the artifact store and the stage runner.

pub mod config;
pub mod features;
pub mod fixture;
pub mod manifest;
pub mod stages;
pub mod store;
pub mod sweep;

pub use config::{RunConfig, SweepGrid};
pub use manifest::{ingest, DatasetManifest, Split};
pub use stages::{EvalReport, Pipeline, Stage, StageOutcome};
pub use store::ArtifactStore;
