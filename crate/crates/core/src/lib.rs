pub mod audio;
pub mod classifier;
pub mod codebook;
pub mod encoder;
pub mod error;
pub mod format;
pub mod metrics;
pub mod neural;
pub mod patching;
pub mod pipeline;
pub mod seed;

pub use error::{Error, Result};
