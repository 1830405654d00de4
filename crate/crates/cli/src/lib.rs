//! Batch commands for the spectral modeling pipeline: embed, cluster, fit a
//! latent curve, simulate, and run the in/out/weighting ablation.

pub mod commands;
pub mod config;
pub mod output;
pub mod session;

pub use config::{Choice, PipelineConfig, Scheme, Subset};
pub use session::Session;
