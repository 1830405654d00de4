//! Spectral modeling of directed graphs: adjacency spectral embedding,
//! Gaussian mixture clustering, semiparametric curve mixtures on the latent
//! positions, random-graph samplers and partition/correlation evaluation.

pub mod curve;
pub mod error;
pub mod eval;
pub mod graph;
pub mod linalg;
pub mod mixture;
pub mod rng;
pub mod spectral;

pub use error::{Error, Result};
