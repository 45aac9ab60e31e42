pub mod config;
pub mod data;
pub mod diffusion;
pub mod error;
pub mod evaluator;
pub mod geometry;
pub mod gradsuite;
pub mod graph;
pub mod losses;
pub mod metrics;
pub mod model;
pub mod repr;
pub mod sampling;
pub mod skeleton;
pub mod train;

pub use error::{ChainError, Result};
