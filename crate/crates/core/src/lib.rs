//! Synthetic lesion masks and lesion-pattern inpainting for chest CT.
//!
//! The crate covers the whole synthesis path: random closed lesion shapes are
//! built as deformed icospheres, smoothed, voxelized, placed at locations drawn
//! from a spatial prior, cropped to the lungs and softened at the boundary.
//! Pattern intensities are produced by a pluggable [`fusion::PatchGenerator`]
//! applied in a z-sliding window, then blended and fused into the control
//! volume. [`metrics`] quantifies the result (Dice, lesion inclusion rate,
//! percentage of opacity and of high opacity, Pearson correlation).

pub mod assembly;
pub mod cli;
pub mod error;
pub mod fusion;
pub mod mesh;
pub mod metrics;
pub mod prior;
pub mod rng;
pub mod volume;

pub use error::{Error, Result};
