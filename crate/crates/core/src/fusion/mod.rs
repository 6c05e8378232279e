//! Pattern injection: noise filling, generation behind [`PatchGenerator`],
//! sliding-window application along z, blending and soft-mask fusion.

mod generator;
mod noise;
mod pipeline;
mod sliding;

pub use generator::{
    decode_request, decode_response, encode_request, encode_response, procedural_generate, IdentityGenerator,
    PatchGenerator, PatternStyle, ProceduralGenerator, SubprocessGenerator, HEADER_LEN, PROTOCOL_MAGIC,
};
pub use noise::ValueNoise;
pub use pipeline::{synthesize_case, synthesize_case_with, SynthesisConfig, SynthesisOutput};
pub use sliding::{sliding_window_apply, window_starts};

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::volume::{Mask3, NormVolume, SoftMask3, Window};

/// Generated voxels above this HU receive the `alpha` adjustment.
pub const HIGH_OPACITY_HU: f64 = -200.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FusionParams {
    /// Weight of the generated image in the blend.
    pub beta: f64,
    /// Intensity gain for generated voxels above -200 HU.
    pub alpha: f64,
    pub window: Window,
    /// Slices shared by consecutive z-windows.
    pub overlap_slices: usize,
    pub patch_dims: [usize; 3],
    /// Working resolution of the synthesis canvas (mm).
    pub working_spacing: [f64; 3],
}

impl Default for FusionParams {
    fn default() -> Self {
        Self {
            beta: 0.7,
            alpha: 1.0,
            window: Window::LUNG,
            overlap_slices: 9,
            patch_dims: [384, 384, 18],
            working_spacing: [0.75, 0.75, 1.0],
        }
    }
}

impl FusionParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::Parameter(format!("beta must be in [0, 1], got {}", self.beta)));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Parameter(format!("alpha must be positive, got {}", self.alpha)));
        }
        self.window.check()?;
        if self.patch_dims.iter().any(|&n| n == 0) {
            return Err(Error::Parameter(format!("patch_dims must be positive, got {:?}", self.patch_dims)));
        }
        if self.overlap_slices >= self.patch_dims[2] {
            return Err(Error::Parameter(format!(
                "overlap_slices must be below the patch depth {}, got {}",
                self.patch_dims[2], self.overlap_slices
            )));
        }
        if self.working_spacing.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::Parameter(format!(
                "working_spacing must be positive, got {:?}",
                self.working_spacing
            )));
        }
        Ok(())
    }
}

/// Replaces masked voxels with i.i.d. uniform samples over the patch range,
/// drawn in linear voxel order.
pub fn fill_noise(patch: &NormVolume, mask: &Mask3, seed: u64) -> Result<NormVolume> {
    patch.geometry().ensure_matches(mask.geometry(), "fill_noise")?;
    let (lo, hi) = patch.range().bounds();
    let mut rng = rng::rng(seed);
    let mut out = patch.data().to_vec();
    for (o, &m) in out.iter_mut().zip(mask.data()) {
        if m != 0 {
            *o = rng.random_range(lo..=hi);
        }
    }
    patch.with_data(out)
}

/// `beta * alpha * gen + (1 - beta) * control` where the generated voxel is
/// above -200 HU, `beta * gen + (1 - beta) * control` elsewhere; clipped.
pub fn blend(gen_out: &NormVolume, control: &NormVolume, params: &FusionParams) -> Result<NormVolume> {
    gen_out.geometry().ensure_matches(control.geometry(), "blend")?;
    if params.beta == 0.0 {
        return Ok(control.clone());
    }
    let (window, range) = (gen_out.window(), gen_out.range());
    let b = params.beta;
    let data = gen_out
        .data()
        .iter()
        .zip(control.data())
        .map(|(&g, &c)| {
            let g = g as f64;
            let gain = if window.denormalize(g, range) > HIGH_OPACITY_HU {
                params.alpha
            } else {
                1.0
            };
            (b * gain * g + (1.0 - b) * c as f64) as f32
        })
        .collect();
    control.with_data(data)
}

/// `(1 - w) * control + w * blend` per voxel.
pub fn fuse(blend_out: &NormVolume, control: &NormVolume, soft: &SoftMask3) -> Result<NormVolume> {
    blend_out.geometry().ensure_matches(control.geometry(), "fuse")?;
    control.geometry().ensure_matches(soft.geometry(), "fuse")?;
    let data = blend_out
        .data()
        .iter()
        .zip(control.data())
        .zip(soft.data())
        .map(|((&b, &c), &w)| {
            if w <= 0.0 {
                c
            } else if w >= 1.0 {
                b
            } else {
                ((1.0 - w) * c as f64 + w * b as f64) as f32
            }
        })
        .collect();
    control.with_data(data)
}
