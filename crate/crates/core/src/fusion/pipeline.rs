//! End-to-end synthesis of one abnormal case from a control scan.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{blend, fill_noise, sliding_window_apply, FusionParams, PatchGenerator, PatternStyle, ProceduralGenerator};
use crate::assembly::{crop_to_lung, place_component, rotate_quarter_turns, smooth_boundary, union_masks, AssemblyParams};
use crate::error::{Error, Result};
use crate::mesh::{synthesize_lesion_mask, LesionShapeParams};
use crate::prior::{sample_centers, SpatialPrior};
use crate::rng::{self, derive_seed, stage_seed};
use crate::volume::{
    canvas_geometry, hu_from_f64, resample_real_to, Grid, normalize_window, resample_mask, resample_mask_to, resample_soft_to, resample_to,
    HuVolume, Mask3, RangeTag,
};

/// Everything `synthesize_case` needs besides the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesisConfig {
    pub shape: LesionShapeParams,
    pub assembly: AssemblyParams,
    pub fusion: FusionParams,
    pub style: PatternStyle,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        Self {
            shape: LesionShapeParams::default(),
            assembly: AssemblyParams::default(),
            fusion: FusionParams::default(),
            style: PatternStyle::Ggo,
        }
    }
}

impl SynthesisConfig {
    pub fn validate(&self) -> Result<()> {
        self.shape.validate()?;
        self.assembly.validate()?;
        self.fusion.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisOutput {
    /// Synthetic scan on the control's grid.
    pub volume: HuVolume,
    /// Binary lesion mask on the control's grid, inside the lung.
    pub mask: Mask3,
}

const STAGE_CENTERS: u64 = 1;
const STAGE_SHAPES: u64 = 2;
const STAGE_ROTATIONS: u64 = 3;
const STAGE_NOISE: u64 = 4;
const STAGE_GENERATOR: u64 = 5;

/// [`synthesize_case_with`] using the procedural generator of `config.style`.
pub fn synthesize_case(
    control: &HuVolume,
    lung: &Mask3,
    prior: &SpatialPrior,
    config: &SynthesisConfig,
    k_lesions: usize,
    seed: u64,
) -> Result<SynthesisOutput> {
    let gen = ProceduralGenerator::new(config.style, stage_seed(seed, STAGE_GENERATOR));
    synthesize_case_with(control, lung, prior, config, k_lesions, seed, &gen)
}

/// Resamples the control onto a working canvas centred on the lungs, places
/// `k_lesions` random shapes at prior-sampled centres, generates a pattern
/// inside them window by window, blends, and fuses the result back into the
/// control on its own grid. Voxels outside the lesion mask keep their
/// original values exactly.
pub fn synthesize_case_with(
    control: &HuVolume,
    lung: &Mask3,
    prior: &SpatialPrior,
    config: &SynthesisConfig,
    k_lesions: usize,
    seed: u64,
    gen: &dyn PatchGenerator,
) -> Result<SynthesisOutput> {
    config.validate()?;
    let og = *control.geometry();
    og.ensure_matches(lung.geometry(), "control vs lung mask")?;
    let centroid = lung
        .centroid()
        .ok_or_else(|| Error::Precondition("lung mask is empty".into()))?;
    let fusion = &config.fusion;
    let [px, py, _] = fusion.patch_dims;
    let canvas = canvas_geometry(
        &og,
        fusion.working_spacing,
        [Some(px), Some(py), None],
        og.to_physical(centroid),
    )?;

    let lung_w = resample_mask_to(lung, &canvas);
    let empty = Mask3::zeros(canvas);
    let lesions = if k_lesions == 0 || lung_w.is_empty_mask() {
        empty
    } else {
        let centers = sample_centers(prior, k_lesions, &lung_w, stage_seed(seed, STAGE_CENTERS))?;
        let placed: Vec<Mask3> = centers
            .par_iter()
            .enumerate()
            .map(|(i, &center)| {
                let shape = LesionShapeParams {
                    rng_seed: derive_seed(stage_seed(seed, STAGE_SHAPES), i as u64),
                    ..config.shape.clone()
                };
                let mut m = synthesize_lesion_mask(&shape, canvas.spacing, config.assembly.padding_mm)?;
                if config.assembly.random_rotations {
                    let mut r = rng::rng(derive_seed(stage_seed(seed, STAGE_ROTATIONS), i as u64));
                    let axis = r.random_range(0..3);
                    m = rotate_quarter_turns(&m, axis, r.random_range(0..4));
                    // Quarter turns may swap anisotropic spacings; lesions are
                    // only placed on grids with the canvas spacing.
                    m = resample_mask(&m, canvas.spacing)?;
                }
                place_component(&empty, &m, center)
            })
            .collect::<Result<_>>()?;
        crop_to_lung(&union_masks(&placed)?, &lung_w)?
    };

    let mask = crop_to_lung(&resample_mask_to(&lesions, &og), lung)?;
    if mask.is_empty_mask() {
        return Ok(SynthesisOutput {
            volume: control.clone(),
            mask,
        });
    }

    let soft = smooth_boundary(&lesions, config.assembly.ramp_width_mm)?;
    let norm = normalize_window(&resample_to(control, &canvas), fusion.window, RangeTag::Sym)?;
    let noised = fill_noise(&norm, &lesions, stage_seed(seed, STAGE_NOISE))?;
    let generated = sliding_window_apply(&noised, &lesions, gen, fusion)?;
    let blended = blend(&generated, &norm, fusion)?;

    // Fuse the change on the original grid: voxels outside the mask keep
    // their exact HU, and a blend that reproduces the control changes nothing.
    let (window, range) = (blended.window(), blended.range());
    let delta = Grid::from_vec(
        canvas,
        blended
            .data()
            .iter()
            .zip(norm.data())
            .map(|(&b, &c)| window.denormalize(b as f64, range) - window.denormalize(c as f64, range))
            .collect(),
    )?;
    let delta_o = resample_real_to(&delta, &og);
    let weight_o = resample_soft_to(&soft, &og);
    let volume = HuVolume::from_vec(
        og,
        control
            .data()
            .iter()
            .zip(delta_o.data())
            .zip(weight_o.data())
            .zip(mask.data())
            .map(|(((&c, &d), &w), &m)| {
                if m == 0 || w <= 0.0 || d == 0.0 {
                    c
                } else {
                    hu_from_f64(c as f64 + w * d)
                }
            })
            .collect(),
    )?;
    Ok(SynthesisOutput { volume, mask })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fusion::IdentityGenerator;
    use crate::volume::Geometry;

    fn phantom() -> (HuVolume, Mask3) {
        let g = Geometry::new([48, 40, 24], [1.0, 1.0, 1.5], [-20.0, 10.0, 0.0]).unwrap();
        let lung = Mask3::from_fn(g, |[x, y, z]| {
            let d = ((x as f64 - 24.0) / 18.0).powi(2) + ((y as f64 - 20.0) / 15.0).powi(2) + ((z as f64 - 12.0) / 10.0).powi(2);
            u8::from(d < 1.0)
        });
        let vol = HuVolume::from_fn(g, |[x, y, z]| {
            if lung.get(x, y, z) == 1 {
                -850 + ((x * 7 + y * 3 + z) % 40) as i16
            } else {
                40
            }
        });
        (vol, lung)
    }

    fn config() -> SynthesisConfig {
        let mut c = SynthesisConfig::default();
        c.fusion.patch_dims = [64, 56, 18];
        c.shape.base_radius = 6.0;
        c.shape.delta = 3.6;
        c.shape.sphere_subdivisions = 2;
        c
    }

    #[test]
    fn zero_lesions_returns_the_control() {
        let (vol, lung) = phantom();
        let prior = SpatialPrior::uniform([8, 8, 8]).unwrap();
        let out = synthesize_case(&vol, &lung, &prior, &config(), 0, 3).unwrap();
        assert_eq!(out.volume, vol);
        assert!(out.mask.is_empty_mask());
    }

    #[test]
    fn lesions_stay_in_the_lung_and_are_deterministic() {
        let (vol, lung) = phantom();
        let prior = SpatialPrior::uniform([8, 8, 8]).unwrap();
        let a = synthesize_case(&vol, &lung, &prior, &config(), 2, 11).unwrap();
        let b = synthesize_case(&vol, &lung, &prior, &config(), 2, 11).unwrap();
        assert_eq!(a, b);
        assert!(!a.mask.is_empty_mask());
        for (i, &m) in a.mask.data().iter().enumerate() {
            assert!(m <= lung.data()[i]);
            if m == 0 {
                assert_eq!(a.volume.data()[i], vol.data()[i]);
            }
        }
        assert_ne!(a.volume, vol);
        let c = synthesize_case(&vol, &lung, &prior, &config(), 2, 12).unwrap();
        assert_ne!(a.mask, c.mask);
    }

    #[test]
    fn identity_generator_with_zero_beta_keeps_the_control() {
        let (vol, lung) = phantom();
        let prior = SpatialPrior::uniform([8, 8, 8]).unwrap();
        let mut cfg = config();
        cfg.fusion.beta = 0.0;
        let out = synthesize_case_with(&vol, &lung, &prior, &cfg, 2, 5, &IdentityGenerator).unwrap();
        assert!(!out.mask.is_empty_mask());
        assert_eq!(out.volume, vol);
    }

    #[test]
    fn mismatched_lung_is_rejected() {
        let (vol, _) = phantom();
        let lung = Mask3::filled(Geometry::with_dims([4, 4, 4]), 1);
        let prior = SpatialPrior::uniform([8, 8, 8]).unwrap();
        assert!(matches!(
            synthesize_case(&vol, &lung, &prior, &config(), 1, 0),
            Err(Error::GeometryMismatch(_))
        ));
    }
}
