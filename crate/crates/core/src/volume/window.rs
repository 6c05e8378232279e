use super::resample::{canvas_geometry, resample_to};
use super::{Grid, HuVolume, NormVolume, HU_MAX, HU_MIN};
use crate::error::{Error, Result};

/// Intensity window in HU.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Window {
    pub level: f64,
    pub width: f64,
}

impl Window {
    /// Standard lung window used for synthesis and 3D lesion segmentation.
    pub const LUNG: Window = Window {
        level: -600.0,
        width: 1500.0,
    };
    /// Lung segmentation input window.
    pub const LUNG_SEGMENTATION: Window = Window {
        level: -624.0,
        width: 1500.0,
    };
    /// 2D lesion segmentation input window.
    pub const LESION_2D: Window = Window {
        level: -150.0,
        width: 1174.0,
    };

    pub(crate) fn check(&self) -> Result<()> {
        if self.width > 0.0 && self.width.is_finite() && self.level.is_finite() {
            Ok(())
        } else {
            Err(Error::Parameter(format!(
                "window width must be positive, got {}",
                self.width
            )))
        }
    }

    /// Normalized value of one HU sample (clipped).
    #[inline]
    pub fn normalize(&self, hu: f64, range: RangeTag) -> f64 {
        match range {
            RangeTag::Sym => (2.0 * (hu - self.level) / self.width).clamp(-1.0, 1.0),
            RangeTag::Unit => ((hu - self.level) / self.width + 0.5).clamp(0.0, 1.0),
        }
    }

    /// HU value of a normalized sample (no rounding).
    #[inline]
    pub fn denormalize(&self, value: f64, range: RangeTag) -> f64 {
        match range {
            RangeTag::Sym => self.level + value * self.width / 2.0,
            RangeTag::Unit => self.level + (value - 0.5) * self.width,
        }
    }
}

/// Output range of a normalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RangeTag {
    /// `[-1, 1]`
    Sym,
    /// `[0, 1]`
    Unit,
}

impl RangeTag {
    pub fn bounds(self) -> (f32, f32) {
        match self {
            RangeTag::Sym => (-1.0, 1.0),
            RangeTag::Unit => (0.0, 1.0),
        }
    }
}

/// Maps HU to `[-1, 1]` (`Sym`) or `[0, 1]` (`Unit`) through `window`, hard-clipping.
pub fn normalize_window(v: &HuVolume, window: Window, range: RangeTag) -> Result<NormVolume> {
    window.check()?;
    let data = v
        .data()
        .iter()
        .map(|&hu| window.normalize(hu as f64, range) as f32)
        .collect();
    NormVolume::new(Grid::from_vec(*v.geometry(), data)?, window, range)
}

/// Inverse of [`normalize_window`]. Clipped samples come back as the window edge.
pub fn denormalize_window(v: &NormVolume) -> HuVolume {
    let window = v.window();
    let range = v.range();
    let data = v
        .data()
        .iter()
        .map(|&x| hu_from_f64(window.denormalize(x as f64, range)))
        .collect();
    Grid::from_vec(*v.geometry(), data).expect("geometry is unchanged")
}

#[inline]
pub(crate) fn hu_from_f64(hu: f64) -> i16 {
    hu.round().clamp(HU_MIN as f64, HU_MAX as f64) as i16
}

/// Resampling, cropping and windowing settings for one consumer of CT volumes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Preset {
    /// Target spacing per axis; `None` keeps the input spacing.
    pub spacing: [Option<f64>; 3],
    /// Crop size per axis; `None` keeps the full resampled extent.
    pub crop: [Option<usize>; 3],
    pub window: Window,
    pub range: RangeTag,
}

impl Preset {
    /// Lesion synthesis: 0.75 x 0.75 x 1 mm, 384 x 384 in-plane, lung window to `[-1, 1]`.
    pub const SYNTHESIS: Preset = Preset {
        spacing: [Some(0.75), Some(0.75), Some(1.0)],
        crop: [Some(384), Some(384), None],
        window: Window::LUNG,
        range: RangeTag::Sym,
    };
    /// Lung segmentation: 2 mm isotropic, 128^3 patches, level -624 / width 1500 to `[-1, 1]`.
    pub const LUNG_SEGMENTATION: Preset = Preset {
        spacing: [Some(2.0), Some(2.0), Some(2.0)],
        crop: [Some(128), Some(128), Some(128)],
        window: Window::LUNG_SEGMENTATION,
        range: RangeTag::Sym,
    };
    /// 2D lesion segmentation: 0.6 mm in-plane, original z, 512 x 512, level -150 / width 1174.
    pub const LESION_2D: Preset = Preset {
        spacing: [Some(0.6), Some(0.6), None],
        crop: [Some(512), Some(512), None],
        window: Window::LESION_2D,
        range: RangeTag::Sym,
    };
    /// 3D lesion segmentation: 1 x 1 x 3 mm, 384 x 384 x 128, lung window to `[0, 1]`.
    pub const LESION_3D: Preset = Preset {
        spacing: [Some(1.0), Some(1.0), Some(3.0)],
        crop: [Some(384), Some(384), Some(128)],
        window: Window::LUNG,
        range: RangeTag::Unit,
    };

    pub fn target_spacing(&self, current: [f64; 3]) -> [f64; 3] {
        std::array::from_fn(|a| self.spacing[a].unwrap_or(current[a]))
    }

    /// Resamples onto a grid centred on `center_mm` (cropping or air-padding
    /// to the preset's crop size) and normalizes.
    pub fn apply(&self, v: &HuVolume, center_mm: [f64; 3]) -> Result<NormVolume> {
        let canvas = canvas_geometry(v.geometry(), self.target_spacing(v.geometry().spacing), self.crop, center_mm)?;
        normalize_window(&resample_to(v, &canvas), self.window, self.range)
    }
}
