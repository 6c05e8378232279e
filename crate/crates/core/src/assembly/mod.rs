//! Composition of per-lesion masks into one abnormality mask, lung cropping,
//! and linear-ramp boundary softening.

mod edt;

pub use edt::{distance_to_background, squared_distance_to_background};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{Grid, Mask3, SoftMask3};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssemblyParams {
    /// Depth (mm) over which boundary weights ramp from 0 to 1.
    pub ramp_width_mm: f64,
    /// Margin (mm) around each lesion mesh when voxelizing.
    pub padding_mm: f64,
    /// Apply a random axis-aligned quarter-turn to each lesion before placement.
    pub random_rotations: bool,
}

impl Default for AssemblyParams {
    fn default() -> Self {
        Self {
            ramp_width_mm: 3.0,
            padding_mm: 1.0,
            random_rotations: false,
        }
    }
}

impl AssemblyParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.ramp_width_mm > 0.0 && self.ramp_width_mm.is_finite()) {
            return Err(Error::Parameter(format!(
                "ramp_width_mm must be positive, got {}",
                self.ramp_width_mm
            )));
        }
        if !(self.padding_mm >= 0.0 && self.padding_mm.is_finite()) {
            return Err(Error::Parameter(format!(
                "padding_mm must be non-negative, got {}",
                self.padding_mm
            )));
        }
        Ok(())
    }
}

/// ORs `component` into a copy of `canvas`, translated so that its foreground
/// centroid lands on `center` (canvas voxel coordinates, rounded per axis).
/// Voxels falling outside the canvas are dropped.
pub fn place_component(canvas: &Mask3, component: &Mask3, center: [f64; 3]) -> Result<Mask3> {
    let cs = canvas.geometry().spacing;
    let ms = component.geometry().spacing;
    if (0..3).any(|a| (cs[a] - ms[a]).abs() > 1e-6) {
        return Err(Error::GeometryMismatch(format!(
            "component spacing {ms:?} differs from canvas spacing {cs:?}"
        )));
    }
    let mut out = canvas.clone();
    let Some(centroid) = component.centroid() else {
        return Ok(out);
    };
    let offset: [i64; 3] = std::array::from_fn(|a| (center[a] - centroid[a]).round() as i64);
    let cg = *component.geometry();
    let target = *canvas.geometry();
    let data = out.data_mut();
    for (i, &v) in component.data().iter().enumerate() {
        if v == 0 {
            continue;
        }
        let p = cg.coords(i);
        let q = std::array::from_fn(|a| p[a] as i64 + offset[a]);
        if let Some(j) = target.checked_index(q) {
            data[j] = 1;
        }
    }
    Ok(out)
}

/// Voxelwise OR. An empty list is an error (no geometry to return).
pub fn union_masks(masks: &[Mask3]) -> Result<Mask3> {
    let (first, rest) = masks
        .split_first()
        .ok_or_else(|| Error::Parameter("union of zero masks".into()))?;
    let mut out = first.clone();
    for m in rest {
        out.geometry().ensure_matches(m.geometry(), "union_masks")?;
        for (o, &v) in out.data_mut().iter_mut().zip(m.data()) {
            *o |= v;
        }
    }
    Ok(out)
}

/// Voxelwise AND of a mask with the lung mask.
pub fn crop_to_lung(mask: &Mask3, lung: &Mask3) -> Result<Mask3> {
    mask.geometry().ensure_matches(lung.geometry(), "crop_to_lung")?;
    let data = mask
        .data()
        .iter()
        .zip(lung.data())
        .map(|(&m, &l)| m & l)
        .collect();
    Grid::from_vec(*mask.geometry(), data)
}

/// Boundary weights `clip(d / ramp_width, 0, 1)`, where `d` is the Euclidean
/// distance from a foreground voxel centre to the nearest background voxel
/// centre. Background voxels get 0.
pub fn smooth_boundary(mask: &Mask3, ramp_width: f64) -> Result<SoftMask3> {
    if !(ramp_width > 0.0 && ramp_width.is_finite()) {
        return Err(Error::Parameter(format!(
            "ramp width must be positive, got {ramp_width}"
        )));
    }
    let sq = squared_distance_to_background(mask);
    let data = sq
        .data()
        .iter()
        .zip(mask.data())
        .map(|(&d2, &m)| {
            if m == 0 {
                0.0
            } else {
                (d2.sqrt() / ramp_width).clamp(0.0, 1.0)
            }
        })
        .collect();
    Grid::from_vec(*mask.geometry(), data)
}

/// Rotates a mask by `turns` quarter turns about `axis` (0 = x, 1 = y, 2 = z).
/// Dims are permuted accordingly; origin is kept.
pub fn rotate_quarter_turns(mask: &Mask3, axis: usize, turns: u8) -> Mask3 {
    let turns = turns % 4;
    if turns == 0 {
        return mask.clone();
    }
    let (u, v) = match axis {
        0 => (1, 2),
        1 => (2, 0),
        _ => (0, 1),
    };
    let g = *mask.geometry();
    let mut geometry = g;
    if turns % 2 == 1 {
        geometry.dims.swap(u, v);
        geometry.spacing.swap(u, v);
    }
    let mut out = Mask3::zeros(geometry);
    for (i, &val) in mask.data().iter().enumerate() {
        if val == 0 {
            continue;
        }
        let p = g.coords(i);
        let mut q = p;
        let (nu, nv) = (g.dims[u], g.dims[v]);
        match turns {
            1 => {
                q[u] = nv - 1 - p[v];
                q[v] = p[u];
            }
            2 => {
                q[u] = nu - 1 - p[u];
                q[v] = nv - 1 - p[v];
            }
            _ => {
                q[u] = p[v];
                q[v] = nu - 1 - p[u];
            }
        }
        out.set(q[0], q[1], q[2], 1);
    }
    out
}
