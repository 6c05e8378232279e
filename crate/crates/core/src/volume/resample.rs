//! Grid-to-grid resampling in physical space.
//!
//! A source voxel covers `[i - 0.5, i + 0.5]` in index units. When resampling
//! onto an arbitrary grid, target samples that fall outside the source extent
//! take a fill value (-1024 HU for intensities, 0 for masks); samples inside the
//! extent but beyond the outermost voxel centres use the edge voxel. Resampling
//! to a new spacing describes the same field of view, so there the rounding
//! overshoot of the last sample is clamped to the edge voxel instead.

use rayon::prelude::*;

use super::window::hu_from_f64;
use super::{Geometry, Grid, HuVolume, Mask3, SoftMask3, Voxel, HU_MIN};
use crate::error::{Error, Result};

const SNAP: f64 = 1e-9;

/// Per-axis interpolation stencil for one output coordinate.
#[derive(Debug, Clone, Copy)]
struct Tap {
    lo: usize,
    hi: usize,
    frac: f64,
}

fn axis_taps(src: &Geometry, dst: &Geometry, axis: usize, extend: bool) -> Vec<Option<Tap>> {
    let n = src.dims[axis];
    (0..dst.dims[axis])
        .map(|i| {
            let p = dst.origin[axis] + i as f64 * dst.spacing[axis];
            let mut idx = (p - src.origin[axis]) / src.spacing[axis];
            if (idx - idx.round()).abs() < SNAP {
                idx = idx.round();
            }
            if !extend && (idx < -0.5 - SNAP || idx > n as f64 - 0.5 + SNAP) {
                return None;
            }
            let idx = idx.clamp(0.0, (n - 1) as f64);
            let lo = idx.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            Some(Tap {
                lo,
                hi,
                frac: idx - lo as f64,
            })
        })
        .collect()
}

fn trilinear<T: Voxel, U: Voxel>(
    src: &Grid<T>,
    dst: &Geometry,
    fill: U,
    extend: bool,
    to_f64: impl Fn(T) -> f64 + Sync,
    from_f64: impl Fn(f64) -> U + Sync,
) -> Grid<U> {
    let sg = src.geometry();
    let tx = axis_taps(sg, dst, 0, extend);
    let ty = axis_taps(sg, dst, 1, extend);
    let tz = axis_taps(sg, dst, 2, extend);
    let data = src.data();
    let [nx, ny, _] = dst.dims;
    let mut out = vec![fill; dst.len()];

    out.par_chunks_mut(nx * ny)
        .zip(tz.par_iter())
        .for_each(|(plane, z)| {
            let Some(z) = z else { return };
            for (yi, ty) in ty.iter().enumerate() {
                let Some(y) = ty else { continue };
                for (xi, tx) in tx.iter().enumerate() {
                    let Some(x) = tx else { continue };
                    let at = |i, j, k| to_f64(data[sg.index(i, j, k)]);
                    let c00 = lerp(at(x.lo, y.lo, z.lo), at(x.hi, y.lo, z.lo), x.frac);
                    let c10 = lerp(at(x.lo, y.hi, z.lo), at(x.hi, y.hi, z.lo), x.frac);
                    let c01 = lerp(at(x.lo, y.lo, z.hi), at(x.hi, y.lo, z.hi), x.frac);
                    let c11 = lerp(at(x.lo, y.hi, z.hi), at(x.hi, y.hi, z.hi), x.frac);
                    let c0 = lerp(c00, c10, y.frac);
                    let c1 = lerp(c01, c11, y.frac);
                    plane[xi + nx * yi] = from_f64(lerp(c0, c1, z.frac));
                }
            }
        });
    Grid::from_vec(*dst, out).expect("output sized from geometry")
}

#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    if t == 0.0 {
        a
    } else {
        a + (b - a) * t
    }
}

fn output_dims(src: &Geometry, target: [f64; 3]) -> [usize; 3] {
    std::array::from_fn(|a| {
        let exact = src.dims[a] as f64 * src.spacing[a] / target[a];
        ((exact + 0.5 + SNAP).floor() as usize).max(1)
    })
}

fn target_geometry(src: &Geometry, target_spacing: [f64; 3]) -> Result<Geometry> {
    if target_spacing.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
        return Err(Error::Parameter(format!(
            "target spacing must be positive, got {target_spacing:?}"
        )));
    }
    Geometry::new(output_dims(src, target_spacing), target_spacing, src.origin)
}

/// Trilinear resampling to a new spacing. Output dims are
/// `round(dims * spacing / target_spacing)` (half up, at least 1); origin is kept.
pub fn resample(v: &HuVolume, target_spacing: [f64; 3]) -> Result<HuVolume> {
    let target = target_geometry(v.geometry(), target_spacing)?;
    Ok(trilinear(v, &target, HU_MIN, true, |h| h as f64, hu_from_f64))
}

/// Trilinear resampling onto an arbitrary target grid.
pub fn resample_to(v: &HuVolume, target: &Geometry) -> HuVolume {
    trilinear(v, target, HU_MIN, false, |h| h as f64, hu_from_f64)
}

/// Nearest-neighbour resampling of a binary mask to a new spacing.
pub fn resample_mask(m: &Mask3, target_spacing: [f64; 3]) -> Result<Mask3> {
    Ok(nearest(m, &target_geometry(m.geometry(), target_spacing)?, true))
}

/// Nearest-neighbour (round half up) resampling of a binary mask onto a target grid.
pub fn resample_mask_to(m: &Mask3, target: &Geometry) -> Mask3 {
    nearest(m, target, false)
}

fn nearest(m: &Mask3, target: &Geometry, extend: bool) -> Mask3 {
    let sg = m.geometry();
    let nearest = |axis: usize| -> Vec<Option<usize>> {
        axis_taps(sg, target, axis, extend)
            .into_iter()
            .map(|t| t.map(|t| if t.frac >= 0.5 { t.hi } else { t.lo }))
            .collect()
    };
    let (nx_, ny_, nz_) = (nearest(0), nearest(1), nearest(2));
    let data = m.data();
    Grid::from_fn(*target, |[x, y, z]| match (nx_[x], ny_[y], nz_[z]) {
        (Some(i), Some(j), Some(k)) => data[sg.index(i, j, k)],
        _ => 0,
    })
}

/// Trilinear resampling of soft weights onto a target grid; outside samples are 0.
pub fn resample_soft_to(s: &SoftMask3, target: &Geometry) -> SoftMask3 {
    trilinear(s, target, 0.0, false, |w| w, |w| w.clamp(0.0, 1.0))
}

/// Trilinear resampling of real samples; outside samples are 0.
pub(crate) fn resample_real_to(s: &Grid<f64>, target: &Geometry) -> Grid<f64> {
    trilinear(s, target, 0.0, false, |v| v, |v| v)
}

/// Grid with the given spacing whose axes with a crop size are centred on
/// `center_mm`; other axes span the source extent from the source origin.
pub fn canvas_geometry(
    src: &Geometry,
    spacing: [f64; 3],
    crop: [Option<usize>; 3],
    center_mm: [f64; 3],
) -> Result<Geometry> {
    let full = target_geometry(src, spacing)?;
    let mut dims = full.dims;
    let mut origin = full.origin;
    for a in 0..3 {
        if let Some(n) = crop[a] {
            dims[a] = n;
            origin[a] = center_mm[a] - (n as f64 - 1.0) / 2.0 * spacing[a];
        }
    }
    Geometry::new(dims, spacing, origin)
}
