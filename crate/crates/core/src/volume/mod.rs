//! Volume and mask containers, MetaImage I/O, resampling and intensity windowing.
//!
//! All grids store samples in x-fastest linear order:
//! `index = x + nx * (y + ny * z)`.

mod label;
mod mhd;
mod resample;
mod window;

pub use label::{label_components, Component};
pub use mhd::{load_float, load_hu, load_mask, load_mhd, save_mhd, ElementType, MetaImage, MhdElement};
pub use resample::{canvas_geometry, resample, resample_mask, resample_mask_to, resample_soft_to, resample_to};
pub(crate) use resample::resample_real_to;
pub(crate) use window::hu_from_f64;
pub use window::{denormalize_window, normalize_window, Preset, RangeTag, Window};

use crate::error::{Error, Result};

/// Lower bound of the stored HU range.
pub const HU_MIN: i16 = -1024;
/// Upper bound of the stored HU range.
pub const HU_MAX: i16 = 3071;

const GEOMETRY_TOL: f64 = 1e-6;

/// Grid extent and placement in millimetre space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Geometry {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub origin: [f64; 3],
}

impl Geometry {
    pub fn new(dims: [usize; 3], spacing: [f64; 3], origin: [f64; 3]) -> Result<Self> {
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::Parameter(format!("dims must be positive, got {dims:?}")));
        }
        if spacing.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::Parameter(format!(
                "spacing must be positive, got {spacing:?}"
            )));
        }
        if origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::Parameter(format!("origin must be finite, got {origin:?}")));
        }
        Ok(Self {
            dims,
            spacing,
            origin,
        })
    }

    /// Unit spacing, zero origin.
    pub fn with_dims(dims: [usize; 3]) -> Self {
        Self {
            dims,
            spacing: [1.0; 3],
            origin: [0.0; 3],
        }
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    #[inline]
    pub fn coords(&self, index: usize) -> [usize; 3] {
        let nx = self.dims[0];
        let ny = self.dims[1];
        [index % nx, (index / nx) % ny, index / (nx * ny)]
    }

    /// Linear index of a signed voxel coordinate, `None` when outside the grid.
    #[inline]
    pub fn checked_index(&self, p: [i64; 3]) -> Option<usize> {
        for a in 0..3 {
            if p[a] < 0 || p[a] >= self.dims[a] as i64 {
                return None;
            }
        }
        Some(self.index(p[0] as usize, p[1] as usize, p[2] as usize))
    }

    /// Physical position (mm) of a voxel centre given in continuous index coordinates.
    pub fn to_physical(&self, index: [f64; 3]) -> [f64; 3] {
        std::array::from_fn(|a| self.origin[a] + index[a] * self.spacing[a])
    }

    /// Continuous index coordinates of a physical position.
    pub fn to_index(&self, point: [f64; 3]) -> [f64; 3] {
        std::array::from_fn(|a| (point[a] - self.origin[a]) / self.spacing[a])
    }

    /// Equal dims, and spacing/origin equal within 1e-6 mm.
    pub fn matches(&self, other: &Geometry) -> bool {
        self.dims == other.dims
            && (0..3).all(|a| {
                (self.spacing[a] - other.spacing[a]).abs() <= GEOMETRY_TOL
                    && (self.origin[a] - other.origin[a]).abs() <= GEOMETRY_TOL
            })
    }

    pub fn ensure_matches(&self, other: &Geometry, what: &str) -> Result<()> {
        if self.matches(other) {
            Ok(())
        } else {
            Err(Error::GeometryMismatch(format!(
                "{what}: {:?}/{:?}/{:?} vs {:?}/{:?}/{:?}",
                self.dims, self.spacing, self.origin, other.dims, other.spacing, other.origin
            )))
        }
    }
}

/// A sample type that can live in a [`Grid`].
pub trait Voxel: Copy + Default + PartialEq + Send + Sync + std::fmt::Debug {
    /// Whether a stored sample satisfies the container's range invariant.
    fn in_range(self) -> bool;
}

impl Voxel for i16 {
    fn in_range(self) -> bool {
        (HU_MIN..=HU_MAX).contains(&self)
    }
}

impl Voxel for u8 {
    fn in_range(self) -> bool {
        self <= 1
    }
}

impl Voxel for f64 {
    fn in_range(self) -> bool {
        (0.0..=1.0).contains(&self)
    }
}

impl Voxel for f32 {
    fn in_range(self) -> bool {
        self.is_finite()
    }
}

/// Dense 3D grid of samples with physical geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    geometry: Geometry,
    data: Vec<T>,
}

/// CT intensities in Hounsfield units, clamped to `[HU_MIN, HU_MAX]`.
pub type HuVolume = Grid<i16>;
/// Binary mask, 0 = background, 1 = foreground.
pub type Mask3 = Grid<u8>;
/// Soft mask with weights in `[0, 1]`.
pub type SoftMask3 = Grid<f64>;

impl<T: Voxel> Grid<T> {
    pub fn from_vec(geometry: Geometry, data: Vec<T>) -> Result<Self> {
        if data.len() != geometry.len() {
            return Err(Error::Parameter(format!(
                "sample count {} does not match dims {:?}",
                data.len(),
                geometry.dims
            )));
        }
        Ok(Self { geometry, data })
    }

    pub fn filled(geometry: Geometry, value: T) -> Self {
        Self {
            data: vec![value; geometry.len()],
            geometry,
        }
    }

    pub fn zeros(geometry: Geometry) -> Self {
        Self::filled(geometry, T::default())
    }

    pub fn from_fn(geometry: Geometry, mut f: impl FnMut([usize; 3]) -> T) -> Self {
        let mut data = Vec::with_capacity(geometry.len());
        for z in 0..geometry.dims[2] {
            for y in 0..geometry.dims[1] {
                for x in 0..geometry.dims[0] {
                    data.push(f([x, y, z]));
                }
            }
        }
        Self { geometry, data }
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn dims(&self) -> [usize; 3] {
        self.geometry.dims
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> T {
        self.data[self.geometry.index(x, y, z)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, z: usize, value: T) {
        let i = self.geometry.index(x, y, z);
        self.data[i] = value;
    }

    /// Same samples, different origin/spacing. Dims must agree.
    pub fn with_geometry(mut self, geometry: Geometry) -> Result<Self> {
        if geometry.dims != self.geometry.dims {
            return Err(Error::GeometryMismatch(format!(
                "cannot relabel {:?} as {:?}",
                self.geometry.dims, geometry.dims
            )));
        }
        self.geometry = geometry;
        Ok(self)
    }

    /// Checks every sample against the container's range invariant.
    pub fn validate(&self) -> Result<()> {
        match self.data.iter().position(|v| !v.in_range()) {
            None => Ok(()),
            Some(i) => Err(Error::Precondition(format!(
                "sample {:?} at {:?} violates the range invariant",
                self.data[i],
                self.geometry.coords(i)
            ))),
        }
    }

    /// Copies z-slices `[start, start + len)` into a new grid whose origin tracks the slab.
    pub fn slab(&self, start: usize, len: usize) -> Grid<T> {
        let [nx, ny, nz] = self.geometry.dims;
        assert!(start + len <= nz && len > 0, "slab out of range");
        let plane = nx * ny;
        let mut geometry = self.geometry;
        geometry.dims[2] = len;
        geometry.origin[2] += start as f64 * geometry.spacing[2];
        Grid {
            geometry,
            data: self.data[start * plane..(start + len) * plane].to_vec(),
        }
    }
}

impl Mask3 {
    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }

    pub fn is_empty_mask(&self) -> bool {
        self.data.iter().all(|&v| v == 0)
    }

    /// Mean voxel index of the foreground, `None` for an empty mask.
    pub fn centroid(&self) -> Option<[f64; 3]> {
        let mut sum = [0.0f64; 3];
        let mut n = 0usize;
        for (i, &v) in self.data.iter().enumerate() {
            if v != 0 {
                let c = self.geometry.coords(i);
                for a in 0..3 {
                    sum[a] += c[a] as f64;
                }
                n += 1;
            }
        }
        (n > 0).then(|| sum.map(|s| s / n as f64))
    }

    /// Inclusive voxel bounding box of the foreground.
    pub fn bounding_box(&self) -> Option<([usize; 3], [usize; 3])> {
        let mut lo = [usize::MAX; 3];
        let mut hi = [0usize; 3];
        let mut any = false;
        for (i, &v) in self.data.iter().enumerate() {
            if v != 0 {
                let c = self.geometry.coords(i);
                for a in 0..3 {
                    lo[a] = lo[a].min(c[a]);
                    hi[a] = hi[a].max(c[a]);
                }
                any = true;
            }
        }
        any.then_some((lo, hi))
    }
}

/// Window-normalized intensities.
#[derive(Debug, Clone, PartialEq)]
pub struct NormVolume {
    grid: Grid<f32>,
    window: Window,
    range: RangeTag,
}

impl NormVolume {
    /// Wraps samples, hard-clipping them to the declared range.
    pub fn new(mut grid: Grid<f32>, window: Window, range: RangeTag) -> Result<Self> {
        window.check()?;
        let (lo, hi) = range.bounds();
        for v in grid.data_mut() {
            if v.is_nan() {
                return Err(Error::Parameter("NaN sample in normalized volume".into()));
            }
            *v = v.clamp(lo, hi);
        }
        Ok(Self {
            grid,
            window,
            range,
        })
    }

    pub fn grid(&self) -> &Grid<f32> {
        &self.grid
    }

    pub fn into_grid(self) -> Grid<f32> {
        self.grid
    }

    pub fn geometry(&self) -> &Geometry {
        self.grid.geometry()
    }

    pub fn dims(&self) -> [usize; 3] {
        self.grid.dims()
    }

    pub fn data(&self) -> &[f32] {
        self.grid.data()
    }

    pub fn window(&self) -> Window {
        self.window
    }

    pub fn range(&self) -> RangeTag {
        self.range
    }

    /// A volume sharing this one's window and range with new samples (clipped).
    pub fn with_data(&self, data: Vec<f32>) -> Result<Self> {
        let grid = Grid::from_vec(self.grid.geometry, data)?;
        Self::new(grid, self.window, self.range)
    }

    /// Same window and range on a different grid (clipped).
    pub fn with_grid(&self, grid: Grid<f32>) -> Result<Self> {
        Self::new(grid, self.window, self.range)
    }

    pub fn slab(&self, start: usize, len: usize) -> NormVolume {
        NormVolume {
            grid: self.grid.slab(start, len),
            window: self.window,
            range: self.range,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.window.check()?;
        let (lo, hi) = self.range.bounds();
        match self.grid.data().iter().position(|v| !(lo..=hi).contains(v)) {
            None => Ok(()),
            Some(i) => Err(Error::Precondition(format!(
                "normalized sample {} at {:?} outside [{lo}, {hi}]",
                self.grid.data()[i],
                self.grid.geometry().coords(i)
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometry_rejects_bad_input() {
        assert!(Geometry::new([0, 1, 1], [1.0; 3], [0.0; 3]).is_err());
        assert!(Geometry::new([1, 1, 1], [1.0, 0.0, 1.0], [0.0; 3]).is_err());
        assert!(Geometry::new([1, 1, 1], [1.0; 3], [f64::NAN, 0.0, 0.0]).is_err());
    }

    #[test]
    fn index_and_coords_round_trip() {
        let g = Geometry::with_dims([3, 4, 5]);
        for i in 0..g.len() {
            let [x, y, z] = g.coords(i);
            assert_eq!(g.index(x, y, z), i);
        }
        assert_eq!(g.index(1, 0, 0), 1);
        assert_eq!(g.index(0, 1, 0), 3);
        assert_eq!(g.index(0, 0, 1), 12);
    }

    #[test]
    fn validators_flag_out_of_range_samples() {
        let g = Geometry::with_dims([2, 1, 1]);
        assert!(Mask3::from_vec(g, vec![0, 1]).unwrap().validate().is_ok());
        assert!(Mask3::from_vec(g, vec![0, 2]).unwrap().validate().is_err());
        assert!(HuVolume::from_vec(g, vec![-1025, 0]).unwrap().validate().is_err());
        assert!(SoftMask3::from_vec(g, vec![0.5, 1.5]).unwrap().validate().is_err());
    }

    #[test]
    fn norm_volume_clips_to_range() {
        let g = Geometry::with_dims([3, 1, 1]);
        let grid = Grid::from_vec(g, vec![-2.0f32, 0.25, 3.0]).unwrap();
        let v = NormVolume::new(grid, Window::LUNG, RangeTag::Sym).unwrap();
        assert_eq!(v.data(), &[-1.0, 0.25, 1.0]);
        v.validate().unwrap();
    }

    #[test]
    fn slab_tracks_origin() {
        let g = Geometry::new([1, 1, 4], [1.0, 1.0, 2.5], [0.0, 0.0, 10.0]).unwrap();
        let v = HuVolume::from_vec(g, vec![1, 2, 3, 4]).unwrap();
        let s = v.slab(1, 2);
        assert_eq!(s.data(), &[2, 3]);
        assert_eq!(s.geometry().origin[2], 12.5);
    }

    #[test]
    fn mask_centroid_and_bbox() {
        let g = Geometry::with_dims([4, 4, 4]);
        let mut m = Mask3::zeros(g);
        m.set(1, 1, 1, 1);
        m.set(3, 1, 1, 1);
        assert_eq!(m.centroid(), Some([2.0, 1.0, 1.0]));
        assert_eq!(m.bounding_box(), Some(([1, 1, 1], [3, 1, 1])));
        assert_eq!(Mask3::zeros(g).centroid(), None);
    }
}
