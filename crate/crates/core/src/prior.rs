//! Spatial probability map of lesion centres in a canonical lung box, and
//! sampling of synthetic lesion centres from it.
//!
//! Cases are aligned by mapping the tight bounding box of each lung mask
//! affinely onto the canonical grid. Canonical cell `k` sits at canonical
//! coordinate `k` and covers `[k - 0.5, k + 0.5)`.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::volume::{label_components, Geometry, Grid, Mask3};

/// Default canonical grid.
pub const DEFAULT_GRID: [usize; 3] = [64, 64, 64];
/// Rejection-sampling attempts per centre before falling back to the nearest lung voxel.
pub const MAX_RETRIES: usize = 100;

/// Fixed-point resolution of splat weights; integer accumulation keeps the
/// prior independent of case order and multiplicity.
const SPLAT_ONE: f64 = (1u64 << 20) as f64;

/// Per-axis affine map `canonical = voxel * scale + offset`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CanonicalTransform {
    pub scale: [f64; 3],
    pub offset: [f64; 3],
}

impl CanonicalTransform {
    pub fn forward(&self, voxel: [f64; 3]) -> [f64; 3] {
        std::array::from_fn(|a| voxel[a] * self.scale[a] + self.offset[a])
    }

    pub fn inverse(&self, canonical: [f64; 3]) -> [f64; 3] {
        std::array::from_fn(|a| (canonical[a] - self.offset[a]) / self.scale[a])
    }
}

/// Maps the lung mask's bounding box `[min, max]` (voxel indices) so that
/// `min -> 0` and the box extent `max - min + 1` spans `grid_dims` cells.
pub fn canonical_transform(lung: &Mask3, grid_dims: [usize; 3]) -> Result<CanonicalTransform> {
    if grid_dims.iter().any(|&g| g == 0) {
        return Err(Error::Parameter(format!("grid dims must be positive, got {grid_dims:?}")));
    }
    let (lo, hi) = lung
        .bounding_box()
        .ok_or_else(|| Error::Precondition("lung mask is empty".into()))?;
    let scale: [f64; 3] = std::array::from_fn(|a| grid_dims[a] as f64 / (hi[a] - lo[a] + 1) as f64);
    let offset = std::array::from_fn(|a| -(lo[a] as f64) * scale[a]);
    Ok(CanonicalTransform { scale, offset })
}

/// What each lesion contributes to the prior.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorMode {
    /// One splat per connected component, at its centroid.
    #[default]
    Centroid,
    /// One splat per lesion voxel (occupancy map, for visualization).
    FullMask,
}

/// Probability over canonical grid cells; non-negative and summing to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialPrior {
    grid_dims: [usize; 3],
    probs: Vec<f64>,
}

impl SpatialPrior {
    /// Normalizes non-negative weights.
    pub fn from_weights(grid_dims: [usize; 3], weights: Vec<f64>) -> Result<Self> {
        let n: usize = grid_dims.iter().product();
        if n == 0 || weights.len() != n {
            return Err(Error::Parameter(format!(
                "{} weights for grid {grid_dims:?}",
                weights.len()
            )));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Parameter("prior weights must be finite and non-negative".into()));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::DegeneratePrior("all prior weights are zero".into()));
        }
        Ok(Self {
            grid_dims,
            probs: weights.into_iter().map(|w| w / total).collect(),
        })
    }

    pub fn uniform(grid_dims: [usize; 3]) -> Result<Self> {
        Self::from_weights(grid_dims, vec![1.0; grid_dims.iter().product()])
    }

    /// Loads a stored prior (any float grid); renormalized in f64.
    pub fn from_grid(grid: &Grid<f32>) -> Result<Self> {
        Self::from_weights(grid.dims(), grid.data().iter().map(|&v| v as f64).collect())
    }

    /// Unit-spacing grid for persistence.
    pub fn to_grid(&self) -> Grid<f64> {
        Grid::from_vec(Geometry::with_dims(self.grid_dims), self.probs.clone())
            .expect("sized from grid dims")
    }

    pub fn grid_dims(&self) -> [usize; 3] {
        self.grid_dims
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn argmax(&self) -> [usize; 3] {
        let (i, _) = self
            .probs
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &p)| if p > best.1 { (i, p) } else { best });
        Geometry::with_dims(self.grid_dims).coords(i)
    }
}

fn splat(acc: &mut [u64], g: &Geometry, point: [f64; 3], weight: f64) {
    let mut base = [0i64; 3];
    let mut frac = [0.0; 3];
    for a in 0..3 {
        let c = point[a].clamp(0.0, (g.dims[a] - 1) as f64);
        base[a] = c.floor() as i64;
        frac[a] = c - base[a] as f64;
    }
    for corner in 0..8 {
        let mut w = weight;
        let mut q = [0i64; 3];
        for a in 0..3 {
            let up = corner >> a & 1 == 1;
            w *= if up { frac[a] } else { 1.0 - frac[a] };
            q[a] = (base[a] + i64::from(up)).min(g.dims[a] as i64 - 1);
        }
        let quantized = (w * SPLAT_ONE).round() as u64;
        if quantized > 0 {
            acc[g.checked_index(q).expect("clamped")] += quantized;
        }
    }
}

fn accumulate_case(lesion: &Mask3, lung: &Mask3, grid: &Geometry, mode: PriorMode) -> Result<Vec<u64>> {
    lesion.geometry().ensure_matches(lung.geometry(), "lesion/lung pair")?;
    let t = canonical_transform(lung, grid.dims)?;
    let mut acc = vec![0u64; grid.len()];
    match mode {
        PriorMode::Centroid => {
            for c in label_components(lesion) {
                splat(&mut acc, grid, t.forward(c.centroid), 1.0);
            }
        }
        PriorMode::FullMask => {
            let lg = lesion.geometry();
            for (i, &v) in lesion.data().iter().enumerate() {
                if v != 0 {
                    splat(&mut acc, grid, t.forward(lg.coords(i).map(|c| c as f64)), 1.0);
                }
            }
        }
    }
    Ok(acc)
}

fn box_filter(acc: &[u64], g: &Geometry) -> Vec<u64> {
    let d = g.dims.map(|n| n as i64);
    let mut out = vec![0u64; acc.len()];
    for (i, o) in out.iter_mut().enumerate() {
        let c = g.coords(i).map(|v| v as i64);
        let mut s = 0u64;
        for dz in -1..=1 {
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let q = [c[0] + dx, c[1] + dy, c[2] + dz];
                    if (0..3).all(|a| (0..d[a]).contains(&q[a])) {
                        s += acc[g.index(q[0] as usize, q[1] as usize, q[2] as usize)];
                    }
                }
            }
        }
        *o = s;
    }
    out
}

/// Builds the lesion-centre prior from `(lesion, lung)` pairs: splats each
/// lesion contribution through its case's canonical transform, smooths with
/// a 3x3x3 box filter, and normalizes to sum 1.
pub fn build_prior(cases: &[(Mask3, Mask3)], grid_dims: [usize; 3], mode: PriorMode) -> Result<SpatialPrior> {
    if cases.is_empty() {
        return Err(Error::Precondition("build_prior needs at least one case".into()));
    }
    if grid_dims.iter().any(|&n| n == 0) {
        return Err(Error::Parameter(format!("grid dims must be positive, got {grid_dims:?}")));
    }
    let grid = Geometry::with_dims(grid_dims);
    let per_case: Vec<Vec<u64>> = cases
        .par_iter()
        .map(|(lesion, lung)| accumulate_case(lesion, lung, &grid, mode))
        .collect::<Result<_>>()?;
    let mut acc = vec![0u64; grid.len()];
    for case in &per_case {
        for (a, &v) in acc.iter_mut().zip(case) {
            *a += v;
        }
    }
    if acc.iter().all(|&v| v == 0) {
        return Err(Error::DegeneratePrior("no lesion voxels in any case".into()));
    }
    let smoothed = box_filter(&acc, &grid);
    SpatialPrior::from_weights(grid_dims, smoothed.into_iter().map(|v| v as f64).collect())
}

/// Voxel containing a continuous voxel coordinate (round half away from zero).
pub fn containing_voxel(p: [f64; 3]) -> [i64; 3] {
    p.map(|c| c.round() as i64)
}

/// Draws `k` lesion centres (continuous voxel coordinates of `lung`'s grid).
///
/// Each draw picks a cell from the prior, jitters uniformly inside it, and maps
/// it through the inverse canonical transform of `lung`. Draws whose voxel is
/// outside the lung are redrawn up to [`MAX_RETRIES`] times; after that the
/// nearest lung voxel centre to the last draw is used.
pub fn sample_centers(prior: &SpatialPrior, k: usize, lung: &Mask3, seed: u64) -> Result<Vec<[f64; 3]>> {
    let t = canonical_transform(lung, prior.grid_dims)?;
    let cg = Geometry::with_dims(prior.grid_dims);
    let lg = *lung.geometry();
    let mut cdf = Vec::with_capacity(prior.probs.len());
    let mut running = 0.0;
    for &p in &prior.probs {
        running += p;
        cdf.push(running);
    }
    let total = running;

    let in_lung = |p: [f64; 3]| {
        lg.checked_index(containing_voxel(p))
            .is_some_and(|i| lung.data()[i] != 0)
    };

    let mut rng = rng::rng(seed);
    let mut out = Vec::with_capacity(k);
    for _ in 0..k {
        let mut last = [0.0; 3];
        let mut accepted = None;
        for _ in 0..MAX_RETRIES {
            let u = rng.random::<f64>() * total;
            let cell = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
            let c = cg.coords(cell);
            let g: [f64; 3] = std::array::from_fn(|a| c[a] as f64 - 0.5 + rng.random::<f64>());
            last = t.inverse(g);
            if in_lung(last) {
                accepted = Some(last);
                break;
            }
        }
        out.push(match accepted {
            Some(p) => p,
            None => nearest_lung_voxel(lung, last),
        });
    }
    Ok(out)
}

fn nearest_lung_voxel(lung: &Mask3, p: [f64; 3]) -> [f64; 3] {
    let g = lung.geometry();
    let mut best = (f64::INFINITY, [0.0; 3]);
    for (i, &v) in lung.data().iter().enumerate() {
        if v == 0 {
            continue;
        }
        let c = g.coords(i).map(|x| x as f64);
        let d: f64 = (0..3).map(|a| ((c[a] - p[a]) * g.spacing[a]).powi(2)).sum();
        if d < best.0 {
            best = (d, c);
        }
    }
    best.1
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube_lung(dims: [usize; 3], lo: [usize; 3], hi: [usize; 3]) -> Mask3 {
        Mask3::from_fn(Geometry::with_dims(dims), |p| {
            u8::from((0..3).all(|a| p[a] >= lo[a] && p[a] <= hi[a]))
        })
    }

    #[test]
    fn full_box_scale_and_min_corner() {
        let lung = Mask3::filled(Geometry::with_dims([32, 16, 8]), 1);
        let t = canonical_transform(&lung, [64, 64, 64]).unwrap();
        assert_eq!(t.scale, [2.0, 4.0, 8.0]);
        let lung = cube_lung([20, 20, 20], [3, 4, 5], [12, 15, 18]);
        let t = canonical_transform(&lung, [64, 64, 64]).unwrap();
        assert_eq!(t.forward([3.0, 4.0, 5.0]), [0.0, 0.0, 0.0]);
        assert!(canonical_transform(&Mask3::zeros(Geometry::with_dims([2, 2, 2])), DEFAULT_GRID).is_err());
    }

    #[test]
    fn transform_round_trip() {
        let lung = cube_lung([50, 40, 30], [5, 7, 2], [44, 30, 27]);
        let t = canonical_transform(&lung, DEFAULT_GRID).unwrap();
        let mut s = 77u64;
        for _ in 0..1000 {
            let p: [f64; 3] = std::array::from_fn(|_| {
                s = crate::rng::mix64(s);
                (s % 10_000) as f64 / 10_000.0 * 25.0 + 5.0
            });
            let back = t.inverse(t.forward(p));
            for a in 0..3 {
                assert!((back[a] - p[a]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn single_centred_component_peaks_at_centre() {
        let dims = [33, 33, 33];
        let lung = Mask3::filled(Geometry::with_dims(dims), 1);
        let mut lesion = Mask3::zeros(Geometry::with_dims(dims));
        for z in 15..18 {
            for y in 15..18 {
                for x in 15..18 {
                    lesion.set(x, y, z, 1);
                }
            }
        }
        let prior = build_prior(&[(lesion, lung)], [33, 33, 33], PriorMode::Centroid).unwrap();
        // The box filter spreads the single splat over a flat 3x3x3 plateau.
        let g = Geometry::with_dims([33, 33, 33]);
        let max = prior.probs()[g.index(prior.argmax()[0], prior.argmax()[1], prior.argmax()[2])];
        assert_eq!(prior.probs()[g.index(16, 16, 16)], max);
        assert_eq!(prior.argmax(), [15, 15, 15]);
        assert_eq!(prior.probs()[g.index(17, 17, 17)], max);
        assert!(prior.probs()[g.index(18, 16, 16)] < max);
        assert!((prior.probs().iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn duplicate_cases_give_identical_prior() {
        let lung = cube_lung([24, 24, 24], [2, 2, 2], [21, 20, 22]);
        let lesion = Mask3::from_fn(*lung.geometry(), |[x, y, z]| u8::from((x * 3 + y * 5 + z * 7) % 41 == 0));
        let one = build_prior(&[(lesion.clone(), lung.clone())], [16, 16, 16], PriorMode::Centroid).unwrap();
        let two = build_prior(
            &[(lesion.clone(), lung.clone()), (lesion, lung)],
            [16, 16, 16],
            PriorMode::Centroid,
        )
        .unwrap();
        assert_eq!(one, two);
    }

    #[test]
    fn empty_lesions_are_degenerate() {
        let lung = Mask3::filled(Geometry::with_dims([4, 4, 4]), 1);
        let lesion = Mask3::zeros(*lung.geometry());
        assert!(matches!(
            build_prior(&[(lesion, lung)], [8, 8, 8], PriorMode::Centroid),
            Err(Error::DegeneratePrior(_))
        ));
    }

    #[test]
    fn single_cell_prior_samples_stay_in_cell() {
        let grid = [8, 8, 8];
        let mut w = vec![0.0; 512];
        let cell = [5usize, 2, 6];
        w[Geometry::with_dims(grid).index(cell[0], cell[1], cell[2])] = 1.0;
        let prior = SpatialPrior::from_weights(grid, w).unwrap();
        let lung = Mask3::filled(Geometry::with_dims([32, 32, 32]), 1);
        let t = canonical_transform(&lung, grid).unwrap();
        let centres = sample_centers(&prior, 200, &lung, 9).unwrap();
        for c in centres {
            let g = t.forward(c);
            for a in 0..3 {
                assert!(g[a] >= cell[a] as f64 - 0.5 - 1e-9 && g[a] < cell[a] as f64 + 0.5 + 1e-9);
            }
        }
    }

    #[test]
    fn samples_fall_back_into_the_lung() {
        // All prior mass outside a tiny lung region forces the fallback.
        let grid = [4, 4, 4];
        let mut w = vec![0.0; 64];
        w[0] = 1.0;
        let prior = SpatialPrior::from_weights(grid, w).unwrap();
        let mut lung = cube_lung([16, 16, 16], [0, 0, 0], [15, 15, 15]);
        for (i, v) in lung.data_mut().iter_mut().enumerate() {
            let [x, y, z] = Geometry::with_dims([16, 16, 16]).coords(i);
            *v = u8::from(x + y + z > 40);
        }
        lung.set(0, 0, 0, 1);
        let centres = sample_centers(&prior, 20, &lung, 3).unwrap();
        for c in centres {
            let v = containing_voxel(c);
            let i = lung.geometry().checked_index(v).unwrap();
            assert_eq!(lung.data()[i], 1);
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let prior = SpatialPrior::uniform([8, 8, 8]).unwrap();
        let lung = cube_lung([20, 20, 20], [2, 3, 4], [17, 16, 15]);
        assert_eq!(
            sample_centers(&prior, 50, &lung, 11).unwrap(),
            sample_centers(&prior, 50, &lung, 11).unwrap()
        );
    }
}
