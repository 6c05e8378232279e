//! Surface area and sphericity of binary masks.

use crate::volume::Mask3;

/// Solid-angle fractions of the Voronoi cells of the 26 lattice directions
/// on the unit sphere, by number of non-zero components.
const VORONOI_FRACTION: [f64; 3] = [0.045_777_89, 0.036_980_62, 0.035_195_63];

/// Surface area (mm^2) by a Crofton estimate over the 13 lattice directions:
/// counts foreground/background transitions along each direction (outside
/// the grid is background) and averages `2 * transitions * line area` with
/// Voronoi weights.
pub fn surface_area(mask: &Mask3) -> f64 {
    let g = *mask.geometry();
    let [nx, ny, nz] = g.dims.map(|d| d as i64);
    let voxel_volume: f64 = g.spacing.iter().product();
    let mut area = 0.0;
    for dir in half_directions() {
        let mut transitions = 0u64;
        for z in 0..nz {
            for y in 0..ny {
                for x in 0..nx {
                    if mask.get(x as usize, y as usize, z as usize) == 0 {
                        continue;
                    }
                    for sign in [1, -1] {
                        let q = [x + sign * dir[0], y + sign * dir[1], z + sign * dir[2]];
                        let inside = g.checked_index(q).is_some_and(|i| mask.data()[i] != 0);
                        if !inside {
                            transitions += 1;
                        }
                    }
                }
            }
        }
        let step: f64 = (0..3).map(|a| (dir[a] as f64 * g.spacing[a]).powi(2)).sum::<f64>().sqrt();
        let nonzero = dir.iter().filter(|&&c| c != 0).count();
        // Half-sphere weight is twice the full-sphere fraction.
        let weight = 2.0 * VORONOI_FRACTION[nonzero - 1];
        area += weight * transitions as f64 * voxel_volume / step;
    }
    2.0 * area
}

/// `(36 pi V^2)^(1/3) / S`; 1 for a ball. `None` for an empty mask.
pub fn sphericity(mask: &Mask3) -> Option<f64> {
    let n = mask.count();
    if n == 0 {
        return None;
    }
    let volume = n as f64 * mask.geometry().spacing.iter().product::<f64>();
    Some((36.0 * std::f64::consts::PI * volume * volume).cbrt() / surface_area(mask))
}

fn half_directions() -> Vec<[i64; 3]> {
    let mut out = Vec::with_capacity(13);
    for z in -1..=1 {
        for y in -1..=1 {
            for x in -1..=1i64 {
                let d = [x, y, z];
                // Keep the lexicographically positive half.
                if d.iter().find(|&&c| c != 0).is_some_and(|&c| c > 0) {
                    out.push(d);
                }
            }
        }
    }
    out
}
