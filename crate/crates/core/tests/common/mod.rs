//! Fixtures and brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use lesion_synth::mesh::TriMesh;
use rayon::prelude::*;
use lesion_synth::volume::{Geometry, HuVolume, Mask3};

/// SplitMix64 step, used for fixture generation independently of the crate.
pub fn splitmix(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn unit(state: &mut u64) -> f64 {
    (splitmix(state) >> 11) as f64 / (1u64 << 53) as f64
}

pub fn random_mask(dims: [usize; 3], seed: u64, density: f64) -> Mask3 {
    let mut s = seed;
    Mask3::from_fn(Geometry::with_dims(dims), |_| u8::from(unit(&mut s) < density))
}

/// A chest-like phantom: soft tissue with two ellipsoidal lungs of textured
/// parenchyma (about -850 HU).
pub fn chest_phantom(dims: [usize; 3], spacing: [f64; 3]) -> (HuVolume, Mask3) {
    let g = Geometry::new(dims, spacing, [-100.0, -80.0, 20.0]).unwrap();
    let [nx, ny, nz] = dims.map(|d| d as f64);
    let lung = Mask3::from_fn(g, |[x, y, z]| {
        let (x, y, z) = (x as f64, y as f64, z as f64);
        let inside = |cx: f64| {
            ((x - cx) / (0.2 * nx)).powi(2) + ((y - 0.5 * ny) / (0.35 * ny)).powi(2) + ((z - 0.5 * nz) / (0.45 * nz)).powi(2)
                < 1.0
        };
        u8::from(inside(0.28 * nx) || inside(0.72 * nx))
    });
    let mut s = 99u64;
    let vol = HuVolume::from_fn(g, |[x, y, z]| {
        let noise = (unit(&mut s) * 40.0) as i16;
        if lung.get(x, y, z) == 1 {
            -870 + noise
        } else {
            20 + noise
        }
    });
    (vol, lung)
}

/// Parity of crossings of a ray from `q` along a fixed, deliberately generic
/// direction (Moller-Trumbore per triangle).
pub fn ray_parity_inside(mesh: &TriMesh, q: [f64; 3], candidates: &[usize]) -> bool {
    let d = RAY_DIR;
    let mut hits = 0;
    for &f in candidates {
        let [a, b, c] = mesh.faces[f].map(|i| {
            let p = mesh.vertices[i];
            [p.x, p.y, p.z]
        });
        let e1 = sub(b, a);
        let e2 = sub(c, a);
        let h = cross(d, e2);
        let det = dot(e1, h);
        if det.abs() < 1e-14 {
            continue;
        }
        let inv = 1.0 / det;
        let s = sub(q, a);
        let u = inv * dot(s, h);
        if !(0.0..=1.0).contains(&u) {
            continue;
        }
        let qv = cross(s, e1);
        let v = inv * dot(d, qv);
        if v < 0.0 || u + v > 1.0 {
            continue;
        }
        if inv * dot(e2, qv) > 0.0 {
            hits += 1;
        }
    }
    hits % 2 == 1
}

/// Mostly +x with small irrational tilts, so rays avoid lattice-aligned edges.
pub const RAY_DIR: [f64; 3] = [1.0, 0.001_414_213_562_373_095, 0.002_236_067_977_499_79];

/// Brute-force containment of every voxel centre of `geometry`.
pub fn brute_force_voxelize(mesh: &TriMesh, geometry: Geometry) -> Mask3 {
    let (lo, hi) = mesh.bounds();
    let span = (hi.x - lo.x).max(0.0) + geometry.spacing[0] * geometry.dims[0] as f64;
    // Rays drift by at most span * tilt across the grid.
    let margin = span * RAY_DIR[1].max(RAY_DIR[2]) + 1e-6;
    let tri_bounds: Vec<([f64; 2], [f64; 2])> = mesh
        .faces
        .iter()
        .map(|f| {
            let ys = f.map(|i| mesh.vertices[i].y);
            let zs = f.map(|i| mesh.vertices[i].z);
            (
                [ys.iter().cloned().fold(f64::INFINITY, f64::min), ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max)],
                [zs.iter().cloned().fold(f64::INFINITY, f64::min), zs.iter().cloned().fold(f64::NEG_INFINITY, f64::max)],
            )
        })
        .collect();
    let mut out = Mask3::zeros(geometry);
    let [nx, ny, nz] = geometry.dims;
    for z in 0..nz {
        for y in 0..ny {
            let p = geometry.to_physical([0.0, y as f64, z as f64]);
            let candidates: Vec<usize> = tri_bounds
                .iter()
                .enumerate()
                .filter(|(_, (yb, zb))| {
                    yb[0] <= p[1] + margin && yb[1] >= p[1] - 1e-9 && zb[0] <= p[2] + margin && zb[1] >= p[2] - 1e-9
                })
                .map(|(i, _)| i)
                .collect();
            for x in 0..nx {
                let q = geometry.to_physical([x as f64, y as f64, z as f64]);
                if ray_parity_inside(mesh, q, &candidates) {
                    out.set(x, y, z, 1);
                }
            }
        }
    }
    out
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

/// Exact nearest-background distance by exhaustive search (mm).
pub fn brute_force_distance(mask: &Mask3) -> Vec<f64> {
    let g = *mask.geometry();
    let bg: Vec<[f64; 3]> = (0..g.len())
        .filter(|&i| mask.data()[i] == 0)
        .map(|i| g.coords(i).map(|c| c as f64))
        .map(|c| [c[0] * g.spacing[0], c[1] * g.spacing[1], c[2] * g.spacing[2]])
        .collect();
    (0..g.len())
        .into_par_iter()
        .map(|i| {
            if mask.data()[i] == 0 {
                return 0.0;
            }
            let c = g.coords(i).map(|c| c as f64);
            let p = [c[0] * g.spacing[0], c[1] * g.spacing[1], c[2] * g.spacing[2]];
            bg.iter()
                .map(|b| (p[0] - b[0]).powi(2) + (p[1] - b[1]).powi(2) + (p[2] - b[2]).powi(2))
                .fold(f64::INFINITY, f64::min)
                .sqrt()
        })
        .collect()
}
