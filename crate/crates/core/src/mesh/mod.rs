//! Random closed lesion shapes as triangle meshes, and their voxelization.
//!
//! A shape starts as an icosphere, is pushed outward around `n_points`
//! randomly chosen vertices, smoothed with HC-Laplacian filtering, and is
//! rasterized by recursive octree subdivision with a ray-parity inside test.

mod deform;
mod smooth;
mod stl;
mod voxelize;

pub use deform::{affine_factor, deform, deform_traced, DeformationStep};
pub use smooth::{laplacian_energy, smooth_hc};
pub use stl::write_ascii_stl;
pub use voxelize::{point_in_mesh, voxelize};

use std::collections::HashMap;

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::Mask3;

pub type Point = Point3<f64>;

/// Triangle mesh in millimetre space, faces counter-clockwise seen from outside.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<Point>,
    pub faces: Vec<[usize; 3]>,
}

impl TriMesh {
    pub fn new(vertices: Vec<Point>, faces: Vec<[usize; 3]>) -> Result<Self> {
        let n = vertices.len();
        for (i, f) in faces.iter().enumerate() {
            if f.iter().any(|&v| v >= n) {
                return Err(Error::Parameter(format!("face {i} indexes past {n} vertices")));
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::Parameter(format!("face {i} is degenerate: {f:?}")));
            }
        }
        if let Some(i) = vertices.iter().position(|p| !p.coords.iter().all(|c| c.is_finite())) {
            return Err(Error::Parameter(format!("vertex {i} is not finite")));
        }
        Ok(Self { vertices, faces })
    }

    /// Every undirected edge is used by exactly two faces, once in each direction.
    pub fn is_closed(&self) -> bool {
        let mut directed: HashMap<(usize, usize), u32> = HashMap::with_capacity(self.faces.len() * 3);
        for f in &self.faces {
            for k in 0..3 {
                *directed.entry((f[k], f[(k + 1) % 3])).or_insert(0) += 1;
            }
        }
        !self.faces.is_empty()
            && directed
                .iter()
                .all(|(&(a, b), &count)| count == 1 && directed.get(&(b, a)) == Some(&1))
    }

    pub(crate) fn ensure_closed(&self) -> Result<()> {
        if self.is_closed() {
            Ok(())
        } else {
            Err(Error::Precondition("mesh is not a closed oriented 2-manifold".into()))
        }
    }

    pub fn centroid(&self) -> Point {
        let sum = self
            .vertices
            .iter()
            .fold(Vector3::zeros(), |acc, p| acc + p.coords);
        Point::from(sum / self.vertices.len() as f64)
    }

    /// Sorted, deduplicated one-ring neighbours of every vertex.
    pub fn vertex_neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.vertices.len()];
        for f in &self.faces {
            for k in 0..3 {
                let a = f[k];
                let b = f[(k + 1) % 3];
                adj[a].push(b);
                adj[b].push(a);
            }
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        adj
    }

    /// Enclosed volume by the divergence theorem (positive for outward faces).
    pub fn signed_volume(&self) -> f64 {
        self.faces
            .iter()
            .map(|f| {
                let [a, b, c] = f.map(|i| self.vertices[i].coords);
                a.dot(&b.cross(&c)) / 6.0
            })
            .sum()
    }

    pub fn surface_area(&self) -> f64 {
        self.faces
            .iter()
            .map(|f| {
                let [a, b, c] = f.map(|i| self.vertices[i]);
                (b - a).cross(&(c - a)).norm() / 2.0
            })
            .sum()
    }

    /// Axis-aligned bounds `(min, max)`.
    pub fn bounds(&self) -> (Point, Point) {
        let mut lo = Point::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
        let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &self.vertices {
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        (lo, hi)
    }

    /// Uniform scaling about `center`.
    pub fn scaled(&self, factor: f64, center: Point) -> TriMesh {
        TriMesh {
            vertices: self
                .vertices
                .iter()
                .map(|p| center + (p - center) * factor)
                .collect(),
            faces: self.faces.clone(),
        }
    }
}

/// Largest accepted icosphere subdivision level.
pub const MAX_SUBDIVISIONS: u32 = 6;

/// Icosahedron subdivided `subdivisions` times with vertices projected onto
/// the sphere of `radius` about the origin.
pub fn make_icosphere(subdivisions: u32, radius: f64) -> Result<TriMesh> {
    if subdivisions > MAX_SUBDIVISIONS {
        return Err(Error::Parameter(format!(
            "subdivisions must be in [0, {MAX_SUBDIVISIONS}], got {subdivisions}"
        )));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::Parameter(format!("radius must be positive, got {radius}")));
    }
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices: Vec<Point> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| project(Point::new(x, y, z), radius))
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];

    for _ in 0..subdivisions {
        let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<Point>| -> usize {
            let key = (a.min(b), a.max(b));
            *midpoints.entry(key).or_insert_with(|| {
                let m = Point::from((vertices[a].coords + vertices[b].coords) / 2.0);
                vertices.push(project(m, radius));
                vertices.len() - 1
            })
        };
        for &[a, b, c] in &faces {
            let ab = midpoint(a, b, &mut vertices);
            let bc = midpoint(b, c, &mut vertices);
            let ca = midpoint(c, a, &mut vertices);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    Ok(TriMesh { vertices, faces })
}

fn project(p: Point, radius: f64) -> Point {
    Point::from(p.coords * (radius / p.coords.norm()))
}

/// Parameters of one random lesion shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LesionShapeParams {
    /// Number of surface vertices that receive an outward push.
    pub n_points: usize,
    /// Bounds of the per-vertex amplitude factor (1/mm).
    pub lambda_range: [f64; 2],
    /// Neighbourhood radius of one push (mm).
    pub delta: f64,
    /// Radius of the template sphere (mm).
    pub base_radius: f64,
    pub sphere_subdivisions: u32,
    pub smoothing_iters: usize,
    /// Supplied per call by the pipeline; never read from configuration files.
    #[serde(skip)]
    pub rng_seed: u64,
}

impl Default for LesionShapeParams {
    fn default() -> Self {
        let base_radius = 10.0;
        Self {
            n_points: 10,
            lambda_range: [0.02, 0.1],
            delta: 0.6 * base_radius,
            base_radius,
            sphere_subdivisions: 3,
            smoothing_iters: 2,
            rng_seed: 0,
        }
    }
}

impl LesionShapeParams {
    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.lambda_range;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::Parameter(format!(
                "lambda_range must satisfy low <= high, got {:?}",
                self.lambda_range
            )));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::Parameter(format!("delta must be positive, got {}", self.delta)));
        }
        if !(self.base_radius > 0.0 && self.base_radius.is_finite()) {
            return Err(Error::Parameter(format!(
                "base_radius must be positive, got {}",
                self.base_radius
            )));
        }
        if self.sphere_subdivisions > MAX_SUBDIVISIONS {
            return Err(Error::Parameter(format!(
                "sphere_subdivisions must be in [0, {MAX_SUBDIVISIONS}]"
            )));
        }
        Ok(())
    }
}

/// Builds, deforms and smooths one lesion shape (centred on the origin).
pub fn synthesize_shape(params: &LesionShapeParams) -> Result<TriMesh> {
    params.validate()?;
    let sphere = make_icosphere(params.sphere_subdivisions, params.base_radius)?;
    let deformed = deform(&sphere, params)?;
    Ok(smooth_hc(&deformed, params.smoothing_iters))
}

/// One voxelized lesion mask at `spacing` with `padding` mm of margin.
pub fn synthesize_lesion_mask(params: &LesionShapeParams, spacing: [f64; 3], padding: f64) -> Result<Mask3> {
    voxelize(&synthesize_shape(params)?, spacing, padding)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn icosphere_counts() {
        for (s, v, f) in [(0, 12, 20), (1, 42, 80), (2, 162, 320), (3, 642, 1280)] {
            let m = make_icosphere(s, 1.0).unwrap();
            assert_eq!((m.vertices.len(), m.faces.len()), (v, f), "subdivisions {s}");
            let edges = m.faces.len() * 3 / 2;
            assert_eq!(m.vertices.len() as i64 - edges as i64 + m.faces.len() as i64, 2);
            assert!(m.is_closed());
        }
    }

    #[test]
    fn icosphere_vertices_on_radius() {
        let r = 7.5;
        let m = make_icosphere(4, r).unwrap();
        for p in &m.vertices {
            assert!((p.coords.norm() - r).abs() <= 1e-9 * r);
        }
        assert!(m.signed_volume() > 0.0);
    }

    #[test]
    fn icosphere_rejects_bad_levels() {
        assert!(matches!(make_icosphere(7, 1.0), Err(Error::Parameter(_))));
        assert!(make_icosphere(1, 0.0).is_err());
    }

    #[test]
    fn open_mesh_is_detected() {
        let mut m = make_icosphere(1, 1.0).unwrap();
        m.faces.pop();
        assert!(!m.is_closed());
        let mut flipped = make_icosphere(1, 1.0).unwrap();
        flipped.faces[0].swap(1, 2);
        assert!(!flipped.is_closed());
    }

    #[test]
    fn degenerate_faces_are_rejected() {
        let v = vec![Point::origin(), Point::new(1.0, 0.0, 0.0), Point::new(0.0, 1.0, 0.0)];
        assert!(TriMesh::new(v.clone(), vec![[0, 1, 1]]).is_err());
        assert!(TriMesh::new(v, vec![[0, 1, 3]]).is_err());
    }

    #[test]
    fn default_params_validate() {
        LesionShapeParams::default().validate().unwrap();
        let bad = LesionShapeParams {
            lambda_range: [1.0, 0.5],
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
