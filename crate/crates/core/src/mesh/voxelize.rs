//! Recursive-subdivision rasterization of closed meshes.
//!
//! A voxel is foreground iff its centre is inside the mesh. The grid region is
//! split octree-style: a cell whose box of voxel centres touches no triangle
//! lies entirely on one side of the surface and is resolved by a single
//! inside test; cells that touch triangles are split down to single voxels.

use nalgebra::Vector3;

use super::{Point, TriMesh};
use crate::error::{Error, Result};
use crate::volume::{Geometry, Mask3};

/// Rasterizes `mesh` onto a grid covering its bounding box plus `padding` mm.
pub fn voxelize(mesh: &TriMesh, spacing: [f64; 3], padding: f64) -> Result<Mask3> {
    mesh.ensure_closed()?;
    if !(padding >= 0.0 && padding.is_finite()) {
        return Err(Error::Parameter(format!("padding must be non-negative, got {padding}")));
    }
    let (lo, hi) = mesh.bounds();
    let mut dims = [0usize; 3];
    let mut origin = [0.0; 3];
    for a in 0..3 {
        origin[a] = lo[a] - padding;
        let extent = hi[a] - lo[a] + 2.0 * padding;
        dims[a] = (extent / spacing[a]).floor() as usize + 1;
    }
    let geometry = Geometry::new(dims, spacing, origin)?;
    let mut mask = Mask3::zeros(geometry);

    let scale = (0..3).map(|a| hi[a] - lo[a]).fold(1.0, f64::max);
    let ctx = Rasterizer {
        mesh,
        geometry,
        eps: 1e-9 * scale,
    };
    let all: Vec<usize> = (0..mesh.faces.len()).collect();
    ctx.subdivide([0; 3], dims, &all, mask.data_mut());
    Ok(mask)
}

struct Rasterizer<'a> {
    mesh: &'a TriMesh,
    geometry: Geometry,
    eps: f64,
}

impl Rasterizer<'_> {
    fn centre(&self, v: [usize; 3]) -> Point {
        let p = self.geometry.to_physical(v.map(|i| i as f64));
        Point::new(p[0], p[1], p[2])
    }

    /// Resolves the voxel block `[lo, hi)`.
    fn subdivide(&self, lo: [usize; 3], hi: [usize; 3], tris: &[usize], out: &mut [u8]) {
        let bmin = self.centre(lo);
        let bmax = self.centre(hi.map(|h| h - 1));
        let centre = Point::from((bmin.coords + bmax.coords) / 2.0);
        let half = (bmax - bmin) / 2.0 + Vector3::repeat(self.eps);

        let touching: Vec<usize> = tris
            .iter()
            .copied()
            .filter(|&t| {
                let [a, b, c] = self.mesh.faces[t].map(|i| self.mesh.vertices[i]);
                triangle_box_overlap(centre, half, a, b, c)
            })
            .collect();

        let single = (0..3).all(|a| hi[a] - lo[a] == 1);
        if touching.is_empty() || single {
            if point_in_mesh(self.mesh, self.centre(lo)) {
                for z in lo[2]..hi[2] {
                    for y in lo[1]..hi[1] {
                        let row = self.geometry.index(0, y, z);
                        out[row + lo[0]..row + hi[0]].fill(1);
                    }
                }
            }
            return;
        }

        let mid: [usize; 3] = std::array::from_fn(|a| lo[a] + (hi[a] - lo[a]).div_ceil(2));
        for octant in 0..8 {
            let mut clo = [0; 3];
            let mut chi = [0; 3];
            let mut empty = false;
            for a in 0..3 {
                let upper = octant >> a & 1 == 1;
                (clo[a], chi[a]) = if upper { (mid[a], hi[a]) } else { (lo[a], mid[a]) };
                empty |= clo[a] >= chi[a];
            }
            if !empty {
                self.subdivide(clo, chi, &touching, out);
            }
        }
    }
}

/// Ray-parity containment test along +x.
///
/// Crossings are counted with a half-open rule on the triangles' projection
/// onto the yz-plane, evaluated per shared edge in a canonical vertex order, so
/// a ray through an edge or vertex of a closed mesh is counted consistently.
pub fn point_in_mesh(mesh: &TriMesh, q: Point) -> bool {
    let mut crossings = 0u32;
    for f in &mesh.faces {
        if let Some(x) = crossing_x(mesh, *f, q) {
            if x > q.x {
                crossings += 1;
            }
        }
    }
    crossings % 2 == 1
}

#[inline]
fn cross2(u: (f64, f64), v: (f64, f64)) -> f64 {
    u.0 * v.1 - u.1 * v.0
}

/// Edge function of directed edge `i -> j` at `q`, computed in index order so
/// the reverse edge yields the exact negation.
#[inline]
fn edge_function(mesh: &TriMesh, i: usize, j: usize, q: (f64, f64)) -> f64 {
    let (s, t, sign) = if i < j { (i, j, 1.0) } else { (j, i, -1.0) };
    let ps = &mesh.vertices[s];
    let pt = &mesh.vertices[t];
    sign * cross2((pt.y - ps.y, pt.z - ps.z), (q.0 - ps.y, q.1 - ps.z))
}

/// Top-left rule for a counter-clockwise triangle in (y, z).
#[inline]
fn owns_edge(mesh: &TriMesh, i: usize, j: usize) -> bool {
    let dy = mesh.vertices[j].y - mesh.vertices[i].y;
    let dz = mesh.vertices[j].z - mesh.vertices[i].z;
    dz < 0.0 || (dz == 0.0 && dy < 0.0)
}

fn crossing_x(mesh: &TriMesh, face: [usize; 3], q: Point) -> Option<f64> {
    let [mut a, b, mut c] = face;
    let q2 = (q.y, q.z);
    let area = {
        let pa = &mesh.vertices[a];
        let pb = &mesh.vertices[b];
        let pc = &mesh.vertices[c];
        cross2((pb.y - pa.y, pb.z - pa.z), (pc.y - pa.y, pc.z - pa.z))
    };
    if area == 0.0 {
        return None;
    }
    if area < 0.0 {
        std::mem::swap(&mut a, &mut c);
    }
    let mut e = [0.0; 3];
    for (k, (i, j)) in [(a, b), (b, c), (c, a)].into_iter().enumerate() {
        e[k] = edge_function(mesh, i, j, q2);
        if e[k] < 0.0 || (e[k] == 0.0 && !owns_edge(mesh, i, j)) {
            return None;
        }
    }
    let sum = e[0] + e[1] + e[2];
    if sum <= 0.0 {
        return None;
    }
    // e[k] is opposite the vertex that closes edge k.
    let x = (e[1] * mesh.vertices[a].x + e[2] * mesh.vertices[b].x + e[0] * mesh.vertices[c].x) / sum;
    Some(x)
}

/// Separating-axis test between a triangle and an axis-aligned box.
fn triangle_box_overlap(centre: Point, half: Vector3<f64>, a: Point, b: Point, c: Point) -> bool {
    let v = [a - centre, b - centre, c - centre];
    for axis in 0..3 {
        let lo = v[0][axis].min(v[1][axis]).min(v[2][axis]);
        let hi = v[0][axis].max(v[1][axis]).max(v[2][axis]);
        if lo > half[axis] || hi < -half[axis] {
            return false;
        }
    }

    let edges = [v[1] - v[0], v[2] - v[1], v[0] - v[2]];
    let unit = [Vector3::x(), Vector3::y(), Vector3::z()];
    for e in &edges {
        for u in &unit {
            let axis = u.cross(e);
            if axis.norm_squared() == 0.0 {
                continue;
            }
            let p = [axis.dot(&v[0]), axis.dot(&v[1]), axis.dot(&v[2])];
            let r = half.x * axis.x.abs() + half.y * axis.y.abs() + half.z * axis.z.abs();
            let lo = p[0].min(p[1]).min(p[2]);
            let hi = p[0].max(p[1]).max(p[2]);
            if lo > r || hi < -r {
                return false;
            }
        }
    }

    let normal = edges[0].cross(&edges[1]);
    let d = normal.dot(&v[0]);
    let r = half.x * normal.x.abs() + half.y * normal.y.abs() + half.z * normal.z.abs();
    d.abs() <= r
}
