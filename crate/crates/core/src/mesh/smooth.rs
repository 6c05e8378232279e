use nalgebra::Vector3;

use super::{Point, TriMesh};

/// Coefficient pulling towards the original positions.
const HC_ALPHA: f64 = 0.0;
/// Weight of a vertex's own correction against its neighbours'.
const HC_BETA: f64 = 0.5;

/// HC-Laplacian smoothing (Laplacian step followed by the push-back
/// correction), `alpha = 0`, `beta = 0.5`. The face list is unchanged.
pub fn smooth_hc(mesh: &TriMesh, iterations: usize) -> TriMesh {
    if iterations == 0 {
        return mesh.clone();
    }
    let adj = mesh.vertex_neighbors();
    let original = &mesh.vertices;
    let mut p = mesh.vertices.clone();
    let mut b = vec![Vector3::zeros(); p.len()];

    for _ in 0..iterations {
        let q = p.clone();
        for i in 0..p.len() {
            if adj[i].is_empty() {
                continue;
            }
            let mean = adj[i].iter().fold(Vector3::zeros(), |acc, &j| acc + q[j].coords)
                / adj[i].len() as f64;
            p[i] = Point::from(mean);
            b[i] = p[i].coords - (HC_ALPHA * original[i].coords + (1.0 - HC_ALPHA) * q[i].coords);
        }
        for i in 0..p.len() {
            if adj[i].is_empty() {
                continue;
            }
            let neighbor_b = adj[i].iter().fold(Vector3::zeros(), |acc, &j| acc + b[j])
                / adj[i].len() as f64;
            let d = HC_BETA * b[i] + (1.0 - HC_BETA) * neighbor_b;
            p[i] -= d;
        }
    }

    TriMesh {
        vertices: p,
        faces: mesh.faces.clone(),
    }
}

/// Sum over vertices of the umbrella-Laplacian magnitude, a discrete total
/// absolute mean-curvature proxy.
pub fn laplacian_energy(mesh: &TriMesh) -> f64 {
    let adj = mesh.vertex_neighbors();
    mesh.vertices
        .iter()
        .zip(&adj)
        .filter(|(_, n)| !n.is_empty())
        .map(|(p, n)| {
            let mean = n
                .iter()
                .fold(Vector3::zeros(), |acc, &j| acc + mesh.vertices[j].coords)
                / n.len() as f64;
            (mean - p.coords).norm()
        })
        .sum()
}
