use rand::seq::index;
use rand::Rng as _;

use super::{LesionShapeParams, TriMesh};
use crate::error::{Error, Result};
use crate::rng;

/// Scale factor for a neighbour at `distance` from a pushed vertex:
/// `1 + (delta - distance) * lambda`.
#[inline]
pub fn affine_factor(delta: f64, distance: f64, lambda: f64) -> f64 {
    1.0 + (delta - distance) * lambda
}

/// One push: the selected vertex, its amplitude, and every `(vertex, factor)` applied.
#[derive(Debug, Clone, PartialEq)]
pub struct DeformationStep {
    pub vertex: usize,
    pub lambda: f64,
    pub factors: Vec<(usize, f64)>,
}

/// Pushes `n_points` random vertices outward. See [`deform_traced`].
pub fn deform(mesh: &TriMesh, params: &LesionShapeParams) -> Result<TriMesh> {
    deform_traced(mesh, params).map(|(m, _)| m)
}

/// Selects `n_points` distinct vertices (seeded), draws a per-vertex amplitude
/// uniformly from `lambda_range`, and scales every vertex closer than `delta`
/// to the selected one radially about the input centroid by [`affine_factor`].
/// Pushes are applied in selection order against the current positions, so
/// overlapping neighbourhoods compose multiplicatively. Faces are untouched.
pub fn deform_traced(mesh: &TriMesh, params: &LesionShapeParams) -> Result<(TriMesh, Vec<DeformationStep>)> {
    params.validate()?;
    mesh.ensure_closed()?;
    let n = mesh.vertices.len();
    if params.n_points > n {
        return Err(Error::Parameter(format!(
            "n_points = {} exceeds the {n} mesh vertices",
            params.n_points
        )));
    }

    let mut rng = rng::rng(params.rng_seed);
    let selected = index::sample(&mut rng, n, params.n_points);
    let [lo, hi] = params.lambda_range;
    let center = mesh.centroid();
    let mut vertices = mesh.vertices.clone();
    let mut steps = Vec::with_capacity(params.n_points);

    for v in selected.iter() {
        let lambda = if lo == hi { lo } else { rng.random_range(lo..=hi) };
        let anchor = vertices[v];
        let mut factors = Vec::new();
        for (j, p) in vertices.iter_mut().enumerate() {
            let distance = (anchor - *p).norm();
            if distance < params.delta {
                let alpha = affine_factor(params.delta, distance, lambda);
                if alpha != 1.0 {
                    *p = center + (*p - center) * alpha;
                }
                factors.push((j, alpha));
            }
        }
        steps.push(DeformationStep {
            vertex: v,
            lambda,
            factors,
        });
    }

    Ok((
        TriMesh {
            vertices,
            faces: mesh.faces.clone(),
        },
        steps,
    ))
}
