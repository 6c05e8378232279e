//! Exact Euclidean distance transform by separable lower envelopes of
//! parabolas (one pass per axis, anisotropic spacing).

use rayon::prelude::*;

use crate::volume::{Grid, Mask3};

/// Squared distance (mm^2) from every voxel centre to the nearest background
/// voxel centre; background voxels are 0. Without any background voxel every
/// value is `f64::INFINITY`.
pub fn squared_distance_to_background(mask: &Mask3) -> Grid<f64> {
    let g = *mask.geometry();
    let [nx, ny, nz] = g.dims;
    let mut d: Vec<f64> = mask
        .data()
        .iter()
        .map(|&v| if v == 0 { 0.0 } else { f64::INFINITY })
        .collect();

    // x and y lines live inside one z-plane.
    d.par_chunks_mut(nx * ny).for_each(|plane| {
        let mut buf = vec![0.0; nx.max(ny)];
        let mut scratch = Envelope::new(nx.max(ny));
        for y in 0..ny {
            let row = &mut plane[y * nx..(y + 1) * nx];
            buf[..nx].copy_from_slice(row);
            scratch.transform(&buf[..nx], g.spacing[0], row);
        }
        let mut col = vec![0.0; ny];
        for x in 0..nx {
            for y in 0..ny {
                buf[y] = plane[x + nx * y];
            }
            scratch.transform(&buf[..ny], g.spacing[1], &mut col);
            for y in 0..ny {
                plane[x + nx * y] = col[y];
            }
        }
    });

    if nz > 1 {
        let src = d.clone();
        let columns: Vec<Vec<f64>> = (0..nx * ny)
            .into_par_iter()
            .map_init(
                || (vec![0.0; nz], Envelope::new(nz)),
                |(buf, env), xy| {
                    for z in 0..nz {
                        buf[z] = src[xy + nx * ny * z];
                    }
                    let mut out = vec![0.0; nz];
                    env.transform(buf, g.spacing[2], &mut out);
                    out
                },
            )
            .collect();
        for (xy, column) in columns.into_iter().enumerate() {
            for (z, v) in column.into_iter().enumerate() {
                d[xy + nx * ny * z] = v;
            }
        }
    }

    Grid::from_vec(g, d).expect("same geometry")
}

/// Euclidean distance (mm) to the nearest background voxel centre.
pub fn distance_to_background(mask: &Mask3) -> Grid<f64> {
    let sq = squared_distance_to_background(mask);
    let g = *sq.geometry();
    Grid::from_vec(g, sq.into_vec().into_iter().map(f64::sqrt).collect()).expect("same geometry")
}

struct Envelope {
    sites: Vec<usize>,
    bounds: Vec<f64>,
}

impl Envelope {
    fn new(n: usize) -> Self {
        Self {
            sites: vec![0; n],
            bounds: vec![0.0; n + 1],
        }
    }

    /// `out[p] = min_q (s * (p - q))^2 + f[q]` over finite `f[q]`.
    fn transform(&mut self, f: &[f64], s: f64, out: &mut [f64]) {
        let n = f.len();
        let pos = |i: usize| i as f64 * s;
        let mut k: isize = -1;
        for q in 0..n {
            if !f[q].is_finite() {
                continue;
            }
            let fq = f[q] + pos(q) * pos(q);
            loop {
                if k < 0 {
                    k = 0;
                    self.sites[0] = q;
                    self.bounds[0] = f64::NEG_INFINITY;
                    self.bounds[1] = f64::INFINITY;
                    break;
                }
                let r = self.sites[k as usize];
                let fr = f[r] + pos(r) * pos(r);
                let cross = (fq - fr) / (2.0 * (pos(q) - pos(r)));
                if cross <= self.bounds[k as usize] {
                    k -= 1;
                    continue;
                }
                k += 1;
                self.sites[k as usize] = q;
                self.bounds[k as usize] = cross;
                self.bounds[k as usize + 1] = f64::INFINITY;
                break;
            }
        }
        if k < 0 {
            out.fill(f64::INFINITY);
            return;
        }
        let mut j = 0usize;
        for (p, o) in out.iter_mut().enumerate() {
            let x = pos(p);
            while self.bounds[j + 1] < x {
                j += 1;
            }
            let q = self.sites[j];
            let dx = x - pos(q);
            *o = dx * dx + f[q];
        }
    }
}
