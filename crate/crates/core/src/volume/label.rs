use super::Mask3;

/// One 26-connected foreground component.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    /// Linear voxel indices, ascending.
    pub voxels: Vec<usize>,
    /// Mean voxel index.
    pub centroid: [f64; 3],
}

/// Labels 26-connected foreground components in scan order of their first voxel.
pub fn label_components(mask: &Mask3) -> Vec<Component> {
    let g = *mask.geometry();
    let [nx, ny, nz] = g.dims;
    let data = mask.data();
    let mut seen = vec![false; data.len()];
    let mut out = Vec::new();
    let mut stack = Vec::new();

    for start in 0..data.len() {
        if data[start] == 0 || seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let mut voxels = Vec::new();
        while let Some(i) = stack.pop() {
            voxels.push(i);
            let [x, y, z] = g.coords(i);
            for dz in -1i64..=1 {
                let zz = z as i64 + dz;
                if zz < 0 || zz >= nz as i64 {
                    continue;
                }
                for dy in -1i64..=1 {
                    let yy = y as i64 + dy;
                    if yy < 0 || yy >= ny as i64 {
                        continue;
                    }
                    for dx in -1i64..=1 {
                        let xx = x as i64 + dx;
                        if xx < 0 || xx >= nx as i64 {
                            continue;
                        }
                        let j = g.index(xx as usize, yy as usize, zz as usize);
                        if data[j] != 0 && !seen[j] {
                            seen[j] = true;
                            stack.push(j);
                        }
                    }
                }
            }
        }
        voxels.sort_unstable();
        let mut sum = [0.0f64; 3];
        for &i in &voxels {
            let c = g.coords(i);
            for a in 0..3 {
                sum[a] += c[a] as f64;
            }
        }
        let n = voxels.len() as f64;
        out.push(Component {
            centroid: sum.map(|s| s / n),
            voxels,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::Geometry;

    #[test]
    fn diagonal_neighbours_join() {
        let mut m = Mask3::zeros(Geometry::with_dims([4, 4, 4]));
        m.set(0, 0, 0, 1);
        m.set(1, 1, 1, 1);
        m.set(3, 3, 3, 1);
        let comps = label_components(&m);
        assert_eq!(comps.len(), 2);
        assert_eq!(comps[0].voxels.len(), 2);
        assert_eq!(comps[0].centroid, [0.5, 0.5, 0.5]);
        assert_eq!(comps[1].centroid, [3.0, 3.0, 3.0]);
    }

    #[test]
    fn empty_mask_has_no_components() {
        assert!(label_components(&Mask3::zeros(Geometry::with_dims([3, 3, 3]))).is_empty());
    }
}
