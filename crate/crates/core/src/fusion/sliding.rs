//! Sequential z-window application of a patch generator.

use super::{FusionParams, PatchGenerator};
use crate::error::{Error, Result};
use crate::volume::{Geometry, Grid, Mask3, NormVolume};

/// Start slice of every window over `nz` slices. Windows advance by
/// `depth - overlap`; the last one is aligned to the volume end. A volume
/// shallower than `depth` gets the single start 0.
pub fn window_starts(nz: usize, depth: usize, overlap: usize) -> Vec<usize> {
    assert!(depth > 0 && overlap < depth, "invalid window shape");
    if nz <= depth {
        return vec![0];
    }
    let mut starts = vec![0];
    let mut end = depth;
    while end < nz {
        let s = (end - overlap).min(nz - depth);
        starts.push(s);
        end = s + depth;
    }
    starts
}

/// Runs `gen` over consecutive z-windows of `params.patch_dims[2]` slices.
///
/// Every window after the first has its leading slices (the part already
/// covered by earlier windows) replaced by the committed output before the
/// call, and commits only the slices beyond that. A volume with fewer slices
/// than the window is padded by repeating its last slice, processed once and
/// cropped back.
pub fn sliding_window_apply(
    volume: &NormVolume,
    mask: &Mask3,
    gen: &dyn PatchGenerator,
    params: &FusionParams,
) -> Result<NormVolume> {
    params.validate()?;
    volume.geometry().ensure_matches(mask.geometry(), "sliding_window_apply")?;
    let [nx, ny, nz] = volume.dims();
    let [px, py, depth] = params.patch_dims;
    if [nx, ny] != [px, py] {
        return Err(Error::Precondition(format!(
            "in-plane dims {nx}x{ny} differ from the patch dims {px}x{py}"
        )));
    }
    if nz < depth {
        let padded = volume.with_grid(pad_z(volume.grid(), depth))?;
        let out = run(gen, &padded, &pad_z(mask, depth))?;
        return volume.with_data(out.data()[..nx * ny * nz].to_vec());
    }

    let plane = nx * ny;
    let mut out = volume.data().to_vec();
    let mut committed = 0;
    for s in window_starts(nz, depth, params.overlap_slices) {
        let mut input = volume.slab(s, depth).data().to_vec();
        let shared = committed - s.min(committed);
        input[..shared * plane].copy_from_slice(&out[s * plane..(s + shared) * plane]);
        let patch = volume.slab(s, depth).with_data(input)?;
        let result = run(gen, &patch, &mask.slab(s, depth))?;
        out[(s + shared) * plane..(s + depth) * plane].copy_from_slice(&result.data()[shared * plane..]);
        committed = s + depth;
    }
    volume.with_data(out)
}

fn run(gen: &dyn PatchGenerator, patch: &NormVolume, mask: &Mask3) -> Result<NormVolume> {
    let out = gen.generate(patch, mask)?;
    if out.dims() != patch.dims() {
        return Err(Error::Generator(format!(
            "generator returned dims {:?} for a {:?} patch",
            out.dims(),
            patch.dims()
        )));
    }
    // Re-wrap so the output carries the patch's window, range and clipping.
    patch.with_data(out.into_grid().into_vec())
}

fn pad_z<T: crate::volume::Voxel>(grid: &Grid<T>, depth: usize) -> Grid<T> {
    let g = *grid.geometry();
    let plane = g.dims[0] * g.dims[1];
    let mut data = grid.data().to_vec();
    let last = data[data.len() - plane..].to_vec();
    while data.len() < plane * depth {
        data.extend_from_slice(&last);
    }
    let padded = Geometry {
        dims: [g.dims[0], g.dims[1], depth],
        ..g
    };
    Grid::from_vec(padded, data).expect("padded length")
}
