//! Aspect-preserving nearest-neighbour resizing into fixed training
//! envelopes, followed by zero padding.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::ResampleError;
use crate::voxelize::{Axis, VoxelGrid};

/// Target tensor dimensions (width, height, depth) in voxels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Envelope {
    pub dims: [usize; 3],
}

impl Envelope {
    /// RGB spike images for disease detection.
    pub const SPIKE_RGB: Envelope = Envelope { dims: [75, 300, 95] };
    /// Wheat head images for spikelet counting.
    pub const HEAD: Envelope = Envelope { dims: [161, 51, 93] };
    /// Dataset II heads, infected spikelets and severity.
    pub const DATASET2: Envelope = Envelope { dims: [227, 70, 111] };

    pub const PRESETS: [(&'static str, Envelope); 3] =
        [("spike-rgb", Self::SPIKE_RGB), ("head", Self::HEAD), ("dataset2", Self::DATASET2)];

    pub fn new(dims: [usize; 3]) -> Result<Self, ResampleError> {
        if dims.iter().any(|&d| d == 0) {
            return Err(ResampleError::InvalidEnvelope(format!("{dims:?}")));
        }
        Ok(Self { dims })
    }
}

impl fmt::Display for Envelope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.dims[0], self.dims[1], self.dims[2])
    }
}

impl FromStr for Envelope {
    type Err = ResampleError;

    /// A preset name or explicit `WxHxD`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some((_, env)) = Self::PRESETS.iter().find(|(name, _)| *name == s) {
            return Ok(*env);
        }
        let parts: Vec<_> = s.split(['x', 'X', '×']).collect();
        let dims: Option<Vec<usize>> = parts.iter().map(|p| p.trim().parse().ok()).collect();
        match dims.as_deref() {
            Some(&[w, h, d]) => Envelope::new([w, h, d]),
            _ => Err(ResampleError::InvalidEnvelope(s.to_string())),
        }
    }
}

/// How a grid was fitted: the shared scale factor and the resized content
/// dimensions before padding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fit {
    pub scale: f64,
    pub content_dims: [usize; 3],
}

/// Scale and content size for fitting `dims` into `env`.
pub fn plan_fit(dims: [usize; 3], env: &Envelope) -> Fit {
    let scale = (0..3)
        .map(|a| env.dims[a] as f64 / dims[a] as f64)
        .fold(f64::INFINITY, f64::min);
    let content_dims = std::array::from_fn(|a| {
        // round half up, at least one voxel, never beyond the envelope
        let scaled = (dims[a] as f64 * scale + 0.5).floor() as usize;
        scaled.clamp(1, env.dims[a])
    });
    Fit { scale, content_dims }
}

/// Nearest-neighbour source index for output sample `i` when mapping
/// `src` samples onto `dst` samples (centre alignment).
#[inline]
fn nearest(i: usize, src: usize, dst: usize) -> usize {
    (((2 * i + 1) * src) / (2 * dst)).min(src - 1)
}

/// Nearest-neighbour resize to exactly `dims`.
pub fn resize_nearest(grid: &VoxelGrid, dims: [usize; 3]) -> VoxelGrid {
    if dims == grid.dims() {
        return grid.clone();
    }
    let [w, h, _] = dims;
    let src = grid.dims();
    let channels = grid.channels();
    let map_x: Vec<usize> = (0..dims[0]).map(|i| nearest(i, src[0], dims[0])).collect();
    let mut out = VoxelGrid::zeros(dims, grid.mode());
    let slice_len = w * h * channels;
    let data = out.data_mut();
    data.par_chunks_mut(slice_len).enumerate().for_each(|(z, slice)| {
        let sz = nearest(z, src[2], dims[2]);
        for y in 0..h {
            let sy = nearest(y, src[1], dims[1]);
            let row = &mut slice[y * w * channels..(y + 1) * w * channels];
            for (x, &sx) in map_x.iter().enumerate() {
                row[x * channels..(x + 1) * channels].copy_from_slice(grid.voxel(sx, sy, sz));
            }
        }
    });
    out
}

/// Places `grid` at the low corner of a zeroed envelope.
pub fn pad_to(grid: &VoxelGrid, env: &Envelope) -> Result<VoxelGrid, ResampleError> {
    let src = grid.dims();
    for axis in Axis::ALL {
        let a = axis.index();
        if src[a] > env.dims[a] {
            return Err(ResampleError::Pad { axis, size: src[a], limit: env.dims[a] });
        }
    }
    if src == env.dims {
        return Ok(grid.clone());
    }
    let channels = grid.channels();
    let mut out = VoxelGrid::zeros(env.dims, grid.mode());
    let row_len = src[0] * channels;
    let [w, h, _] = env.dims;
    let data = out.data_mut();
    for z in 0..src[2] {
        for y in 0..src[1] {
            let from = grid.linear_index(0, y, z) * channels;
            let to = ((z * h + y) * w) * channels;
            data[to..to + row_len].copy_from_slice(&grid.data()[from..from + row_len]);
        }
    }
    Ok(out)
}

/// Resizes `grid` to the largest size that keeps its proportions and fits in
/// `env`, then pads to the envelope.
pub fn fit_to_envelope(grid: &VoxelGrid, env: &Envelope) -> VoxelGrid {
    fit_to_envelope_with_plan(grid, env).0
}

pub fn fit_to_envelope_with_plan(grid: &VoxelGrid, env: &Envelope) -> (VoxelGrid, Fit) {
    let fit = plan_fit(grid.dims(), env);
    let resized = resize_nearest(grid, fit.content_dims);
    let padded = pad_to(&resized, env).expect("content dims are clamped to the envelope");
    (padded, fit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::voxelize::ChannelMode;
    use proptest::prelude::*;
    use std::collections::HashSet;

    fn patterned(dims: [usize; 3], mode: ChannelMode) -> VoxelGrid {
        let len = dims.iter().product::<usize>() * mode.channels();
        let data = (0..len).map(|i| if i % 7 == 0 { (i % 251) as u8 + 1 } else { 0 }).collect();
        VoxelGrid::from_data(dims, mode, data).unwrap()
    }

    #[test]
    fn spike_envelope_scale() {
        let fit = plan_fit([100, 400, 100], &Envelope::SPIKE_RGB);
        assert_eq!(fit.scale, 0.75);
        assert_eq!(fit.content_dims, [75, 300, 75]);
        let out = fit_to_envelope(&patterned([100, 400, 100], ChannelMode::Rgb), &Envelope::SPIKE_RGB);
        assert_eq!(out.dims(), [75, 300, 95]);
        // padded depth planes are empty
        for z in 75..95 {
            for y in (0..300).step_by(37) {
                assert_eq!(out.voxel(10, y, z), &[0, 0, 0]);
            }
        }
    }

    #[test]
    fn envelope_sized_grid_is_unchanged() {
        for env in [Envelope::SPIKE_RGB, Envelope::HEAD] {
            let g = patterned(env.dims, ChannelMode::Nir);
            assert_eq!(fit_to_envelope(&g, &env), g);
        }
    }

    #[test]
    fn pad_keeps_content_at_corner() {
        let g = patterned([2, 3, 5], ChannelMode::Rgb);
        let env = Envelope::new([4, 4, 6]).unwrap();
        let out = pad_to(&g, &env).unwrap();
        assert_eq!(out.dims(), [4, 4, 6]);
        for z in 0..6 {
            for y in 0..4 {
                for x in 0..4 {
                    if x < 2 && y < 3 && z < 5 {
                        assert_eq!(out.voxel(x, y, z), g.voxel(x, y, z));
                    } else {
                        assert_eq!(out.voxel(x, y, z), &[0, 0, 0]);
                    }
                }
            }
        }
        assert_eq!(pad_to(&g, &Envelope::new([2, 3, 5]).unwrap()).unwrap(), g);
    }

    #[test]
    fn pad_rejects_oversized() {
        let g = patterned([5, 1, 1], ChannelMode::Nir);
        match pad_to(&g, &Envelope::new([4, 1, 1]).unwrap()) {
            Err(ResampleError::Pad { axis: Axis::X, size: 5, limit: 4 }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn upscaling_small_grids() {
        let g = patterned([2, 3, 1], ChannelMode::Nir);
        let env = Envelope::new([10, 10, 10]).unwrap();
        let (out, fit) = fit_to_envelope_with_plan(&g, &env);
        assert!((fit.scale - 10.0 / 3.0).abs() < 1e-12);
        assert_eq!(fit.content_dims, [7, 10, 3]);
        assert_eq!(out.dims(), [10, 10, 10]);
    }

    #[test]
    fn envelope_parsing() {
        assert_eq!("head".parse::<Envelope>().unwrap(), Envelope::HEAD);
        assert_eq!("dataset2".parse::<Envelope>().unwrap(), Envelope::DATASET2);
        assert_eq!("8x9x10".parse::<Envelope>().unwrap().dims, [8, 9, 10]);
        assert!("8x9".parse::<Envelope>().is_err());
        assert!("0x9x9".parse::<Envelope>().is_err());
        assert_eq!(Envelope::SPIKE_RGB.to_string(), "75x300x95");
    }

    proptest! {
        #[test]
        fn fit_invariants(w in 1usize..60, h in 1usize..60, d in 1usize..60,
                          ew in 1usize..40, eh in 1usize..40, ed in 1usize..40) {
            let g = patterned([w, h, d], ChannelMode::Rgb);
            let env = Envelope::new([ew, eh, ed]).unwrap();
            let (out, fit) = fit_to_envelope_with_plan(&g, &env);
            prop_assert_eq!(out.dims(), env.dims);
            for a in 0..3 {
                let ideal = [w, h, d][a] as f64 * fit.scale;
                let got = fit.content_dims[a] as f64;
                prop_assert!(got == 1.0 || (got - ideal).abs() <= 0.5 + 1e-9);
            }
            let before: HashSet<&[u8]> = g.data().chunks(3).filter(|v| v.iter().any(|&b| b != 0)).collect();
            let after: HashSet<&[u8]> = out.data().chunks(3).filter(|v| v.iter().any(|&b| b != 0)).collect();
            prop_assert!(after.is_subset(&before));
            prop_assert_eq!(fit_to_envelope(&out, &env), out);
        }
    }
}
