//! Point cloud to minimum-bounding-box voxel image conversion.
//!
//! Every point is mapped by a per-axis linear function followed by a
//! ceiling:
//!
//! ```text
//! index = ceil(slope * coordinate + intercept)
//! slope = ceil(R * range) / range,   intercept = -slope * min
//! ```
//!
//! so the axis minimum lands on index 0 and the maximum on `ceil(R * range)`.
//! A grid therefore needs `ceil(R * range) + 1` voxels along each axis.
//! When several points fall into one voxel the point with the highest index
//! in its cloud wins, which makes the result independent of scheduling.

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicU32, Ordering};

use rayon::prelude::*;

use crate::batch::{build_soa_batch, minmax_reduce, Extents, SoABatch, CHUNK};
use crate::error::VoxelError;
use crate::ply::PointCloud;

/// Largest grid (in bytes of voxel data) we are willing to allocate.
pub const MAX_GRID_BYTES: usize = 1 << 34;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Which colour channels end up in the image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChannelMode {
    Rgb,
    Nir,
    Rgbn,
}

impl ChannelMode {
    pub fn channels(self) -> usize {
        match self {
            ChannelMode::Rgb => 3,
            ChannelMode::Nir => 1,
            ChannelMode::Rgbn => 4,
        }
    }

    pub fn from_channels(channels: usize) -> Option<Self> {
        match channels {
            1 => Some(ChannelMode::Nir),
            3 => Some(ChannelMode::Rgb),
            4 => Some(ChannelMode::Rgbn),
            _ => None,
        }
    }

    /// Positions within an (R, G, B, NIR) tuple that this mode keeps.
    fn source_channels(self) -> &'static [usize] {
        match self {
            ChannelMode::Rgb => &[0, 1, 2],
            ChannelMode::Nir => &[3],
            ChannelMode::Rgbn => &[0, 1, 2, 3],
        }
    }
}

impl fmt::Display for ChannelMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ChannelMode::Rgb => "rgb",
            ChannelMode::Nir => "nir",
            ChannelMode::Rgbn => "rgbn",
        })
    }
}

impl FromStr for ChannelMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "rgb" => Ok(ChannelMode::Rgb),
            "nir" => Ok(ChannelMode::Nir),
            "rgbn" | "rgb+nir" | "rgbnir" => Ok(ChannelMode::Rgbn),
            other => Err(format!("unknown channel mode '{other}' (expected rgb, nir or rgbn)")),
        }
    }
}

/// Slopes and intercepts of the coordinate-to-index mapping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterpParams {
    /// Voxels per millimetre, per axis. Zero on degenerate axes.
    pub slope: [f64; 3],
    pub intercept: [f64; 3],
    pub resolution: f64,
    /// Largest index reachable on each axis, `ceil(R * range)`.
    pub max_index: [usize; 3],
}

impl InterpParams {
    pub fn dims(&self) -> [usize; 3] {
        self.max_index.map(|m| m + 1)
    }

    /// Voxel coordinate of a point along `axis`.
    #[inline]
    pub fn index(&self, axis: usize, value: f64) -> usize {
        let t = (self.slope[axis] * value + self.intercept[axis]).ceil();
        // For points inside the extents the exact mapping stays within
        // [0, max_index]; rounding in the product can push the maximum a few
        // ulps above its integer, so saturate.
        let top = self.max_index[axis];
        if t <= 0.0 {
            0
        } else if t >= top as f64 {
            top
        } else {
            t as usize
        }
    }
}

fn check_resolution(resolution: f64) -> Result<(), VoxelError> {
    if resolution.is_finite() && resolution > 0.0 {
        Ok(())
    } else {
        Err(VoxelError::InvalidResolution(resolution))
    }
}

fn scaled_extent(resolution: f64, range: f64) -> f64 {
    (resolution * range).ceil()
}

pub fn compute_interp_params(extents: &Extents, resolution: f64) -> Result<InterpParams, VoxelError> {
    check_resolution(resolution)?;
    let mut params = InterpParams {
        slope: [0.0; 3],
        intercept: [0.0; 3],
        resolution,
        max_index: [0; 3],
    };
    for a in 0..3 {
        let range = extents.range(a);
        if range > 0.0 {
            let top = scaled_extent(resolution, range);
            let slope = top / range;
            params.slope[a] = slope;
            params.intercept[a] = -(slope * extents.min[a]);
            params.max_index[a] = top as usize;
        }
    }
    Ok(params)
}

/// Voxel dimensions `(width, height, depth)`: `ceil(R * range) + 1` per axis,
/// 1 on degenerate axes.
pub fn compute_dims(extents: &Extents, resolution: f64) -> Result<[usize; 3], VoxelError> {
    check_resolution(resolution)?;
    Ok(std::array::from_fn(|a| {
        let range = extents.range(a);
        if range > 0.0 {
            scaled_extent(resolution, range) as usize + 1
        } else {
            1
        }
    }))
}

/// Dense multispectral 3D image. Voxel `(x, y, z)` channel `c` lives at
/// `((z * height + y) * width + x) * channels + c`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VoxelGrid {
    dims: [usize; 3],
    mode: ChannelMode,
    data: Vec<u8>,
}

impl VoxelGrid {
    pub fn zeros(dims: [usize; 3], mode: ChannelMode) -> Self {
        let len = dims.iter().product::<usize>() * mode.channels();
        Self { dims, mode, data: vec![0; len] }
    }

    pub fn from_data(dims: [usize; 3], mode: ChannelMode, data: Vec<u8>) -> Option<Self> {
        let expected = dims
            .iter()
            .try_fold(mode.channels(), |acc, &d| acc.checked_mul(d))?;
        (dims.iter().all(|&d| d > 0) && data.len() == expected).then_some(Self { dims, mode, data })
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn width(&self) -> usize {
        self.dims[0]
    }

    pub fn height(&self) -> usize {
        self.dims[1]
    }

    pub fn depth(&self) -> usize {
        self.dims[2]
    }

    pub fn mode(&self) -> ChannelMode {
        self.mode
    }

    pub fn channels(&self) -> usize {
        self.mode.channels()
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    pub fn voxel_count(&self) -> usize {
        self.dims.iter().product()
    }

    #[inline]
    pub fn linear_index(&self, x: usize, y: usize, z: usize) -> usize {
        (z * self.dims[1] + y) * self.dims[0] + x
    }

    pub fn voxel(&self, x: usize, y: usize, z: usize) -> &[u8] {
        let c = self.channels();
        let i = self.linear_index(x, y, z) * c;
        &self.data[i..i + c]
    }

    pub fn voxel_mut(&mut self, x: usize, y: usize, z: usize) -> &mut [u8] {
        let c = self.channels();
        let i = self.linear_index(x, y, z) * c;
        &mut self.data[i..i + c]
    }

    /// Voxels with at least one non-zero channel.
    pub fn occupied_count(&self) -> usize {
        self.data
            .par_chunks(self.channels() * CHUNK)
            .map(|chunk| chunk.chunks_exact(self.channels()).filter(|v| v.iter().any(|&b| b != 0)).count())
            .sum()
    }
}

/// Borrowed view of one cloud's columns inside a [`SoABatch`].
struct CloudColumns<'a> {
    coords: [&'a [f64]; 3],
    colors: [&'a [u8]; 4],
}

impl<'a> CloudColumns<'a> {
    fn from_batch(batch: &'a SoABatch, cloud: usize) -> Self {
        let r = batch.range(cloud);
        Self {
            coords: [&batch.xs[r.clone()], &batch.ys[r.clone()], &batch.zs[r.clone()]],
            colors: [&batch.r[r.clone()], &batch.g[r.clone()], &batch.b[r.clone()], &batch.nir[r]],
        }
    }

    fn len(&self) -> usize {
        self.coords[0].len()
    }
}

fn allocation_check(dims: [usize; 3], mode: ChannelMode) -> Result<(), VoxelError> {
    let bytes = dims.iter().try_fold(mode.channels(), |acc, &d| acc.checked_mul(d));
    match bytes {
        Some(b) if b <= MAX_GRID_BYTES => Ok(()),
        _ => Err(VoxelError::GridTooLarge(dims)),
    }
}

/// Clouds below this size are scattered on the calling thread.
const PARALLEL_SCATTER_MIN: usize = 1 << 15;

fn scatter(columns: &CloudColumns<'_>, params: &InterpParams, mode: ChannelMode) -> VoxelGrid {
    let dims = params.dims();
    let mut grid = VoxelGrid::zeros(dims, mode);
    let n = columns.len();
    let linear = |i: usize| {
        let x = params.index(0, columns.coords[0][i]);
        let y = params.index(1, columns.coords[1][i]);
        let z = params.index(2, columns.coords[2][i]);
        (z * dims[1] + y) * dims[0] + x
    };
    let sources = mode.source_channels();
    let channels = sources.len();

    if n < PARALLEL_SCATTER_MIN || rayon::current_num_threads() == 1 || n >= u32::MAX as usize {
        // In point order, so later points overwrite earlier ones.
        for i in 0..n {
            let v = linear(i) * channels;
            for (k, &src) in sources.iter().enumerate() {
                grid.data[v + k] = columns.colors[src][i];
            }
        }
        return grid;
    }

    // winner[v] = 1 + highest point index landing in voxel v, 0 when empty.
    let winners: Vec<AtomicU32> =
        std::iter::repeat_with(|| AtomicU32::new(0)).take(grid.voxel_count()).collect();
    (0..n).into_par_iter().with_min_len(CHUNK).for_each(|i| {
        winners[linear(i)].fetch_max(i as u32 + 1, Ordering::Relaxed);
    });
    grid.data
        .par_chunks_mut(channels * CHUNK)
        .zip(winners.par_chunks(CHUNK))
        .for_each(|(out, win)| {
            for (voxel, w) in out.chunks_exact_mut(channels).zip(win) {
                let w = w.load(Ordering::Relaxed);
                if w != 0 {
                    let i = (w - 1) as usize;
                    for (dst, &src) in voxel.iter_mut().zip(sources) {
                        *dst = columns.colors[src][i];
                    }
                }
            }
        });
    grid
}

/// Converts a single cloud with precomputed parameters.
pub fn voxelize_cloud(
    cloud: &PointCloud,
    params: &InterpParams,
    mode: ChannelMode,
) -> Result<VoxelGrid, VoxelError> {
    allocation_check(params.dims(), mode)?;
    let batch = build_soa_batch(std::slice::from_ref(cloud))?;
    Ok(scatter(&CloudColumns::from_batch(&batch, 0), params, mode))
}

/// Batch conversion on the current rayon pool: SoA layout, per-cloud
/// extrema, parameters, then scatter. Output order follows input order.
pub fn convert_batch(
    clouds: &[PointCloud],
    resolution: f64,
    mode: ChannelMode,
) -> Result<Vec<VoxelGrid>, VoxelError> {
    check_resolution(resolution)?;
    let batch = build_soa_batch(clouds)?;
    let extents = minmax_reduce(&batch);
    let params = extents
        .iter()
        .map(|e| {
            let p = compute_interp_params(e, resolution)?;
            allocation_check(p.dims(), mode)?;
            Ok(p)
        })
        .collect::<Result<Vec<_>, VoxelError>>()?;
    Ok(params
        .par_iter()
        .enumerate()
        .map(|(i, p)| scatter(&CloudColumns::from_batch(&batch, i), p, mode))
        .collect())
}

/// Runs `f` inside a dedicated pool of `threads` workers.
pub fn in_pool<T, F>(threads: usize, f: F) -> Result<T, VoxelError>
where
    T: Send,
    F: FnOnce() -> T + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| VoxelError::ThreadPool(e.to_string()))?;
    Ok(pool.install(f))
}

/// [`convert_batch`] on a pool of `threads` workers.
pub fn convert_batch_with_threads(
    clouds: &[PointCloud],
    resolution: f64,
    mode: ChannelMode,
    threads: usize,
) -> Result<Vec<VoxelGrid>, VoxelError> {
    in_pool(threads, || convert_batch(clouds, resolution, mode))?
}
