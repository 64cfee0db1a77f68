//! Structure-of-arrays batch layout.
//!
//! A batch of clouds is stored as seven flat arrays. The coordinate arrays
//! hold every x of every cloud in batch order, then the same for y and z;
//! each channel array groups one channel cloud by cloud. Per-cloud work
//! therefore touches one contiguous range of each array.

use std::ops::Range;

use rayon::prelude::*;

use crate::error::VoxelError;
use crate::ply::PointCloud;

/// Points per task in the parallel reductions and copies.
pub(crate) const CHUNK: usize = 1 << 14;

#[derive(Debug, Clone, PartialEq)]
pub struct SoABatch {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub zs: Vec<f64>,
    pub r: Vec<u8>,
    pub g: Vec<u8>,
    pub b: Vec<u8>,
    pub nir: Vec<u8>,
    /// (start, count) of each cloud within every array.
    pub offsets: Vec<(usize, usize)>,
    source_ids: Vec<String>,
}

/// Per-axis extrema of one cloud, in millimetres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extents {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Extents {
    pub fn range(&self, axis: usize) -> f64 {
        self.max[axis] - self.min[axis]
    }

    /// Sequential scan over a point list.
    pub fn of_points(points: &[[f64; 3]]) -> Option<Self> {
        let first = points.first()?;
        let mut e = Extents { min: *first, max: *first };
        for p in points {
            for a in 0..3 {
                e.min[a] = e.min[a].min(p[a]);
                e.max[a] = e.max[a].max(p[a]);
            }
        }
        Some(e)
    }
}

impl SoABatch {
    /// Number of clouds.
    pub fn n(&self) -> usize {
        self.offsets.len()
    }

    pub fn total_points(&self) -> usize {
        self.xs.len()
    }

    pub fn range(&self, cloud: usize) -> Range<usize> {
        let (start, count) = self.offsets[cloud];
        start..start + count
    }

    /// Rebuilds cloud `i` from the arrays.
    pub fn cloud(&self, i: usize) -> PointCloud {
        let range = self.range(i);
        let points = range.clone().map(|k| [self.xs[k], self.ys[k], self.zs[k]]).collect();
        let colors = range.map(|k| [self.r[k], self.g[k], self.b[k], self.nir[k]]).collect();
        PointCloud::new(points, colors, self.source_ids[i].clone())
            .expect("batch arrays hold a valid cloud")
    }

    /// Inverse of [`build_soa_batch`].
    pub fn deinterleave(&self) -> Vec<PointCloud> {
        (0..self.n()).map(|i| self.cloud(i)).collect()
    }
}

/// Splits `data` into consecutive mutable pieces of the given lengths.
fn split_by_counts<'a, T>(mut data: &'a mut [T], counts: &[usize]) -> Vec<&'a mut [T]> {
    let mut parts = Vec::with_capacity(counts.len());
    for &c in counts {
        let (head, tail) = data.split_at_mut(c);
        parts.push(head);
        data = tail;
    }
    parts
}

/// Lays out `clouds` in the coalesced structure-of-arrays form. Clouds are
/// copied in parallel into disjoint destination ranges.
pub fn build_soa_batch(clouds: &[PointCloud]) -> Result<SoABatch, VoxelError> {
    if clouds.is_empty() {
        return Err(VoxelError::EmptyBatch);
    }
    let counts: Vec<usize> = clouds.iter().map(PointCloud::len).collect();
    let mut offsets = Vec::with_capacity(clouds.len());
    let mut total = 0;
    for &c in &counts {
        offsets.push((total, c));
        total += c;
    }

    let mut xs = vec![0.0; total];
    let mut ys = vec![0.0; total];
    let mut zs = vec![0.0; total];
    let mut r = vec![0u8; total];
    let mut g = vec![0u8; total];
    let mut b = vec![0u8; total];
    let mut nir = vec![0u8; total];

    let coord_parts = split_by_counts(&mut xs, &counts)
        .into_iter()
        .zip(split_by_counts(&mut ys, &counts))
        .zip(split_by_counts(&mut zs, &counts));
    let colour_parts = split_by_counts(&mut r, &counts)
        .into_iter()
        .zip(split_by_counts(&mut g, &counts))
        .zip(split_by_counts(&mut b, &counts))
        .zip(split_by_counts(&mut nir, &counts));

    let jobs: Vec<_> = clouds.iter().zip(coord_parts.zip(colour_parts)).collect();
    jobs.into_par_iter().for_each(|(cloud, (((x, y), z), (((r, g), b), nir)))| {
        for (k, p) in cloud.points().iter().enumerate() {
            x[k] = p[0];
            y[k] = p[1];
            z[k] = p[2];
        }
        for (k, c) in cloud.colors().iter().enumerate() {
            r[k] = c[0];
            g[k] = c[1];
            b[k] = c[2];
            nir[k] = c[3];
        }
    });

    Ok(SoABatch {
        xs,
        ys,
        zs,
        r,
        g,
        b,
        nir,
        offsets,
        source_ids: clouds.iter().map(|c| c.source_id().to_string()).collect(),
    })
}

fn minmax_slice(values: &[f64]) -> (f64, f64) {
    values
        .par_chunks(CHUNK)
        .map(|chunk| {
            chunk
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
        })
        .reduce(
            || (f64::INFINITY, f64::NEG_INFINITY),
            |(a_lo, a_hi), (b_lo, b_hi)| (a_lo.min(b_lo), a_hi.max(b_hi)),
        )
}

/// Per-cloud extrema, each computed over the cloud's own offset range only.
/// Coordinates are finite and free of negative zero, so the result does not
/// depend on how the work is partitioned.
pub fn minmax_reduce(batch: &SoABatch) -> Vec<Extents> {
    (0..batch.n())
        .into_par_iter()
        .map(|i| {
            let range = batch.range(i);
            let axes = [&batch.xs[range.clone()], &batch.ys[range.clone()], &batch.zs[range]];
            let mut e = Extents { min: [0.0; 3], max: [0.0; 3] };
            for (a, values) in axes.iter().enumerate() {
                let (lo, hi) = minmax_slice(values);
                e.min[a] = lo;
                e.max[a] = hi;
            }
            e
        })
        .collect()
}
