//! Test-only oracles and corpora shared by the integration suites.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use voxwheat::archgen::{ModelSpec, Optimizer, Task};
use voxwheat::{ChannelMode, PointCloud};

/// Plain per-point implementation of the conversion: scalar extrema,
/// slope/intercept per axis, ceiling, saturation into the axis range and a
/// sequential scatter in which later points overwrite earlier ones.
pub fn reference_voxelize(cloud: &PointCloud, resolution: f64, mode: ChannelMode) -> ([usize; 3], Vec<u8>) {
    let pts = cloud.points();
    let mut lo = pts[0];
    let mut hi = pts[0];
    for p in pts {
        for a in 0..3 {
            if p[a] < lo[a] {
                lo[a] = p[a];
            }
            if p[a] > hi[a] {
                hi[a] = p[a];
            }
        }
    }
    let mut slope = [0.0; 3];
    let mut intercept = [0.0; 3];
    let mut top = [0usize; 3];
    for a in 0..3 {
        let range = hi[a] - lo[a];
        if range > 0.0 {
            let t = (resolution * range).ceil();
            slope[a] = t / range;
            intercept[a] = -(slope[a] * lo[a]);
            top[a] = t as usize;
        }
    }
    let dims = [top[0] + 1, top[1] + 1, top[2] + 1];
    let keep: &[usize] = match mode {
        ChannelMode::Rgb => &[0, 1, 2],
        ChannelMode::Nir => &[3],
        ChannelMode::Rgbn => &[0, 1, 2, 3],
    };
    let mut data = vec![0u8; dims[0] * dims[1] * dims[2] * keep.len()];
    for (p, c) in pts.iter().zip(cloud.colors()) {
        let mut idx = [0usize; 3];
        for a in 0..3 {
            let v = (slope[a] * p[a] + intercept[a]).ceil();
            idx[a] = if v <= 0.0 { 0 } else if v >= top[a] as f64 { top[a] } else { v as usize };
        }
        let voxel = (idx[2] * dims[1] + idx[1]) * dims[0] + idx[0];
        for (k, &src) in keep.iter().enumerate() {
            data[voxel * keep.len() + k] = c[src];
        }
    }
    (dims, data)
}

/// Random cloud with per-axis ranges log-uniform in [1e-3, 1e3] mm,
/// re-drawn until the grid at `resolution` holds at most `max_voxels`.
pub fn random_cloud(rng: &mut ChaCha8Rng, n: usize, resolution: f64, max_voxels: usize) -> PointCloud {
    let ranges = loop {
        let r: [f64; 3] = std::array::from_fn(|_| 10f64.powf(rng.gen_range(-3.0..=3.0)));
        let voxels: f64 = r.iter().map(|x| (resolution * x).ceil() + 1.0).product();
        if voxels <= max_voxels as f64 {
            break r;
        }
    };
    let origin: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-1000.0..1000.0));
    let points = (0..n)
        .map(|i| {
            std::array::from_fn(|a| match i {
                0 => origin[a],
                1 => origin[a] + ranges[a],
                _ => origin[a] + rng.gen_range(0.0..=ranges[a]),
            })
        })
        .collect();
    let colors = (0..n).map(|_| rng.gen()).collect();
    PointCloud::new(points, colors, "random").unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Layer-by-layer shape walk over an explicit layer list. Returns `None`
/// when a convolution would see an empty volume.
pub fn shape_walk_params(spec: &ModelSpec) -> Option<u64> {
    enum Layer {
        Conv(i64),
        Pool,
        Flatten,
        Dense(i64),
    }
    let mut layers = Vec::new();
    for (i, &c) in spec.conv_neurons.iter().enumerate() {
        layers.push(Layer::Conv(c as i64));
        if i + 1 < spec.conv_neurons.len() {
            layers.push(Layer::Pool);
        }
    }
    layers.push(Layer::Flatten);
    for &n in &spec.dense_neurons {
        layers.push(Layer::Dense(n as i64));
    }
    layers.push(Layer::Dense(1));

    // shape as (depth, height, width, channels); `None` spatial once flattened
    let [w, h, d, c] = spec.input_dims.map(|v| v as i64);
    let mut spatial = Some([d, h, w]);
    let mut features = c;
    let mut params: i64 = 0;
    for layer in layers {
        match layer {
            Layer::Conv(out) => {
                let s = spatial?;
                if s.iter().any(|&v| v <= 0) {
                    return None;
                }
                // 3x3x3 weights per input/output channel pair plus a bias
                params += 3 * 3 * 3 * features * out + out;
                features = out;
            }
            Layer::Pool => {
                // valid 2-wide window, stride 2
                let s = spatial?;
                spatial = Some(s.map(|v| if v < 2 { 0 } else { (v - 2) / 2 + 1 }));
            }
            Layer::Flatten => {
                let s = spatial.take()?;
                features *= s.iter().product::<i64>();
            }
            Layer::Dense(out) => {
                params += features * out + out;
                features = out;
            }
        }
    }
    Some(params as u64)
}

/// One architecture kept by an earlier monitored grid search.
#[derive(Debug, Clone)]
pub struct ReferenceRow {
    pub batch: u8,
    pub model: u8,
    pub conv: &'static [u32],
    pub dense: &'static [u32],
    pub optimizer: Option<Optimizer>,
}

const fn row(batch: u8, model: u8, conv: &'static [u32], dense: &'static [u32]) -> ReferenceRow {
    ReferenceRow { batch, model, conv, dense, optimizer: None }
}

/// Batch 1: detection; batch 2: spikelet count; batch 3: infected
/// spikelets; batch 4: severity.
pub fn reference_rows() -> Vec<ReferenceRow> {
    let mut rows = vec![
        row(1, 1, &[16, 8, 8], &[128, 64, 8, 8]),
        row(1, 2, &[64, 64, 64, 32, 8], &[128, 32, 8]),
        row(1, 3, &[32, 32, 8, 8], &[128, 64, 32]),
        row(1, 4, &[64, 64, 16], &[128, 128, 32]),
        row(1, 5, &[32, 16, 16, 8], &[32, 16]),
        row(1, 6, &[64, 64, 64, 16], &[16]),
        row(1, 7, &[64, 16, 16, 16], &[32, 64, 16]),
        row(1, 8, &[32, 32, 32, 32, 16], &[128, 64, 32, 16]),
        row(1, 9, &[32, 32, 32, 16, 16], &[64, 32, 16, 8]),
        row(1, 10, &[32, 32, 32, 8, 8], &[64, 32, 16]),
        row(1, 11, &[32, 32, 32, 32, 16], &[128, 64]),
        row(1, 12, &[16, 8, 8, 32, 64], &[32]),
        row(1, 13, &[64, 64, 8, 8, 8], &[32, 16]),
        row(1, 14, &[64, 32, 8], &[128, 32, 16, 8]),
        row(1, 15, &[64, 64, 32], &[128, 16, 8]),
        row(1, 16, &[64, 16, 8, 8], &[16, 8]),
        row(1, 17, &[32, 32, 32, 16], &[128]),
        row(1, 18, &[32, 32], &[8, 8, 8]),
        row(1, 19, &[32, 32, 16, 16, 8], &[32]),
        row(1, 20, &[64, 32, 32], &[128]),
        row(2, 1, &[32, 16], &[128, 64, 8]),
        row(2, 2, &[32, 32, 8], &[128, 16]),
        row(2, 3, &[32, 16, 16, 16], &[64, 8]),
        row(2, 4, &[32, 16, 8, 8, 8], &[32, 32, 16]),
        row(2, 5, &[32, 32, 32, 32], &[128]),
        row(3, 1, &[32, 32, 32, 16], &[32, 8]),
        row(3, 2, &[32, 32, 32, 16], &[32, 8]),
        row(3, 3, &[64, 32, 32, 32], &[32]),
        row(4, 1, &[32, 32, 32, 16], &[64, 32, 8]),
        row(4, 2, &[32, 32, 32, 32], &[64, 32, 8]),
        row(4, 3, &[32, 32, 32, 32], &[32]),
    ];
    rows[25].optimizer = Some(Optimizer::Adam);
    rows[26].optimizer = Some(Optimizer::RmsProp);
    rows[27].optimizer = Some(Optimizer::Adam);
    rows
}

impl ReferenceRow {
    pub fn spec(&self) -> ModelSpec {
        let (task, input) = match self.batch {
            1 => (Task::Detection, [75, 300, 95, 3]),
            2 => (Task::Regression, [161, 51, 93, 3]),
            _ => (Task::Regression, [227, 70, 111, 3]),
        };
        let mut spec = ModelSpec::new(task, self.conv, self.dense, input);
        if let Some(o) = self.optimizer {
            spec.optimizer = o;
        }
        spec
    }

    pub fn name(&self) -> String {
        format!("{} model {}", ["detection", "count", "infected", "severity"][self.batch as usize - 1], self.model)
    }
}
