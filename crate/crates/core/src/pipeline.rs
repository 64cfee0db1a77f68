//! File-level jobs: batch conversion, manifest splitting, architecture
//! emission and throughput benchmarking. The command-line front end is a
//! thin wrapper around these.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use thiserror::Error;

use crate::archgen::{emit_spec, sample_batch, ModelSpec, Task};
use crate::dataset::{assign_folds, read_manifest, stratified_split, write_manifest, DatasetManifest};
use crate::error::{ArchError, DatasetError, VoxelError};
use crate::ply::{generate_synthetic_cloud, parse_ply_with, PlyOptions, PointCloud, SyntheticSpec};
use crate::resample::{fit_to_envelope, Envelope};
use crate::tensor_io::{encode, TensorFormat};
use crate::voxelize::{convert_batch, convert_batch_with_threads, in_pool, ChannelMode, VoxelGrid};

/// Exit status for a fully successful job.
pub const EXIT_OK: i32 = 0;
/// Some inputs failed, the others were written.
pub const EXIT_PARTIAL: i32 = 2;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_MISSING_LABELS: i32 = 65;
pub const EXIT_CORRUPT_TENSOR: i32 = 66;

/// Files parsed and converted together.
pub const FILES_PER_BATCH: usize = 16;

#[derive(Debug, Error)]
pub enum JobError {
    #[error("invalid job configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Voxel(#[from] VoxelError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Arch(#[from] ArchError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl JobError {
    pub fn exit_code(&self) -> i32 {
        match self {
            JobError::Config(_) => EXIT_USAGE,
            JobError::Dataset(DatasetError::MissingLabel(_)) => EXIT_MISSING_LABELS,
            _ => 1,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> JobError + '_ {
    move |source| JobError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone)]
pub struct JobConfig {
    pub inputs: Vec<PathBuf>,
    pub out_dir: PathBuf,
    pub resolution: f64,
    pub mode: ChannelMode,
    pub envelope: Option<Envelope>,
    pub format: TensorFormat,
    pub threads: usize,
    pub seed: u64,
    pub test_fraction: f64,
    pub folds: usize,
    pub ply: PlyOptions,
}

impl Default for JobConfig {
    fn default() -> Self {
        Self {
            inputs: Vec::new(),
            out_dir: PathBuf::from("."),
            resolution: 1.0,
            mode: ChannelMode::Rgb,
            envelope: None,
            format: TensorFormat::V3d,
            threads: default_threads(),
            seed: 0,
            test_fraction: 0.1,
            folds: 5,
            ply: PlyOptions::default(),
        }
    }
}

pub fn default_threads() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

impl JobConfig {
    pub fn validate(&self) -> Result<(), JobError> {
        if !(self.resolution.is_finite() && self.resolution > 0.0) {
            return Err(JobError::Config(format!("resolution must be positive, got {}", self.resolution)));
        }
        if self.threads == 0 {
            return Err(JobError::Config("thread count must be at least 1".into()));
        }
        Ok(())
    }
}

/// Outcome for one converted file.
#[derive(Debug, Clone, PartialEq)]
pub struct Converted {
    pub output: PathBuf,
    pub points: usize,
    /// Minimum-bounding-box dimensions before any envelope fitting.
    pub native_dims: [usize; 3],
    pub dims: [usize; 3],
    pub channels: usize,
    pub occupied: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FileReport {
    pub input: PathBuf,
    pub result: Result<Converted, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvertReport {
    pub files: Vec<FileReport>,
    pub wall_time: Duration,
}

fn dims_text(d: [usize; 3]) -> String {
    format!("{}x{}x{}", d[0], d[1], d[2])
}

impl ConvertReport {
    pub fn failed(&self) -> usize {
        self.files.iter().filter(|f| f.result.is_err()).count()
    }

    pub fn exit_code(&self) -> i32 {
        if self.failed() == 0 {
            EXIT_OK
        } else {
            EXIT_PARTIAL
        }
    }

    /// One tab-separated record per file plus a summary record.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for f in &self.files {
            match &f.result {
                Ok(c) => {
                    let warnings = if c.warnings.is_empty() { "none".to_string() } else { c.warnings.join(";") };
                    let _ = writeln!(
                        out,
                        "ok\tinput={}\toutput={}\tpoints={}\tgrid={}\tdims={}\tchannels={}\toccupied={}\twarnings={}",
                        f.input.display(),
                        c.output.display(),
                        c.points,
                        dims_text(c.native_dims),
                        dims_text(c.dims),
                        c.channels,
                        c.occupied,
                        warnings
                    );
                }
                Err(e) => {
                    let _ = writeln!(out, "error\tinput={}\treason={}", f.input.display(), e.replace(['\t', '\n'], " "));
                }
            }
        }
        let _ = writeln!(
            out,
            "summary\tfiles={}\tok={}\tfailed={}\twall_ms={}",
            self.files.len(),
            self.files.len() - self.failed(),
            self.failed(),
            self.wall_time.as_millis()
        );
        out
    }
}

fn load_cloud(path: &Path, options: &PlyOptions) -> Result<(PointCloud, Vec<String>), String> {
    let bytes = std::fs::read(path).map_err(|e| format!("cannot read: {e}"))?;
    let (cloud, report) = parse_ply_with(&bytes, options).map_err(|e| e.to_string())?;
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let mut warnings = Vec::new();
    if !report.missing_channels.is_empty() {
        warnings.push(format!("missing:{}", report.missing_channels.join(",")));
    }
    Ok((cloud.with_source_id(stem), warnings))
}

/// Converts every input into `<out_dir>/<stem>.<format>`. Per-file failures
/// are recorded in the report and do not stop the job.
pub fn run_convert(config: &JobConfig) -> Result<ConvertReport, JobError> {
    config.validate()?;
    if config.inputs.is_empty() {
        return Err(JobError::Config("no input files".into()));
    }
    std::fs::create_dir_all(&config.out_dir).map_err(io_err(&config.out_dir))?;
    let start = Instant::now();

    let mut seen = HashSet::new();
    let targets: Vec<Result<PathBuf, String>> = config
        .inputs
        .iter()
        .map(|input| {
            let stem = input.file_stem().ok_or("input has no file name")?.to_string_lossy().into_owned();
            let out = config.out_dir.join(format!("{stem}.{}", config.format.extension()));
            if seen.insert(out.clone()) {
                Ok(out)
            } else {
                Err(format!("output {} already produced by another input", out.display()))
            }
        })
        .collect();

    let files = in_pool(config.threads, || {
        let mut files = Vec::with_capacity(config.inputs.len());
        for (inputs, targets) in config.inputs.chunks(FILES_PER_BATCH).zip(targets.chunks(FILES_PER_BATCH)) {
            files.extend(convert_chunk(config, inputs, targets));
        }
        files
    })?;
    Ok(ConvertReport { files, wall_time: start.elapsed() })
}

fn convert_chunk(config: &JobConfig, inputs: &[PathBuf], targets: &[Result<PathBuf, String>]) -> Vec<FileReport> {
    let loaded: Vec<Result<(PointCloud, Vec<String>, PathBuf), String>> = inputs
        .par_iter()
        .zip(targets)
        .map(|(input, target)| {
            let target = target.clone()?;
            let (cloud, warnings) = load_cloud(input, &config.ply)?;
            Ok((cloud, warnings, target))
        })
        .collect();

    let clouds: Vec<PointCloud> = loaded.iter().filter_map(|r| r.as_ref().ok().map(|c| c.0.clone())).collect();
    let grids: Result<Vec<VoxelGrid>, String> = if clouds.is_empty() {
        Ok(Vec::new())
    } else {
        convert_batch(&clouds, config.resolution, config.mode).map_err(|e| e.to_string())
    };

    let mut grids = match grids {
        Ok(g) => g.into_iter().map(Ok).collect::<Vec<_>>(),
        Err(e) => vec![Err(e); clouds.len()],
    }
    .into_iter();

    let jobs: Vec<_> = inputs
        .iter()
        .zip(loaded)
        .map(|(input, loaded)| {
            let item = loaded.and_then(|(cloud, warnings, target)| {
                let grid = grids.next().expect("one grid per loaded cloud")?;
                Ok((cloud.len(), warnings, target, grid))
            });
            (input.clone(), item)
        })
        .collect();

    jobs.into_par_iter()
        .map(|(input, item)| {
            let result = item.and_then(|(points, warnings, output, grid)| {
                let native_dims = grid.dims();
                let grid = match &config.envelope {
                    Some(env) => fit_to_envelope(&grid, env),
                    None => grid,
                };
                std::fs::write(&output, encode(&grid, config.format))
                    .map_err(|e| format!("cannot write {}: {e}", output.display()))?;
                Ok(Converted {
                    output,
                    points,
                    native_dims,
                    dims: grid.dims(),
                    channels: grid.channels(),
                    occupied: grid.occupied_count(),
                    warnings,
                })
            });
            FileReport { input, result }
        })
        .collect()
}

/// Reads a label table, assigns the stratified split and folds, and returns
/// the manifest with any split warnings.
pub fn run_split(
    labels: &Path,
    test_fraction: f64,
    folds: usize,
    seed: u64,
) -> Result<(DatasetManifest, Vec<String>), JobError> {
    let file = std::fs::File::open(labels).map_err(io_err(labels))?;
    let manifest = read_manifest(std::io::BufReader::new(file))?;
    let outcome = stratified_split(&manifest, test_fraction, seed)?;
    let manifest = assign_folds(&outcome.manifest, folds, seed)?;
    Ok((manifest, outcome.warnings))
}

pub fn manifest_text(manifest: &DatasetManifest) -> Result<String, JobError> {
    let mut buf = Vec::new();
    write_manifest(manifest, &mut buf)?;
    Ok(String::from_utf8(buf).expect("manifest text is UTF-8"))
}

/// Default network input for a task: the RGB spike envelope for detection,
/// the Dataset II envelope for regression.
pub fn default_input_dims(task: Task) -> [usize; 4] {
    let env = match task {
        Task::Detection => Envelope::SPIKE_RGB,
        Task::Regression => Envelope::DATASET2,
    };
    [env.dims[0], env.dims[1], env.dims[2], 3]
}

/// Samples a batch and writes `model_NN.spec` files into `out_dir`.
pub fn run_archgen(
    out_dir: &Path,
    task: Task,
    batch_size: usize,
    seed: u64,
    input_dims: [usize; 4],
) -> Result<Vec<(PathBuf, ModelSpec)>, JobError> {
    let specs = sample_batch(seed, batch_size, task, input_dims)?;
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let width = batch_size.to_string().len().max(2);
    specs
        .into_iter()
        .enumerate()
        .map(|(i, spec)| {
            let path = out_dir.join(format!("model_{:0width$}.spec", i + 1));
            std::fs::write(&path, emit_spec(&spec)?).map_err(io_err(&path))?;
            Ok((path, spec))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub threads: usize,
    pub seconds: f64,
    pub points_per_second: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub clouds: usize,
    pub points_per_cloud: usize,
    pub rows: Vec<BenchRow>,
    /// Every thread count produced the same grids as the first.
    pub deterministic: bool,
}

impl BenchReport {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for r in &self.rows {
            let _ = writeln!(
                out,
                "bench\tthreads={}\tclouds={}\tpoints={}\tseconds={:.4}\tpoints_per_second={:.0}",
                r.threads,
                self.clouds,
                self.clouds * self.points_per_cloud,
                r.seconds,
                r.points_per_second
            );
        }
        let _ = writeln!(out, "determinism\t{}", if self.deterministic { "ok" } else { "MISMATCH" });
        out
    }

    pub fn speedup(&self, from: usize, to: usize) -> Option<f64> {
        let t = |n| self.rows.iter().find(|r| r.threads == n).map(|r| r.seconds);
        Some(t(from)? / t(to)?)
    }
}

/// Synthetic spike-sized clouds: roughly 100 x 300 x 100 mm.
pub fn bench_workload(clouds: usize, points_per_cloud: usize, seed: u64) -> Result<Vec<PointCloud>, JobError> {
    (0..clouds)
        .into_par_iter()
        .map(|i| {
            let spec = SyntheticSpec {
                extents: [(0.0, 100.0), (-50.0, 250.0), (10.0, 110.0)],
                count: points_per_cloud,
                seed: seed.wrapping_add(i as u64),
            };
            generate_synthetic_cloud(&spec).map_err(|e| JobError::Config(e.to_string()))
        })
        .collect()
}

/// Times end-to-end batch conversion for each thread count and checks the
/// outputs agree bit for bit.
pub fn run_bench(
    clouds: usize,
    points_per_cloud: usize,
    thread_counts: &[usize],
    resolution: f64,
    seed: u64,
) -> Result<BenchReport, JobError> {
    if clouds == 0 || points_per_cloud == 0 || thread_counts.is_empty() || thread_counts.contains(&0) {
        return Err(JobError::Config("bench needs clouds, points and thread counts of at least 1".into()));
    }
    let workload = bench_workload(clouds, points_per_cloud, seed)?;
    let total = (clouds * points_per_cloud) as f64;
    let mut baseline: Option<Vec<VoxelGrid>> = None;
    let mut deterministic = true;
    let mut rows = Vec::new();
    for &threads in thread_counts {
        let start = Instant::now();
        let grids = convert_batch_with_threads(&workload, resolution, ChannelMode::Rgbn, threads)?;
        let seconds = start.elapsed().as_secs_f64();
        rows.push(BenchRow { threads, seconds, points_per_second: total / seconds });
        match &baseline {
            Some(b) => deterministic &= *b == grids,
            None => baseline = Some(grids),
        }
    }
    Ok(BenchReport { clouds, points_per_cloud, rows, deterministic })
}
