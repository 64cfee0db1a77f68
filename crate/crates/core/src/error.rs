use thiserror::Error;

use crate::archgen::Violation;
use crate::voxelize::Axis;

#[derive(Debug, Error)]
pub enum PlyError {
    #[error("malformed PLY at line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("PLY payload truncated: {expected} vertices declared, {found} read")]
    Truncated { expected: usize, found: usize },
    #[error("unsupported PLY format '{0}'")]
    UnsupportedFormat(String),
    #[error("bad vertex {index}: {reason}")]
    Data { index: usize, reason: String },
    #[error("invalid point cloud: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Error)]
pub enum VoxelError {
    #[error("batch holds no point clouds")]
    EmptyBatch,
    #[error("resolution factor must be positive and finite, got {0}")]
    InvalidResolution(f64),
    #[error("grid of {0:?} voxels does not fit in memory")]
    GridTooLarge([usize; 3]),
    #[error("failed to build worker pool: {0}")]
    ThreadPool(String),
}

#[derive(Debug, Error)]
pub enum ResampleError {
    #[error("grid exceeds envelope along {axis:?}: {size} > {limit}")]
    Pad { axis: Axis, size: usize, limit: usize },
    #[error("invalid envelope '{0}'")]
    InvalidEnvelope(String),
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("invalid spikelet counts: {0}")]
    Label(String),
    #[error("records without a usable label: {}", .0.join(", "))]
    MissingLabel(Vec<String>),
    #[error("cannot build {k} folds from {train} training records")]
    Fold { k: usize, train: usize },
    #[error("test fraction must lie strictly between 0 and 1, got {0}")]
    InvalidFraction(f64),
    #[error("duplicate record path '{0}'")]
    DuplicatePath(String),
    #[error("manifest line {line}: {reason}")]
    Manifest { line: usize, reason: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum ArchError {
    #[error("spatial dimensions collapse to zero before conv layer {layer}")]
    Shape { layer: usize },
    #[error("requested {requested} distinct architectures but only {available} exist")]
    Sample { requested: usize, available: usize },
    #[error("invalid architecture: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error("spec document line {line}: {reason}")]
    SpecParse { line: usize, reason: String },
}

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("corrupt tensor file at byte {offset}: {reason}")]
    Corrupt { offset: usize, reason: String },
    #[error("channel count {0} is not one of 1, 3, 4")]
    Channels(u32),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
