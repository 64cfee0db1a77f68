//! Conversion of multispectral (R, G, B, NIR) plant point clouds into dense
//! 3D voxel images, plus the dataset and model-search plumbing around it.
//!
//! The conversion path is [`ply`] → [`batch`] → [`voxelize`] →
//! [`resample`] → [`tensor_io`]. [`dataset`] builds stratified train/test
//! manifests, [`archgen`] samples constrained 3D-CNN architectures and
//! [`pipeline`] wires everything into file-level jobs.

pub mod archgen;
pub mod batch;
pub mod dataset;
pub mod error;
pub mod pipeline;
pub mod ply;
pub mod resample;
pub mod tensor_io;
pub mod voxelize;

pub use batch::{build_soa_batch, minmax_reduce, Extents, SoABatch};
pub use error::{ArchError, DatasetError, FormatError, PlyError, ResampleError, VoxelError};
pub use ply::{parse_ply, PointCloud};
pub use resample::{fit_to_envelope, pad_to, Envelope};
pub use voxelize::{
    compute_dims, compute_interp_params, convert_batch, convert_batch_with_threads, voxelize_cloud, ChannelMode,
    InterpParams, VoxelGrid,
};
