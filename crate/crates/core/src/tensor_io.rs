//! Tensor file formats.
//!
//! `v3d` (little-endian):
//!
//! ```text
//! offset  size  field
//! 0       4     magic "V3D1"
//! 4       4     width   (u32)
//! 8       4     height  (u32)
//! 12      4     depth   (u32)
//! 16      4     channels (u32, 1/3/4)
//! 20      8     payload length in bytes (u64)
//! 28      ...   voxels, data[z][y][x][c]
//! ```
//!
//! `npy` version 1.0 with dtype `|u1` and shape `(depth, height, width,
//! channels)`; the payload bytes are identical to the v3d payload.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::FormatError;
use crate::voxelize::{ChannelMode, VoxelGrid};

pub const V3D_MAGIC: &[u8; 4] = b"V3D1";
pub const V3D_HEADER_LEN: usize = 28;
pub const NPY_MAGIC: &[u8; 6] = b"\x93NUMPY";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TensorFormat {
    V3d,
    Npy,
}

impl TensorFormat {
    pub fn extension(self) -> &'static str {
        match self {
            TensorFormat::V3d => "v3d",
            TensorFormat::Npy => "npy",
        }
    }
}

impl fmt::Display for TensorFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.extension())
    }
}

impl FromStr for TensorFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "v3d" => Ok(TensorFormat::V3d),
            "npy" => Ok(TensorFormat::Npy),
            other => Err(format!("unknown tensor format '{other}' (expected v3d or npy)")),
        }
    }
}

fn corrupt(offset: usize, reason: impl Into<String>) -> FormatError {
    FormatError::Corrupt { offset, reason: reason.into() }
}

fn u32_dim(v: usize) -> u32 {
    u32::try_from(v).expect("grid dimension exceeds u32")
}

pub fn encode_v3d(grid: &VoxelGrid) -> Vec<u8> {
    let mut out = Vec::with_capacity(V3D_HEADER_LEN + grid.data().len());
    out.extend_from_slice(V3D_MAGIC);
    for d in grid.dims() {
        out.extend_from_slice(&u32_dim(d).to_le_bytes());
    }
    out.extend_from_slice(&u32_dim(grid.channels()).to_le_bytes());
    out.extend_from_slice(&(grid.data().len() as u64).to_le_bytes());
    out.extend_from_slice(grid.data());
    out
}

/// Shape and payload location of a tensor file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TensorHeader {
    pub format: TensorFormat,
    /// (width, height, depth)
    pub dims: [usize; 3],
    pub channels: usize,
    pub payload_offset: usize,
}

fn read_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap())
}

fn payload_len(dims: [usize; 3], channels: usize) -> Option<usize> {
    dims.iter().try_fold(channels, |acc, &d| acc.checked_mul(d))
}

fn v3d_header(bytes: &[u8]) -> Result<TensorHeader, FormatError> {
    if bytes.len() < 4 || &bytes[..4] != V3D_MAGIC {
        return Err(corrupt(0, "missing V3D1 magic"));
    }
    if bytes.len() < V3D_HEADER_LEN {
        return Err(corrupt(bytes.len(), "header truncated"));
    }
    let dims = [read_u32(bytes, 4), read_u32(bytes, 8), read_u32(bytes, 12)].map(|d| d as usize);
    for (i, &d) in dims.iter().enumerate() {
        if d == 0 {
            return Err(corrupt(4 + 4 * i, "zero dimension"));
        }
    }
    let channels = read_u32(bytes, 16) as usize;
    if ChannelMode::from_channels(channels).is_none() {
        return Err(corrupt(16, format!("channel count {channels} is not 1, 3 or 4")));
    }
    let declared = u64::from_le_bytes(bytes[20..28].try_into().unwrap());
    let expected = payload_len(dims, channels).ok_or_else(|| corrupt(4, "dimensions overflow"))?;
    if declared != expected as u64 {
        return Err(corrupt(20, format!("payload length {declared} does not match {expected} voxel bytes")));
    }
    let actual = bytes.len() - V3D_HEADER_LEN;
    if actual < expected {
        return Err(corrupt(bytes.len(), format!("payload truncated: {actual} of {expected} bytes")));
    }
    if actual > expected {
        return Err(corrupt(V3D_HEADER_LEN + expected, "trailing bytes after payload"));
    }
    Ok(TensorHeader { format: TensorFormat::V3d, dims, channels, payload_offset: V3D_HEADER_LEN })
}

pub fn decode_v3d(bytes: &[u8]) -> Result<VoxelGrid, FormatError> {
    let h = v3d_header(bytes)?;
    grid_from(h, bytes)
}

fn grid_from(h: TensorHeader, bytes: &[u8]) -> Result<VoxelGrid, FormatError> {
    let mode = ChannelMode::from_channels(h.channels).ok_or(FormatError::Channels(h.channels as u32))?;
    let data = bytes[h.payload_offset..].to_vec();
    VoxelGrid::from_data(h.dims, mode, data).ok_or_else(|| corrupt(h.payload_offset, "payload size mismatch"))
}

pub fn encode_npy(grid: &VoxelGrid) -> Vec<u8> {
    let [w, h, d] = grid.dims();
    let dict = format!(
        "{{'descr': '|u1', 'fortran_order': False, 'shape': ({d}, {h}, {w}, {}), }}",
        grid.channels()
    );
    // magic(6) + version(2) + header length(2) + dict + padding + '\n'
    let unpadded = 10 + dict.len() + 1;
    let padding = (64 - unpadded % 64) % 64;
    let header_len = dict.len() + padding + 1;
    let mut out = Vec::with_capacity(10 + header_len + grid.data().len());
    out.extend_from_slice(NPY_MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&(header_len as u16).to_le_bytes());
    out.extend_from_slice(dict.as_bytes());
    out.extend(std::iter::repeat(b' ').take(padding));
    out.push(b'\n');
    out.extend_from_slice(grid.data());
    out
}

/// Value following `'key':` in a numpy header dict.
fn dict_value<'a>(dict: &'a str, key: &str) -> Option<&'a str> {
    let start = dict.find(&format!("'{key}'"))? + key.len() + 2;
    let rest = dict[start..].trim_start().strip_prefix(':')?.trim_start();
    let end = if rest.starts_with('(') {
        rest.find(')')? + 1
    } else {
        rest.find([',', '}']).unwrap_or(rest.len())
    };
    Some(rest[..end].trim())
}

fn npy_header(bytes: &[u8]) -> Result<TensorHeader, FormatError> {
    if bytes.len() < 6 || &bytes[..6] != NPY_MAGIC {
        return Err(corrupt(0, "missing NUMPY magic"));
    }
    if bytes.len() < 10 {
        return Err(corrupt(bytes.len(), "header truncated"));
    }
    let (header_len, dict_start) = match bytes[6] {
        1 => (u16::from_le_bytes([bytes[8], bytes[9]]) as usize, 10),
        2 | 3 if bytes.len() >= 12 => (read_u32(bytes, 8) as usize, 12),
        v => return Err(corrupt(6, format!("unsupported npy version {v}"))),
    };
    let payload_offset = dict_start + header_len;
    let dict = bytes
        .get(dict_start..payload_offset)
        .ok_or_else(|| corrupt(bytes.len(), "header truncated"))?;
    let dict = std::str::from_utf8(dict).map_err(|e| corrupt(dict_start + e.valid_up_to(), "header is not text"))?;

    let descr = dict_value(dict, "descr").ok_or_else(|| corrupt(dict_start, "no descr"))?;
    if !matches!(descr.trim_matches(['\'', '"']), "|u1" | "<u1" | ">u1" | "u1" | "B") {
        return Err(corrupt(dict_start, format!("dtype {descr} is not unsigned 8-bit")));
    }
    if dict_value(dict, "fortran_order") != Some("False") {
        return Err(corrupt(dict_start, "only C-contiguous arrays are supported"));
    }
    let shape = dict_value(dict, "shape").ok_or_else(|| corrupt(dict_start, "no shape"))?;
    let shape: Vec<usize> = shape
        .trim_matches(['(', ')'])
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| corrupt(dict_start, format!("bad shape entry '{s}'"))))
        .collect::<Result<_, _>>()?;
    let [d, h, w, c] = shape[..] else {
        return Err(corrupt(dict_start, format!("expected a 4-d shape, found {}-d", shape.len())));
    };
    if ChannelMode::from_channels(c).is_none() || [d, h, w].contains(&0) {
        return Err(corrupt(dict_start, format!("unsupported shape ({d}, {h}, {w}, {c})")));
    }
    let expected = payload_len([w, h, d], c).ok_or_else(|| corrupt(dict_start, "shape overflows"))?;
    let actual = bytes.len() - payload_offset.min(bytes.len());
    if actual < expected {
        return Err(corrupt(bytes.len(), format!("payload truncated: {actual} of {expected} bytes")));
    }
    if actual > expected {
        return Err(corrupt(payload_offset + expected, "trailing bytes after payload"));
    }
    Ok(TensorHeader { format: TensorFormat::Npy, dims: [w, h, d], channels: c, payload_offset })
}

pub fn decode_npy(bytes: &[u8]) -> Result<VoxelGrid, FormatError> {
    let h = npy_header(bytes)?;
    grid_from(h, bytes)
}

pub fn encode(grid: &VoxelGrid, format: TensorFormat) -> Vec<u8> {
    match format {
        TensorFormat::V3d => encode_v3d(grid),
        TensorFormat::Npy => encode_npy(grid),
    }
}

/// Parses the header of either format, chosen by magic bytes.
pub fn read_header(bytes: &[u8]) -> Result<TensorHeader, FormatError> {
    if bytes.starts_with(NPY_MAGIC) {
        npy_header(bytes)
    } else {
        v3d_header(bytes)
    }
}

pub fn decode(bytes: &[u8]) -> Result<VoxelGrid, FormatError> {
    let h = read_header(bytes)?;
    grid_from(h, bytes)
}

pub fn write_tensor(path: &Path, grid: &VoxelGrid, format: TensorFormat) -> Result<(), FormatError> {
    std::fs::write(path, encode(grid, format))?;
    Ok(())
}

pub fn read_tensor(path: &Path) -> Result<VoxelGrid, FormatError> {
    decode(&std::fs::read(path)?)
}

/// Header fields plus the count of non-empty voxels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TensorSummary {
    pub header: TensorHeader,
    pub occupied: usize,
}

pub fn inspect(bytes: &[u8]) -> Result<TensorSummary, FormatError> {
    let header = read_header(bytes)?;
    let occupied = bytes[header.payload_offset..]
        .chunks_exact(header.channels)
        .filter(|v| v.iter().any(|&b| b != 0))
        .count();
    Ok(TensorSummary { header, occupied })
}
