//! Binary file formats.
//!
//! Prediction tensors: 4-byte magic `SELD`, then four little-endian u32
//! header words (frames T, cells G, slots K, channels C+3), then
//! `T*G*K*(C+3)` little-endian f32 values in row-major slot order. In-memory
//! math is f64, so saving truncates to f32 precision.
//!
//! Feature sequences: magic `FEAT`, u32 frame count and dimension, then
//! little-endian f64 values (full precision, since features seed training).

use std::path::Path;

use adyolo_core::geometry::GridSpec;
use adyolo_core::labels::PredictionTensor;
use anyhow::{bail, Context, Result};

pub const PREDICTION_MAGIC: [u8; 4] = *b"SELD";
pub const FEATURE_MAGIC: [u8; 4] = *b"FEAT";

struct Reader<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    offset: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        if self.offset + len > self.bytes.len() {
            bail!("{}: truncated file", self.path.display());
        }
        let slice = &self.bytes[self.offset..self.offset + len];
        self.offset += len;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub fn write_predictions(path: &Path, preds: &PredictionTensor) -> Result<()> {
    let mut bytes = Vec::with_capacity(20 + preds.raw().len() * 4);
    bytes.extend_from_slice(&PREDICTION_MAGIC);
    for dim in [
        preds.num_frames() as u32,
        preds.num_cells() as u32,
        preds.preds_per_cell() as u32,
        preds.channels() as u32,
    ] {
        bytes.extend_from_slice(&dim.to_le_bytes());
    }
    for &value in preds.raw() {
        bytes.extend_from_slice(&(value as f32).to_le_bytes());
    }
    std::fs::write(path, bytes).with_context(|| format!("cannot write {}", path.display()))
}

/// Loads a prediction tensor, rejecting mismatched headers: wrong magic,
/// a cell count that disagrees with the configured grid, or fewer than four
/// channels.
pub fn read_predictions(path: &Path, grid: &GridSpec) -> Result<PredictionTensor> {
    let bytes =
        std::fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut reader = Reader {
        path,
        bytes: &bytes,
        offset: 0,
    };
    if reader.take(4)? != PREDICTION_MAGIC {
        bail!("{}: not a prediction tensor file (bad magic)", path.display());
    }
    let frames = reader.u32()? as usize;
    let cells = reader.u32()? as usize;
    let slots = reader.u32()? as usize;
    let channels = reader.u32()? as usize;
    if cells != grid.num_cells() {
        bail!(
            "{}: file has {cells} grid cells but the configured grid has {}",
            path.display(),
            grid.num_cells()
        );
    }
    if channels < 4 {
        bail!("{}: {channels} channels per slot, need at least 4", path.display());
    }
    if frames == 0 || slots == 0 {
        bail!("{}: empty tensor dimensions", path.display());
    }
    let count = frames * cells * slots * channels;
    let data = reader.take(count * 4)?;
    if reader.offset != bytes.len() {
        bail!("{}: trailing bytes after tensor data", path.display());
    }
    let raw: Vec<f64> = data
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    PredictionTensor::new(raw, frames, *grid, slots, channels - 3)
        .map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
}

pub fn write_features(path: &Path, features: &[Vec<f64>]) -> Result<()> {
    let dim = features.first().map_or(0, Vec::len);
    if features.iter().any(|f| f.len() != dim) {
        bail!("feature rows have inconsistent dimensions");
    }
    let mut bytes = Vec::with_capacity(12 + features.len() * dim * 8);
    bytes.extend_from_slice(&FEATURE_MAGIC);
    bytes.extend_from_slice(&(features.len() as u32).to_le_bytes());
    bytes.extend_from_slice(&(dim as u32).to_le_bytes());
    for row in features {
        for &value in row {
            bytes.extend_from_slice(&value.to_le_bytes());
        }
    }
    std::fs::write(path, bytes).with_context(|| format!("cannot write {}", path.display()))
}

pub fn read_features(path: &Path) -> Result<Vec<Vec<f64>>> {
    let bytes =
        std::fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut reader = Reader {
        path,
        bytes: &bytes,
        offset: 0,
    };
    if reader.take(4)? != FEATURE_MAGIC {
        bail!("{}: not a feature file (bad magic)", path.display());
    }
    let frames = reader.u32()? as usize;
    let dim = reader.u32()? as usize;
    let mut features = Vec::with_capacity(frames);
    for _ in 0..frames {
        let row = reader
            .take(dim * 8)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        features.push(row);
    }
    if reader.offset != bytes.len() {
        bail!("{}: trailing bytes after feature data", path.display());
    }
    Ok(features)
}
