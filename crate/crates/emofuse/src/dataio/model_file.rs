//! Binary model files.
//!
//! Layout, all integers little-endian:
//! `FEM1`, version `u16`, layer count `u32`; per layer `rows u32`, `cols u32`,
//! `rows·cols` weights then `rows` biases as `f64`; one activation tag byte
//! per layer; CRC-32 over every preceding byte.

use std::path::Path;

use emofuse_core::classifier::{Activation, Layer};
use emofuse_core::{Matrix, MlpModel};

use super::{read_file, write_file, DataError};

pub const MODEL_MAGIC: [u8; 4] = *b"FEM1";
pub const MODEL_FORMAT_VERSION: u16 = 1;

pub fn encode_model(model: &MlpModel) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&MODEL_MAGIC);
    out.extend_from_slice(&MODEL_FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(model.layers().len() as u32).to_le_bytes());
    for layer in model.layers() {
        out.extend_from_slice(&(layer.outputs() as u32).to_le_bytes());
        out.extend_from_slice(&(layer.inputs() as u32).to_le_bytes());
        for v in layer.weights.as_slice().iter().chain(&layer.biases) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out.extend(model.layers().iter().map(|l| l.activation.tag()));
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], DataError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| DataError::ModelFormat("unexpected end of data".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize, DataError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>, DataError> {
        let len = n
            .checked_mul(8)
            .ok_or_else(|| DataError::ModelFormat("layer too large".into()))?;
        Ok(self
            .take(len)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

/// Checks magic, then version, then checksum, then structure.
pub fn decode_model(bytes: &[u8]) -> Result<MlpModel, DataError> {
    if bytes.len() < 4 {
        return Err(DataError::ModelFormat("file shorter than header".into()));
    }
    let magic: [u8; 4] = bytes[..4].try_into().unwrap();
    if magic != MODEL_MAGIC {
        return Err(DataError::BadMagic(magic));
    }
    if bytes.len() < 6 {
        return Err(DataError::ModelFormat("file shorter than header".into()));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version > MODEL_FORMAT_VERSION {
        return Err(DataError::UnsupportedVersion {
            found: version,
            supported: MODEL_FORMAT_VERSION,
        });
    }
    if version == 0 {
        return Err(DataError::ModelFormat(
            "version 0 is not a valid format".into(),
        ));
    }
    if bytes.len() < 14 {
        return Err(DataError::ModelFormat("file shorter than header".into()));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().unwrap());
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(DataError::ChecksumMismatch { stored, computed });
    }

    let mut r = Reader {
        bytes: body,
        pos: 6,
    };
    let count = r.u32()?;
    if count == 0 {
        return Err(DataError::ModelFormat("model has no layers".into()));
    }
    let mut shapes = Vec::new();
    for _ in 0..count {
        let rows = r.u32()?;
        let cols = r.u32()?;
        let n = rows
            .checked_mul(cols)
            .ok_or_else(|| DataError::ModelFormat("layer too large".into()))?;
        let weights = r.f64s(n)?;
        let biases = r.f64s(rows)?;
        shapes.push((rows, cols, weights, biases));
    }
    let tags = r.take(count)?;
    if r.pos != body.len() {
        return Err(DataError::ModelFormat(
            "trailing bytes before checksum".into(),
        ));
    }
    let layers = shapes
        .into_iter()
        .zip(tags)
        .map(|((rows, cols, weights, biases), &tag)| {
            let activation = Activation::from_tag(tag)
                .ok_or_else(|| DataError::ModelFormat(format!("unknown activation tag {tag}")))?;
            let weights = Matrix::from_vec(rows, cols, weights)
                .ok_or_else(|| DataError::ModelFormat("weight shape".into()))?;
            Ok(Layer {
                weights,
                biases,
                activation,
            })
        })
        .collect::<Result<Vec<_>, DataError>>()?;
    MlpModel::from_layers(layers).map_err(|e| DataError::ModelFormat(e.to_string()))
}

pub fn persist_model(path: &Path, model: &MlpModel) -> Result<(), DataError> {
    write_file(path, &encode_model(model))
}

pub fn restore_model(path: &Path) -> Result<MlpModel, DataError> {
    decode_model(&read_file(path)?)
}
