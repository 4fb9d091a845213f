//! On-disk formats: dataset manifests, raw frames, sidecars, caches, cascade
//! and model files.

mod cache;
mod cascade_file;
mod frames;
mod landmarks;
mod manifest;
mod model_file;
mod roi;

pub use cache::{read_rppg_cache, write_rppg_cache, LANDMARK_CACHE_EXT, RPPG_CACHE_EXT};
pub use cascade_file::{load_cascade, parse_cascade, DEMO_CASCADE};
pub use frames::{decode_fseq, decode_ppm, encode_fseq, encode_ppm, load_frames, write_fseq};
pub use landmarks::{load_landmark_track, parse_landmark_track, write_landmark_track};
pub use manifest::{load_manifest, parse_manifest, ClipEntry, DatasetManifest};
pub use model_file::{
    decode_model, encode_model, persist_model, restore_model, MODEL_FORMAT_VERSION, MODEL_MAGIC,
};
pub use roi::{load_roi_sidecar, parse_roi_sidecar, write_roi_sidecar};

use std::io;
use std::path::{Path, PathBuf};

use emofuse_core::frame::FrameError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("manifest line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("manifest line {line}: unknown label {label:?}")]
    UnknownLabel { line: usize, label: String },
    #[error("manifest line {line}: duplicate clip id {id:?}")]
    DuplicateId { line: usize, id: String },
    #[error("manifest has no clip records")]
    EmptyManifest,
    #[error("{path}: {reason}")]
    FrameFormat { path: PathBuf, reason: String },
    #[error("{path}: payload truncated, expected {expected} bytes, found {actual}")]
    Truncated {
        path: PathBuf,
        expected: usize,
        actual: usize,
    },
    #[error("{path}: {source}")]
    Frames {
        path: PathBuf,
        #[source]
        source: FrameError,
    },
    #[error("{path}: row {row} has {found} fields, expected {expected}")]
    Arity {
        path: PathBuf,
        row: usize,
        found: usize,
        expected: usize,
    },
    #[error("{path}: row {row}, field {field}: {value:?} is not a number")]
    NotNumeric {
        path: PathBuf,
        row: usize,
        field: usize,
        value: String,
    },
    #[error("{path}: {found} rows, expected {expected}")]
    RowCount {
        path: PathBuf,
        found: usize,
        expected: usize,
    },
    #[error("model file: bad magic bytes {0:?}")]
    BadMagic([u8; 4]),
    #[error("model file: format version {found} is newer than supported version {supported}")]
    UnsupportedVersion { found: u16, supported: u16 },
    #[error("model file: checksum mismatch (stored {stored:#010x}, computed {computed:#010x})")]
    ChecksumMismatch { stored: u32, computed: u32 },
    #[error("model file: {0}")]
    ModelFormat(String),
    #[error("cascade {path}: {reason}")]
    Cascade { path: PathBuf, reason: String },
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>, DataError> {
    std::fs::read(path).map_err(|source| DataError::Io {
        path: path.to_owned(),
        source,
    })
}

pub(crate) fn read_text(path: &Path) -> Result<String, DataError> {
    std::fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.to_owned(),
        source,
    })
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<(), DataError> {
    std::fs::write(path, bytes).map_err(|source| DataError::Io {
        path: path.to_owned(),
        source,
    })
}

/// Parses comma-separated decimal rows, skipping blank lines. Row numbers in
/// errors are 0-based over the nonblank rows.
pub(crate) fn parse_numeric_rows(
    text: &str,
    path: &Path,
    arity: usize,
) -> Result<Vec<Vec<f64>>, DataError> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(row, line)| {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != arity {
                return Err(DataError::Arity {
                    path: path.to_owned(),
                    row,
                    found: fields.len(),
                    expected: arity,
                });
            }
            fields
                .iter()
                .enumerate()
                .map(|(field, v)| {
                    v.parse::<f64>()
                        .ok()
                        .filter(|x| x.is_finite())
                        .ok_or_else(|| DataError::NotNumeric {
                            path: path.to_owned(),
                            row,
                            field,
                            value: (*v).to_owned(),
                        })
                })
                .collect()
        })
        .collect()
}

/// One row per line, values joined by commas in shortest round-trip form.
pub(crate) fn format_rows<'a, I>(rows: I) -> String
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut out = String::new();
    for row in rows {
        let mut first = true;
        for v in row {
            if !first {
                out.push(',');
            }
            first = false;
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    out
}
