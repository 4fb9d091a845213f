//! Raw frame inputs: FSEQ containers and directories of binary PPM images.
//!
//! FSEQ layout: `FSEQ`, then `T`, `H`, `W` as little-endian `u32`, then
//! `T·H·W·3` bytes of interleaved RGB, frame-major and row-major.

use std::path::Path;

use emofuse_core::FrameSequence;

use super::{read_file, write_file, DataError};

const FSEQ_MAGIC: &[u8; 4] = b"FSEQ";
const FSEQ_HEADER: usize = 16;

pub fn encode_fseq(seq: &FrameSequence) -> Vec<u8> {
    let mut out = Vec::with_capacity(FSEQ_HEADER + seq.as_bytes().len());
    out.extend_from_slice(FSEQ_MAGIC);
    for v in [seq.frame_count(), seq.height(), seq.width()] {
        out.extend_from_slice(&u32::try_from(v).expect("dimension fits u32").to_le_bytes());
    }
    out.extend_from_slice(seq.as_bytes());
    out
}

pub fn decode_fseq(bytes: &[u8], path: &Path) -> Result<FrameSequence, DataError> {
    let format = |reason: &str| DataError::FrameFormat {
        path: path.to_owned(),
        reason: reason.to_owned(),
    };
    if bytes.len() < FSEQ_HEADER {
        return Err(DataError::Truncated {
            path: path.to_owned(),
            expected: FSEQ_HEADER,
            actual: bytes.len(),
        });
    }
    if &bytes[..4] != FSEQ_MAGIC {
        return Err(format("missing FSEQ magic"));
    }
    let field = |i: usize| {
        let off = 4 + 4 * i;
        u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap()) as usize
    };
    let (t, h, w) = (field(0), field(1), field(2));
    if t == 0 {
        return Err(format("frame count is zero"));
    }
    if h == 0 || w == 0 {
        return Err(format("zero frame dimension"));
    }
    let expected = t
        .checked_mul(h)
        .and_then(|v| v.checked_mul(w))
        .and_then(|v| v.checked_mul(3))
        .ok_or_else(|| format("dimensions overflow"))?;
    let payload = &bytes[FSEQ_HEADER..];
    if payload.len() < expected {
        return Err(DataError::Truncated {
            path: path.to_owned(),
            expected,
            actual: payload.len(),
        });
    }
    if payload.len() > expected {
        return Err(format("trailing bytes after payload"));
    }
    FrameSequence::new(t, h, w, payload.to_vec()).map_err(|source| DataError::Frames {
        path: path.to_owned(),
        source,
    })
}

pub fn write_fseq(path: &Path, seq: &FrameSequence) -> Result<(), DataError> {
    write_file(path, &encode_fseq(seq))
}

/// Binary P6 with maxval 255.
pub fn encode_ppm(width: usize, height: usize, rgb: &[u8]) -> Vec<u8> {
    let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(rgb);
    out
}

/// Decodes a binary P6 image with maxval 255 into `(height, width, rgb)`.
pub fn decode_ppm(bytes: &[u8], path: &Path) -> Result<(usize, usize, Vec<u8>), DataError> {
    let format = |reason: &str| DataError::FrameFormat {
        path: path.to_owned(),
        reason: reason.to_owned(),
    };
    let mut pos = 0;
    let mut token = || -> Option<&[u8]> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        (pos > start).then(|| &bytes[start..pos])
    };
    if token() != Some(b"P6".as_slice()) {
        return Err(format("not a binary P6 PPM"));
    }
    let mut number = |what: &str| -> Result<usize, DataError> {
        token()
            .and_then(|t| std::str::from_utf8(t).ok())
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| format(&format!("bad {what}")))
    };
    let width = number("width")?;
    let height = number("height")?;
    let maxval = number("maxval")?;
    if maxval != 255 {
        return Err(format("only maxval 255 is supported"));
    }
    if width == 0 || height == 0 {
        return Err(format("zero image dimension"));
    }
    // Exactly one whitespace byte separates the header from the raster.
    let start = pos + 1;
    let expected = width * height * 3;
    let raster = bytes.get(start..).unwrap_or(&[]);
    if raster.len() < expected {
        return Err(DataError::Truncated {
            path: path.to_owned(),
            expected,
            actual: raster.len(),
        });
    }
    Ok((height, width, raster[..expected].to_vec()))
}

/// Loads an FSEQ file, or every `.ppm` file of a directory in lexicographic
/// filename order.
pub fn load_frames(source: &Path) -> Result<FrameSequence, DataError> {
    let io = |e| DataError::Io {
        path: source.to_owned(),
        source: e,
    };
    let meta = std::fs::metadata(source).map_err(io)?;
    if !meta.is_dir() {
        return decode_fseq(&read_file(source)?, source);
    }
    let mut files: Vec<_> = std::fs::read_dir(source)
        .map_err(io)?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()
        .map_err(io)?;
    files.retain(|p| p.is_file() && p.extension().is_some_and(|e| e.eq_ignore_ascii_case("ppm")));
    files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    if files.is_empty() {
        return Err(DataError::FrameFormat {
            path: source.to_owned(),
            reason: "directory holds no .ppm frames".to_owned(),
        });
    }
    let frames = files
        .iter()
        .map(|p| decode_ppm(&read_file(p)?, p))
        .collect::<Result<Vec<_>, _>>()?;
    FrameSequence::from_frames(frames).map_err(|source_err| DataError::Frames {
        path: source.to_owned(),
        source: source_err,
    })
}
