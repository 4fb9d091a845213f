//! Per-clip extraction caches: `<id>.rppg` holds `R,G,B` rows, `<id>.lmk`
//! uses the landmark sidecar format.

use std::path::Path;

use emofuse_core::signals::RppgSignal;

use super::{format_rows, parse_numeric_rows, read_text, write_file, DataError};

pub const RPPG_CACHE_EXT: &str = "rppg";
pub const LANDMARK_CACHE_EXT: &str = "lmk";

pub fn write_rppg_cache(path: &Path, signal: &RppgSignal) -> Result<(), DataError> {
    write_file(
        path,
        format_rows(signal.samples().iter().map(|s| s.as_slice())).as_bytes(),
    )
}

pub fn read_rppg_cache(path: &Path) -> Result<RppgSignal, DataError> {
    let rows = parse_numeric_rows(&read_text(path)?, path, 3)?;
    Ok(RppgSignal::new(
        rows.iter().map(|r| [r[0], r[1], r[2]]).collect(),
    ))
}
