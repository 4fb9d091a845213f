use std::path::Path;

use emofuse_core::{LandmarkTrack, LANDMARK_COUNT};

use super::{format_rows, parse_numeric_rows, read_text, write_file, DataError};

/// Reads a sidecar of `x0,y0,…,x67,y67` rows, one per frame.
pub fn load_landmark_track(
    path: &Path,
    expected_frames: usize,
) -> Result<LandmarkTrack, DataError> {
    parse_landmark_track(&read_text(path)?, path, expected_frames)
}

pub fn parse_landmark_track(
    text: &str,
    path: &Path,
    expected_frames: usize,
) -> Result<LandmarkTrack, DataError> {
    let rows = parse_numeric_rows(text, path, 2 * LANDMARK_COUNT)?;
    if rows.len() != expected_frames {
        return Err(DataError::RowCount {
            path: path.to_owned(),
            found: rows.len(),
            expected: expected_frames,
        });
    }
    Ok(LandmarkTrack::from_flat_rows(&rows).expect("row arity checked"))
}

pub fn write_landmark_track(path: &Path, track: &LandmarkTrack) -> Result<(), DataError> {
    let rows: Vec<Vec<f64>> = track
        .frames()
        .iter()
        .map(|f| f.iter().flatten().copied().collect())
        .collect();
    write_file(path, format_rows(rows.iter().map(Vec::as_slice)).as_bytes())
}
