use std::path::Path;

use emofuse_core::facedetect::RoiBox;

use super::{read_text, write_file, DataError};

/// Reads `x,y,w,h` integer rows, one per frame.
pub fn load_roi_sidecar(path: &Path) -> Result<Vec<RoiBox>, DataError> {
    parse_roi_sidecar(&read_text(path)?, path)
}

pub fn parse_roi_sidecar(text: &str, path: &Path) -> Result<Vec<RoiBox>, DataError> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(row, line)| {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 4 {
                return Err(DataError::Arity {
                    path: path.to_owned(),
                    row,
                    found: fields.len(),
                    expected: 4,
                });
            }
            let mut v = [0usize; 4];
            for (field, (slot, text)) in v.iter_mut().zip(&fields).enumerate() {
                *slot = text.parse().map_err(|_| DataError::NotNumeric {
                    path: path.to_owned(),
                    row,
                    field,
                    value: (*text).to_owned(),
                })?;
            }
            Ok(RoiBox::new(v[0], v[1], v[2], v[3]))
        })
        .collect()
}

pub fn write_roi_sidecar(path: &Path, rois: &[RoiBox]) -> Result<(), DataError> {
    let text: String = rois
        .iter()
        .map(|r| format!("{},{},{},{}\n", r.x, r.y, r.w, r.h))
        .collect();
    write_file(path, text.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_rows() {
        let rois = parse_roi_sidecar("1,2,3,4\n\n5, 6, 7, 8\n", Path::new("r")).unwrap();
        assert_eq!(rois, vec![RoiBox::new(1, 2, 3, 4), RoiBox::new(5, 6, 7, 8)]);
        assert!(matches!(
            parse_roi_sidecar("1,2,3\n", Path::new("r")),
            Err(DataError::Arity { .. })
        ));
        assert!(matches!(
            parse_roi_sidecar("1,2,3,-4\n", Path::new("r")),
            Err(DataError::NotNumeric { field: 3, .. })
        ));
    }
}
