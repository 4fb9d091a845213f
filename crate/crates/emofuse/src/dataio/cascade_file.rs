//! Cascades are stored as JSON mirroring [`HaarCascade`].

use std::path::Path;

use emofuse_core::facedetect::HaarCascade;

use super::{read_text, DataError};

/// A one-stage cascade that fires on a bright block centred in a darker
/// surround. It locates the face squares drawn by the synthetic generator.
pub const DEMO_CASCADE: &str = include_str!("../../assets/demo_cascade.json");

pub fn parse_cascade(text: &str, path: &Path) -> Result<HaarCascade, DataError> {
    let err = |reason: String| DataError::Cascade {
        path: path.to_owned(),
        reason,
    };
    let cascade: HaarCascade = serde_json::from_str(text).map_err(|e| err(e.to_string()))?;
    cascade.validate().map_err(|e| err(e.to_string()))?;
    Ok(cascade)
}

pub fn load_cascade(path: &Path) -> Result<HaarCascade, DataError> {
    parse_cascade(&read_text(path)?, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn demo_parses() {
        let c = parse_cascade(DEMO_CASCADE, Path::new("demo")).unwrap();
        assert_eq!(c.base_window, (24, 24));
        assert_eq!(c.stages[0].weak[0].rects.len(), 2);
    }

    #[test]
    fn rejects_invalid() {
        let text = DEMO_CASCADE.replace("\"w\": 24", "\"w\": 25");
        assert!(matches!(
            parse_cascade(&text, Path::new("c")),
            Err(DataError::Cascade { .. })
        ));
        assert!(parse_cascade("{", Path::new("c")).is_err());
    }
}
