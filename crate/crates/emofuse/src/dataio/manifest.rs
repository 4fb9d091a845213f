use std::collections::HashSet;
use std::path::{Path, PathBuf};

use emofuse_core::Emotion;

use super::{read_text, DataError};

/// One clip record. Paths are resolved against the manifest's directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClipEntry {
    pub id: String,
    pub frames_source: PathBuf,
    pub landmarks_path: Option<PathBuf>,
    pub roi_path: Option<PathBuf>,
    pub label: Emotion,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    pub entries: Vec<ClipEntry>,
}

impl DatasetManifest {
    /// The fixed label order used for class indices.
    pub fn label_set(&self) -> [Emotion; emofuse_core::NUM_EMOTIONS] {
        Emotion::ALL
    }
}

pub fn load_manifest(path: &Path) -> Result<DatasetManifest, DataError> {
    let text = read_text(path)?;
    let base = path.parent().unwrap_or_else(|| Path::new(""));
    parse_manifest(&text, base)
}

/// Parses `id<TAB>frames<TAB>label[<TAB>landmarks=path][<TAB>roi=path]`
/// records; `#` lines and blank lines are skipped. Line numbers are 1-based.
pub fn parse_manifest(text: &str, base: &Path) -> Result<DatasetManifest, DataError> {
    let mut entries = Vec::new();
    let mut ids = HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let raw = raw.trim_end_matches('\r');
        if raw.trim().is_empty() || raw.starts_with('#') {
            continue;
        }
        let malformed = |reason: &str| DataError::MalformedRecord {
            line,
            reason: reason.to_owned(),
        };
        let fields: Vec<&str> = raw.split('\t').collect();
        if fields.len() < 3 {
            return Err(malformed("expected at least id, frames source and label"));
        }
        let (id, frames, label) = (fields[0].trim(), fields[1].trim(), fields[2].trim());
        if id.is_empty() || frames.is_empty() {
            return Err(malformed("empty id or frames source"));
        }
        let label = Emotion::from_name(label).ok_or_else(|| DataError::UnknownLabel {
            line,
            label: label.to_owned(),
        })?;
        let mut landmarks_path = None;
        let mut roi_path = None;
        for extra in &fields[3..] {
            let (key, value) = extra
                .split_once('=')
                .ok_or_else(|| malformed("optional fields must be key=path"))?;
            let slot = match key.trim() {
                "landmarks" => &mut landmarks_path,
                "roi" => &mut roi_path,
                _ => return Err(malformed("unknown optional field")),
            };
            if slot.is_some() || value.trim().is_empty() {
                return Err(malformed("repeated or empty optional field"));
            }
            *slot = Some(base.join(value.trim()));
        }
        if !ids.insert(id.to_owned()) {
            return Err(DataError::DuplicateId {
                line,
                id: id.to_owned(),
            });
        }
        entries.push(ClipEntry {
            id: id.to_owned(),
            frames_source: base.join(frames),
            landmarks_path,
            roi_path,
            label,
        });
    }
    if entries.is_empty() {
        return Err(DataError::EmptyManifest);
    }
    Ok(DatasetManifest { entries })
}
