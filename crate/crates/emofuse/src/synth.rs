//! Synthetic surrogate dataset.
//!
//! Every clip's label `c` is split into a skin-tone group `c / 2`, carried by
//! the face colour (and so by the rPPG trace), and an expression level
//! `c % 5`, carried by mouth opening and brow raise in the landmark track.
//! Either modality alone narrows the label to two candidates; together they
//! pin it down.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use emofuse_core::facedetect::RoiBox;
use emofuse_core::{Emotion, FrameSequence, LandmarkTrack, LANDMARK_COUNT, NUM_EMOTIONS};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataio::{write_fseq, write_landmark_track, write_roi_sidecar, DataError, DEMO_CASCADE};

pub const DEFAULT_CLIPS: usize = 400;

pub const FRAME_SIZE: usize = 48;
pub const FACE_SIZE: usize = 28;
const MIN_FRAMES: usize = 12;
const MAX_FRAMES: usize = 16;
// Face offsets for which the detector's nearest window still fits the frame.
const FACE_OFFSETS: [(usize, usize); 3] = [(13, 13), (9, 13), (13, 9)];
const BACKGROUND: i32 = 28;

pub const MANIFEST_NAME: &str = "manifest.tsv";
pub const CASCADE_NAME: &str = "cascade.json";

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub clips: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            clips: DEFAULT_CLIPS,
            seed: 0,
        }
    }
}

/// One generated clip, before it is written out.
#[derive(Debug, Clone)]
pub struct SynthClip {
    pub id: String,
    pub label: Emotion,
    pub frames: FrameSequence,
    pub landmarks: LandmarkTrack,
    /// True face square per frame.
    pub rois: Vec<RoiBox>,
}

pub fn skin_group(label: usize) -> usize {
    label / 2
}

pub fn expression_level(label: usize) -> usize {
    label % 5
}

pub fn generate(config: &SynthConfig) -> Vec<SynthClip> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    (0..config.clips)
        .map(|i| generate_clip(i, &mut rng))
        .collect()
}

fn generate_clip(index: usize, rng: &mut ChaCha8Rng) -> SynthClip {
    let label = index % NUM_EMOTIONS;
    let group = skin_group(label) as f64;
    let level = expression_level(label) as f64;
    let t = rng.gen_range(MIN_FRAMES..=MAX_FRAMES);
    let (ox, oy) = FACE_OFFSETS[rng.gen_range(0..FACE_OFFSETS.len())];
    let base = [
        170.0 + 12.0 * group + rng.gen_range(-2.0..2.0),
        130.0 + 8.0 * group + rng.gen_range(-2.0..2.0),
        110.0 + 6.0 * group + rng.gen_range(-2.0..2.0),
    ];
    let phase = rng.gen_range(0.0..2.0 * PI);
    let period = rng.gen_range(6.0..10.0);

    let mut frames = Vec::with_capacity(t);
    let mut points = Vec::with_capacity(t);
    for step in 0..t {
        let pulse = 3.0 * (2.0 * PI * step as f64 / period + phase).sin();
        let face = [
            base[0] + 0.3 * pulse,
            base[1] + pulse,
            base[2] + 0.2 * pulse,
        ];
        let mut data = vec![0u8; FRAME_SIZE * FRAME_SIZE * 3];
        for y in 0..FRAME_SIZE {
            for x in 0..FRAME_SIZE {
                let inside = (ox..ox + FACE_SIZE).contains(&x) && (oy..oy + FACE_SIZE).contains(&y);
                let px = &mut data[3 * (y * FRAME_SIZE + x)..][..3];
                for (c, v) in px.iter_mut().enumerate() {
                    let value = if inside {
                        face[c].round() as i32 + rng.gen_range(-6..=6)
                    } else {
                        BACKGROUND + rng.gen_range(-3..=3)
                    };
                    *v = value.clamp(0, 255) as u8;
                }
            }
        }
        frames.push((FRAME_SIZE, FRAME_SIZE, data));
        points.push(face_landmarks(ox as f64, oy as f64, level, rng));
    }
    SynthClip {
        id: format!("clip{index:04}"),
        label: Emotion::from_index(label).expect("label below class count"),
        frames: FrameSequence::from_frames(frames).expect("frames share a shape"),
        landmarks: LandmarkTrack::new(points),
        rois: vec![RoiBox::new(ox, oy, FACE_SIZE, FACE_SIZE); t],
    }
}

/// 68-point layout in the usual jaw/brows/nose/eyes/mouth order, in pixels.
fn face_landmarks(
    ox: f64,
    oy: f64,
    level: f64,
    rng: &mut ChaCha8Rng,
) -> [[f64; 2]; LANDMARK_COUNT] {
    let s = FACE_SIZE as f64;
    let open = 1.2 * level;
    let raise = 0.8 * level;
    let mut unit = Vec::with_capacity(LANDMARK_COUNT);
    for k in 0..17 {
        let a = PI * k as f64 / 16.0;
        unit.push([0.5 - 0.42 * a.cos(), 0.45 + 0.5 * a.sin()]);
    }
    let mut brows = Vec::new();
    for side in [0.18, 0.58] {
        for k in 0..5 {
            let u = side + 0.06 * k as f64;
            brows.push([u, 0.3 - 0.04 * (PI * k as f64 / 4.0).sin() - raise / s]);
        }
    }
    unit.extend(brows);
    for k in 0..4 {
        unit.push([0.5, 0.38 + 0.07 * k as f64]);
    }
    for k in 0..5 {
        unit.push([0.4 + 0.05 * k as f64, 0.63]);
    }
    for cx in [0.3, 0.7] {
        for k in 0..6 {
            let a = 2.0 * PI * k as f64 / 6.0;
            unit.push([cx + 0.07 * a.cos(), 0.42 + 0.03 * a.sin()]);
        }
    }
    for (n, rx, ry) in [(12, 0.15, 0.05), (8, 0.1, 0.02)] {
        for k in 0..n {
            let a = 2.0 * PI * k as f64 / n as f64;
            unit.push([0.5 + rx * a.cos(), 0.78 + (ry + open / (2.0 * s)) * a.sin()]);
        }
    }
    debug_assert_eq!(unit.len(), LANDMARK_COUNT);
    let mut out = [[0.0; 2]; LANDMARK_COUNT];
    for (o, u) in out.iter_mut().zip(&unit) {
        *o = [
            ox + u[0] * s + rng.gen_range(-0.3..0.3),
            oy + u[1] * s + rng.gen_range(-0.3..0.3),
        ];
    }
    out
}

/// Writes clips, sidecars, `manifest.tsv` and the demo `cascade.json` under
/// `out`. Returns the manifest path.
pub fn write_dataset(out: &Path, clips: &[SynthClip]) -> Result<PathBuf, DataError> {
    let clip_dir = out.join("clips");
    std::fs::create_dir_all(&clip_dir).map_err(|source| DataError::Io {
        path: clip_dir.clone(),
        source,
    })?;
    let mut manifest = String::from("# id\tframes\tlabel\tsidecars\n");
    for clip in clips {
        let frames = format!("clips/{}.fseq", clip.id);
        let landmarks = format!("clips/{}.landmarks.csv", clip.id);
        let roi = format!("clips/{}.roi.csv", clip.id);
        write_fseq(&out.join(&frames), &clip.frames)?;
        write_landmark_track(&out.join(&landmarks), &clip.landmarks)?;
        write_roi_sidecar(&out.join(&roi), &clip.rois)?;
        manifest.push_str(&format!(
            "{}\t{frames}\t{}\tlandmarks={landmarks}\troi={roi}\n",
            clip.id, clip.label
        ));
    }
    let cascade = out.join(CASCADE_NAME);
    std::fs::write(&cascade, DEMO_CASCADE).map_err(|source| DataError::Io {
        path: cascade,
        source,
    })?;
    let path = out.join(MANIFEST_NAME);
    std::fs::write(&path, manifest).map_err(|source| DataError::Io {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}
