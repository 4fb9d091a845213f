//! The batch stages behind the CLI: extract, train, evaluate and explain.
//!
//! Every stage reads the manifest, works under one output directory and
//! merges its results into `report.txt`:
//!
//! ```text
//! <out>/cache/<id>.rppg, <id>.lmk      extract
//! <out>/models/{rppg,visual,early}.fem  train
//! <out>/models/layout.txt              train (padding lengths, fusion weights)
//! <out>/models/scaler.txt              train (column standardization)
//! <out>/logs/<model>.log               train (epoch,loss,accuracy)
//! <out>/report.txt                     every stage
//! ```

use std::fmt;
use std::path::{Path, PathBuf};

use emofuse_core::classifier::{init_network, train, ClassifierError, TrainConfig, DEFAULT_HIDDEN};
use emofuse_core::evaluate::{compute_metrics, confusion_matrix, EvalError, Metrics};
use emofuse_core::facedetect::{detect_sequence, DetectError, DetectParams, HaarCascade};
use emofuse_core::fusion::{combine_late, tune_weights, FusionError, FusionWeights};
use emofuse_core::interpret::{explain_modalities, InterpretError, PfiReport, DEFAULT_REPEATS};
use emofuse_core::signals::{
    extract_rppg, normalize_landmarks, zero_pad, ColumnScaler, SignalError,
};
use emofuse_core::{ClassProbabilities, Matrix, MlpModel, NUM_EMOTIONS};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::dataio::{
    load_cascade, load_frames, load_landmark_track, load_manifest, load_roi_sidecar, parse_cascade,
    persist_model, read_rppg_cache, restore_model, write_landmark_track, write_rppg_cache,
    ClipEntry, DataError, DatasetManifest, DEMO_CASCADE, LANDMARK_CACHE_EXT, RPPG_CACHE_EXT,
};
use crate::report::{contribution_lines, metrics_line, pfi_lines, update_report, weights_line};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Detect(#[from] DetectError),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error(transparent)]
    Fusion(#[from] FusionError),
    #[error(transparent)]
    Interpret(#[from] InterpretError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("clip {id}: {source}")]
    Clip {
        id: String,
        #[source]
        source: Box<PipelineError>,
    },
    #[error("no roi= sidecar in the manifest")]
    MissingRoiSidecar,
    #[error("{failed} of {total} clips failed to extract; first: {first}")]
    ExtractFailed {
        failed: usize,
        total: usize,
        first: String,
    },
    #[error("clip {id}: missing cache file {path}; run extract first")]
    MissingCache { id: String, path: PathBuf },
    #[error("missing {path}; run train first")]
    MissingArtifact { path: PathBuf },
    #[error("{path}: {reason}")]
    Artifact { path: PathBuf, reason: String },
    #[error("the {split} split is empty")]
    EmptySplit { split: &'static str },
}

impl PipelineError {
    /// 2 for configuration problems, 1 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            _ => 1,
        }
    }
}

/// Models the pipeline can train and score, in report order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ModelKind {
    Rppg,
    Visual,
    Late,
    Early,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::Rppg,
        ModelKind::Visual,
        ModelKind::Late,
        ModelKind::Early,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Rppg => "rppg",
            ModelKind::Visual => "visual",
            ModelKind::Late => "late",
            ModelKind::Early => "early",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Where per-frame face boxes come from during extraction.
#[derive(Debug, Clone, PartialEq)]
pub enum RoiSource {
    /// The built-in demo cascade.
    DemoCascade,
    Cascade(PathBuf),
    /// `roi=` sidecars named in the manifest.
    Sidecars,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub manifest: PathBuf,
    pub out: PathBuf,
    pub seed: u64,
    /// Train, validation, test fractions.
    pub split: [f64; 3],
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub hidden: Vec<usize>,
    /// Identity skips between equal-width hidden layers of the visual model.
    pub visual_residual: bool,
    pub fusion: Vec<ModelKind>,
    pub weights: Option<(f64, f64)>,
    pub tune_step: Option<f64>,
    pub pfi_repeats: usize,
    pub roi: RoiSource,
    pub detect: DetectParams,
    pub normalize_landmarks: bool,
    pub standardize: bool,
}

impl RunConfig {
    pub fn new(manifest: impl Into<PathBuf>, out: impl Into<PathBuf>) -> Self {
        let train = TrainConfig::default();
        RunConfig {
            manifest: manifest.into(),
            out: out.into(),
            seed: 0,
            split: [0.7, 0.15, 0.15],
            epochs: train.epochs,
            batch_size: train.batch_size,
            learning_rate: train.learning_rate,
            hidden: DEFAULT_HIDDEN.to_vec(),
            visual_residual: false,
            fusion: ModelKind::ALL.to_vec(),
            weights: None,
            tune_step: None,
            pfi_repeats: DEFAULT_REPEATS,
            roi: RoiSource::DemoCascade,
            detect: DetectParams::default(),
            normalize_landmarks: false,
            standardize: true,
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |msg: String| Err(PipelineError::Config(msg));
        if self.split.iter().any(|r| r.is_nan() || *r <= 0.0) {
            return bad(format!(
                "split ratios must be positive, got {:?}",
                self.split
            ));
        }
        if (self.split.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return bad(format!("split ratios must sum to 1, got {:?}", self.split));
        }
        self.train_config(0)
            .validate()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        if self.hidden.contains(&0) {
            return bad("hidden layer widths must be positive".into());
        }
        if self.fusion.is_empty() {
            return bad("no models selected".into());
        }
        if let Some((w1, w2)) = self.weights {
            FusionWeights::new(w1, w2).map_err(|e| PipelineError::Config(e.to_string()))?;
            if self.tune_step.is_some() {
                return bad("give either fusion weights or a tune step, not both".into());
            }
        }
        if let Some(step) = self.tune_step {
            if !(step > 0.0 && step <= 0.5) {
                return bad(format!("tune step must lie in (0, 0.5], got {step}"));
            }
        }
        if self.pfi_repeats == 0 {
            return bad("pfi repeats must be at least 1".into());
        }
        self.detect
            .validate()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        if !self.manifest.is_file() {
            return bad(format!(
                "manifest {} does not exist",
                self.manifest.display()
            ));
        }
        if let RoiSource::Cascade(p) = &self.roi {
            if !p.is_file() {
                return bad(format!("cascade {} does not exist", p.display()));
            }
        }
        Ok(())
    }

    fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            seed,
            shuffle: true,
        }
    }

    fn has(&self, kind: ModelKind) -> bool {
        self.fusion.contains(&kind)
    }

    /// `config,<key>,<value>` lines. Paths are echoed by file name so that
    /// runs in different directories report identically.
    pub fn echo(&self) -> Vec<String> {
        let file_name = |p: &Path| {
            p.file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default()
        };
        let join = |v: &mut dyn Iterator<Item = String>| v.collect::<Vec<_>>().join(",");
        let mut lines = vec![
            format!("config,manifest,{}", file_name(&self.manifest)),
            format!("config,seed,{}", self.seed),
            format!(
                "config,split,{}",
                join(&mut self.split.iter().map(f64::to_string))
            ),
            format!("config,epochs,{}", self.epochs),
            format!("config,batch_size,{}", self.batch_size),
            format!("config,lr,{}", self.learning_rate),
            format!(
                "config,hidden,{}",
                join(&mut self.hidden.iter().map(usize::to_string))
            ),
            format!("config,visual_residual,{}", self.visual_residual),
            format!(
                "config,fusion,{}",
                join(&mut self.fusion.iter().map(|k| k.name().to_owned()))
            ),
        ];
        match (self.weights, self.tune_step) {
            (Some((w1, w2)), _) => lines.push(format!("config,weights,{w1},{w2}")),
            (None, Some(step)) => lines.push(format!("config,tune_step,{step}")),
            (None, None) => lines.push("config,weights,default".into()),
        }
        lines.push(format!("config,pfi_repeats,{}", self.pfi_repeats));
        lines.push(match &self.roi {
            RoiSource::DemoCascade => "config,roi,demo-cascade".into(),
            RoiSource::Cascade(p) => format!("config,roi,cascade:{}", file_name(p)),
            RoiSource::Sidecars => "config,roi,sidecars".into(),
        });
        lines.push(format!(
            "config,detect,{},{}",
            self.detect.scale_factor, self.detect.stride_fraction
        ));
        lines.push(format!(
            "config,normalize_landmarks,{}",
            self.normalize_landmarks
        ));
        lines.push(format!("config,standardize,{}", self.standardize));
        lines
    }

    fn cache_dir(&self) -> PathBuf {
        self.out.join("cache")
    }

    fn model_dir(&self) -> PathBuf {
        self.out.join("models")
    }

    fn cache_path(&self, id: &str, ext: &str) -> PathBuf {
        self.cache_dir().join(format!("{id}.{ext}"))
    }

    fn model_path(&self, kind: ModelKind) -> PathBuf {
        self.model_dir().join(format!("{}.fem", kind.name()))
    }

    /// Init and shuffle seed of each trained network.
    fn model_seed(&self, kind: ModelKind) -> u64 {
        let offset = match kind {
            ModelKind::Rppg => 1,
            ModelKind::Visual => 2,
            ModelKind::Early | ModelKind::Late => 3,
        };
        self.seed.wrapping_add(offset)
    }
}

fn create_dir(path: &Path) -> Result<(), PipelineError> {
    std::fs::create_dir_all(path).map_err(|source| {
        PipelineError::Data(DataError::Io {
            path: path.to_owned(),
            source,
        })
    })
}

// ---------------------------------------------------------------- extract

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtractSummary {
    pub clips: usize,
    pub with_landmarks: usize,
}

/// Writes the rPPG cache (and landmark cache where a sidecar exists) of every
/// clip. Clips run in parallel; each failure is logged with its clip id.
pub fn extract(config: &RunConfig) -> Result<ExtractSummary, PipelineError> {
    let manifest = load_manifest(&config.manifest)?;
    let cascade = match &config.roi {
        RoiSource::DemoCascade => Some(parse_cascade(DEMO_CASCADE, Path::new("<demo>"))?),
        RoiSource::Cascade(p) => Some(load_cascade(p)?),
        RoiSource::Sidecars => None,
    };
    create_dir(&config.cache_dir())?;
    let results: Vec<Result<bool, PipelineError>> = manifest
        .entries
        .par_iter()
        .map(|entry| {
            extract_clip(config, entry, cascade.as_ref()).map_err(|e| PipelineError::Clip {
                id: entry.id.clone(),
                source: Box::new(e),
            })
        })
        .collect();
    let total = results.len();
    let mut with_landmarks = 0;
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(lmk) => with_landmarks += usize::from(lmk),
            Err(e) => {
                log::error!("{e}");
                failures.push(e);
            }
        }
    }
    if let Some(first) = failures.first() {
        return Err(PipelineError::ExtractFailed {
            failed: failures.len(),
            total,
            first: first.to_string(),
        });
    }
    log::info!("extracted {total} clips ({with_landmarks} with landmarks)");
    Ok(ExtractSummary {
        clips: total,
        with_landmarks,
    })
}

fn extract_clip(
    config: &RunConfig,
    entry: &ClipEntry,
    cascade: Option<&HaarCascade>,
) -> Result<bool, PipelineError> {
    let frames = load_frames(&entry.frames_source)?;
    let rois = match cascade {
        Some(c) => detect_sequence(&frames, c, &config.detect)?,
        None => {
            let path = entry
                .roi_path
                .as_ref()
                .ok_or(PipelineError::MissingRoiSidecar)?;
            load_roi_sidecar(path)?
        }
    };
    let rppg = extract_rppg(&frames, &rois)?;
    write_rppg_cache(&config.cache_path(&entry.id, RPPG_CACHE_EXT), &rppg)?;
    let lmk_cache = config.cache_path(&entry.id, LANDMARK_CACHE_EXT);
    match &entry.landmarks_path {
        Some(path) => {
            let mut track = load_landmark_track(path, frames.frame_count())?;
            if config.normalize_landmarks {
                track = normalize_landmarks(&track, &rois)?;
            }
            write_landmark_track(&lmk_cache, &track)?;
            Ok(true)
        }
        None => {
            // A stale copy from an earlier manifest would otherwise be picked up.
            if lmk_cache.exists() {
                std::fs::remove_file(&lmk_cache).map_err(|source| DataError::Io {
                    path: lmk_cache.clone(),
                    source,
                })?;
            }
            Ok(false)
        }
    }
}

// --------------------------------------------------------------- datasets

/// Flattened per-clip features read back from the caches.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub ids: Vec<String>,
    pub labels: Vec<usize>,
    pub rppg: Vec<Vec<f64>>,
    /// Empty for clips without landmarks.
    pub visual: Vec<Vec<f64>>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

pub fn load_dataset(
    config: &RunConfig,
    manifest: &DatasetManifest,
) -> Result<Dataset, PipelineError> {
    let loaded: Vec<(Vec<f64>, Vec<f64>)> = manifest
        .entries
        .par_iter()
        .map(|entry| {
            let rppg_path = config.cache_path(&entry.id, RPPG_CACHE_EXT);
            if !rppg_path.is_file() {
                return Err(PipelineError::MissingCache {
                    id: entry.id.clone(),
                    path: rppg_path,
                });
            }
            let rppg = read_rppg_cache(&rppg_path)?;
            let visual = match entry.landmarks_path {
                Some(_) => {
                    let path = config.cache_path(&entry.id, LANDMARK_CACHE_EXT);
                    if !path.is_file() {
                        return Err(PipelineError::MissingCache {
                            id: entry.id.clone(),
                            path,
                        });
                    }
                    load_landmark_track(&path, rppg.len())?.flatten()
                }
                None => Vec::new(),
            };
            Ok((rppg.flatten(), visual))
        })
        .collect::<Result<_, _>>()?;
    let (rppg, visual) = loaded.into_iter().unzip();
    Ok(Dataset {
        ids: manifest.entries.iter().map(|e| e.id.clone()).collect(),
        labels: manifest.entries.iter().map(|e| e.label.index()).collect(),
        rppg,
        visual,
    })
}

/// Clip indices of each partition, each in manifest order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Seeded shuffle of `0..n`, then slices of `round(r·n)` for train and
/// validation; the test split takes the rest.
pub fn split_indices(n: usize, ratios: [f64; 3], seed: u64) -> Split {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = ((ratios[0] * n as f64).round() as usize).min(n);
    let n_val = ((ratios[1] * n as f64).round() as usize).min(n - n_train);
    let part = |range: std::ops::Range<usize>| {
        let mut v = order[range].to_vec();
        v.sort_unstable();
        v
    };
    Split {
        train: part(0..n_train),
        val: part(n_train..n_train + n_val),
        test: part(n_train + n_val..n),
    }
}

/// Everything fitted on the training split that evaluation must reuse.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub rppg_len: usize,
    pub visual_len: usize,
    pub weights: FusionWeights,
    /// Over the concatenated `[rppg | visual]` columns.
    pub scaler: ColumnScaler,
}

const LAYOUT_NAME: &str = "layout.txt";
const SCALER_NAME: &str = "scaler.txt";

impl Layout {
    fn rppg_scaler(&self) -> ColumnScaler {
        self.scaler.slice(0..self.rppg_len)
    }

    fn visual_scaler(&self) -> ColumnScaler {
        self.scaler
            .slice(self.rppg_len..self.rppg_len + self.visual_len)
    }

    fn write(&self, dir: &Path) -> Result<(), PipelineError> {
        let text = format!(
            "rppg_len,{}\nvisual_len,{}\nweights,{},{}\n",
            self.rppg_len,
            self.visual_len,
            self.weights.rppg(),
            self.weights.visual()
        );
        write_text(&dir.join(LAYOUT_NAME), &text)?;
        let row = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
        write_text(
            &dir.join(SCALER_NAME),
            &format!("{}\n{}\n", row(&self.scaler.mean), row(&self.scaler.scale)),
        )
    }

    fn read(dir: &Path) -> Result<Self, PipelineError> {
        let path = dir.join(LAYOUT_NAME);
        let text = read_artifact(&path)?;
        let bad = |reason: &str| PipelineError::Artifact {
            path: path.clone(),
            reason: reason.to_owned(),
        };
        let mut rppg_len = None;
        let mut visual_len = None;
        let mut weights = None;
        for line in text.lines() {
            let fields: Vec<&str> = line.split(',').collect();
            match fields.as_slice() {
                ["rppg_len", v] => rppg_len = v.parse().ok(),
                ["visual_len", v] => visual_len = v.parse().ok(),
                ["weights", a, b] => {
                    let (a, b) = (
                        a.parse().map_err(|_| bad("bad weight"))?,
                        b.parse().map_err(|_| bad("bad weight"))?,
                    );
                    weights = Some(FusionWeights::new(a, b).map_err(|e| bad(&e.to_string()))?);
                }
                _ => return Err(bad("unrecognized line")),
            }
        }
        let (rppg_len, visual_len, weights) = match (rppg_len, visual_len, weights) {
            (Some(r), Some(v), Some(w)) => (r, v, w),
            _ => return Err(bad("incomplete layout")),
        };

        let spath = dir.join(SCALER_NAME);
        let text = read_artifact(&spath)?;
        let rows = crate::dataio::parse_numeric_rows(&text, &spath, rppg_len + visual_len)?;
        if rows.len() != 2 {
            return Err(PipelineError::Artifact {
                path: spath,
                reason: "expected a mean row and a scale row".into(),
            });
        }
        let mut rows = rows.into_iter();
        let scaler = ColumnScaler {
            mean: rows.next().unwrap(),
            scale: rows.next().unwrap(),
        };
        Ok(Layout {
            rppg_len,
            visual_len,
            weights,
            scaler,
        })
    }
}

fn read_artifact(path: &Path) -> Result<String, PipelineError> {
    if !path.is_file() {
        return Err(PipelineError::MissingArtifact {
            path: path.to_owned(),
        });
    }
    Ok(crate::dataio::read_text(path)?)
}

fn write_text(path: &Path, text: &str) -> Result<(), PipelineError> {
    std::fs::write(path, text).map_err(|source| {
        PipelineError::Data(DataError::Io {
            path: path.to_owned(),
            source,
        })
    })
}

/// Padded (and scaled) model inputs for one set of clips.
#[derive(Debug, Clone)]
pub struct Features {
    pub rppg: Matrix,
    pub visual: Matrix,
    /// `[rppg | visual]`, the early-fusion input.
    pub early: Matrix,
    pub labels: Vec<usize>,
}

impl Features {
    fn build(ds: &Dataset, idx: &[usize], layout: &Layout) -> Features {
        let pad = |values: &[Vec<f64>], len: usize, what: &str| -> Vec<Vec<f64>> {
            idx.iter()
                .map(|&i| {
                    let p = zero_pad(&values[i], len);
                    if p.truncated {
                        log::warn!(
                            "clip {}: {what} features truncated from {} to {len}",
                            ds.ids[i],
                            p.original_length
                        );
                    }
                    p.values
                })
                .collect()
        };
        let mut rppg = to_matrix(pad(&ds.rppg, layout.rppg_len, "rppg"), layout.rppg_len);
        let mut visual = to_matrix(
            pad(&ds.visual, layout.visual_len, "visual"),
            layout.visual_len,
        );
        layout.rppg_scaler().apply(&mut rppg);
        layout.visual_scaler().apply(&mut visual);
        let rows: Vec<Vec<f64>> = rppg
            .iter_rows()
            .zip(visual.iter_rows())
            .map(|(r, v)| [r, v].concat())
            .collect();
        let early = to_matrix(rows, layout.rppg_len + layout.visual_len);
        Features {
            rppg,
            visual,
            early,
            labels: idx.iter().map(|&i| ds.labels[i]).collect(),
        }
    }

    pub fn matrix(&self, kind: ModelKind) -> &Matrix {
        match kind {
            ModelKind::Rppg => &self.rppg,
            ModelKind::Visual => &self.visual,
            ModelKind::Early | ModelKind::Late => &self.early,
        }
    }
}

fn to_matrix(rows: Vec<Vec<f64>>, width: usize) -> Matrix {
    let n = rows.len();
    Matrix::from_vec(n, width, rows.concat()).expect("rows are padded to width")
}

/// Loads manifest and caches and splits them.
fn prepare(config: &RunConfig) -> Result<(Dataset, Split), PipelineError> {
    let manifest = load_manifest(&config.manifest)?;
    let ds = load_dataset(config, &manifest)?;
    let split = split_indices(ds.len(), config.split, config.seed);
    if split.train.is_empty() {
        return Err(PipelineError::EmptySplit { split: "train" });
    }
    Ok((ds, split))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    Train,
    Validation,
    Test,
}

/// Model inputs of one split partition, prepared exactly as evaluation
/// prepares them, plus the fitted layout. Needs a finished `train`.
pub fn split_features(config: &RunConfig, part: Part) -> Result<(Features, Layout), PipelineError> {
    let (ds, split) = prepare(config)?;
    let layout = Layout::read(&config.model_dir())?;
    let idx = match part {
        Part::Train => &split.train,
        Part::Validation => &split.val,
        Part::Test => &split.test,
    };
    Ok((Features::build(&ds, idx, &layout), layout))
}

/// A trained network from `<out>/models`.
pub fn load_model(config: &RunConfig, kind: ModelKind) -> Result<MlpModel, PipelineError> {
    restore(config, kind)
}

// ------------------------------------------------------------------ train

/// Networks that must exist for the selected models.
fn networks(config: &RunConfig) -> Vec<ModelKind> {
    let mut out = Vec::new();
    if config.has(ModelKind::Rppg) || config.has(ModelKind::Late) {
        out.push(ModelKind::Rppg);
    }
    if config.has(ModelKind::Visual) || config.has(ModelKind::Late) {
        out.push(ModelKind::Visual);
    }
    if config.has(ModelKind::Early) {
        out.push(ModelKind::Early);
    }
    out
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub layout: Layout,
    /// Final-epoch training accuracy per network.
    pub train_accuracy: Vec<(ModelKind, f64)>,
}

pub fn train_models(config: &RunConfig) -> Result<TrainSummary, PipelineError> {
    let (ds, split) = prepare(config)?;
    let rppg_len = split
        .train
        .iter()
        .map(|&i| ds.rppg[i].len())
        .max()
        .unwrap_or(0);
    let visual_len = split
        .train
        .iter()
        .map(|&i| ds.visual[i].len())
        .max()
        .unwrap_or(0);
    if rppg_len == 0 {
        return Err(PipelineError::EmptySplit { split: "train" });
    }
    let mut layout = Layout {
        rppg_len,
        visual_len,
        weights: FusionWeights::default(),
        scaler: ColumnScaler::identity(rppg_len + visual_len),
    };
    if config.standardize {
        let raw = Features::build(&ds, &split.train, &layout);
        layout.scaler = ColumnScaler::fit(&raw.early).expect("train split is nonempty");
    }
    let train_set = Features::build(&ds, &split.train, &layout);

    let model_dir = config.model_dir();
    let log_dir = config.out.join("logs");
    create_dir(&model_dir)?;
    create_dir(&log_dir)?;

    let mut train_accuracy = Vec::new();
    let mut trained = Vec::new();
    for kind in networks(config) {
        let x = train_set.matrix(kind);
        if x.cols() == 0 {
            return Err(PipelineError::Config(format!(
                "the {kind} model has no input features; does the manifest list landmarks?"
            )));
        }
        let mut sizes = vec![x.cols()];
        sizes.extend(&config.hidden);
        sizes.push(NUM_EMOTIONS);
        let skips = if kind == ModelKind::Visual && config.visual_residual {
            vec![true; config.hidden.len()]
        } else {
            Vec::new()
        };
        let seed = config.model_seed(kind);
        let init = init_network(&sizes, &skips, seed)?;
        log::info!("training {kind} model {sizes:?} on {} clips", x.rows());
        let outcome = train(&init, x, &train_set.labels, &config.train_config(seed))?;
        let log: String = outcome
            .history
            .iter()
            .map(|s| format!("{},{},{}\n", s.epoch, s.loss, s.accuracy))
            .collect();
        write_text(&log_dir.join(format!("{}.log", kind.name())), &log)?;
        persist_model(&config.model_path(kind), &outcome.model)?;
        let last = outcome.history.last().map_or(0.0, |s| s.accuracy);
        train_accuracy.push((kind, last));
        trained.push((kind, outcome.model));
    }

    let mut report = vec![("config", config.echo())];
    if config.has(ModelKind::Late) {
        layout.weights = match (config.weights, config.tune_step) {
            (Some((w1, w2)), _) => FusionWeights::new(w1, w2)?,
            (None, Some(step)) => {
                if split.val.is_empty() {
                    return Err(PipelineError::EmptySplit {
                        split: "validation",
                    });
                }
                let val = Features::build(&ds, &split.val, &layout);
                let model = |k| &trained.iter().find(|(t, _)| *t == k).expect("trained").1;
                let pr = probabilities(model(ModelKind::Rppg), &val.rppg)?;
                let pv = probabilities(model(ModelKind::Visual), &val.visual)?;
                let tuned = tune_weights(&pr, &pv, &val.labels, step)?;
                log::info!(
                    "tuned late-fusion weights ({}, {}) with validation accuracy {:.4}",
                    tuned.weights.rppg(),
                    tuned.weights.visual(),
                    tuned.accuracy
                );
                tuned.weights
            }
            (None, None) => FusionWeights::default(),
        };
        report.push((
            "weights",
            vec![weights_line(layout.weights.rppg(), layout.weights.visual())],
        ));
    }
    layout.write(&model_dir)?;
    update_report(&config.out, &report)?;
    Ok(TrainSummary {
        layout,
        train_accuracy,
    })
}

fn probabilities(model: &MlpModel, x: &Matrix) -> Result<Vec<ClassProbabilities>, PipelineError> {
    let rows: Vec<&[f64]> = x.iter_rows().collect();
    Ok(rows
        .par_iter()
        .map(|r| model.forward(r))
        .collect::<Result<Vec<_>, _>>()?)
}

fn restore(config: &RunConfig, kind: ModelKind) -> Result<MlpModel, PipelineError> {
    let path = config.model_path(kind);
    if !path.is_file() {
        return Err(PipelineError::MissingArtifact { path });
    }
    Ok(restore_model(&path)?)
}

// --------------------------------------------------------------- evaluate

/// Test-split metrics of every selected model, in report order.
pub fn evaluate(config: &RunConfig) -> Result<Vec<(ModelKind, Metrics)>, PipelineError> {
    let (ds, split) = prepare(config)?;
    if split.test.is_empty() {
        return Err(PipelineError::EmptySplit { split: "test" });
    }
    let layout = Layout::read(&config.model_dir())?;
    let test = Features::build(&ds, &split.test, &layout);
    let mut kinds = config.fusion.clone();
    kinds.sort();
    kinds.dedup();

    let mut cache: Vec<(ModelKind, Vec<ClassProbabilities>)> = Vec::new();
    let mut probs_of = |kind: ModelKind| -> Result<Vec<ClassProbabilities>, PipelineError> {
        if let Some((_, p)) = cache.iter().find(|(k, _)| *k == kind) {
            return Ok(p.clone());
        }
        let p = probabilities(&restore(config, kind)?, test.matrix(kind))?;
        cache.push((kind, p.clone()));
        Ok(p)
    };

    let mut results = Vec::new();
    for kind in kinds {
        let probs = match kind {
            ModelKind::Late => {
                let pr = probs_of(ModelKind::Rppg)?;
                let pv = probs_of(ModelKind::Visual)?;
                pr.iter()
                    .zip(&pv)
                    .map(|(a, b)| combine_late(a, b, layout.weights))
                    .collect::<Result<Vec<_>, _>>()?
            }
            k => probs_of(k)?,
        };
        let preds: Vec<usize> = probs.iter().map(ClassProbabilities::argmax).collect();
        let metrics = compute_metrics(&confusion_matrix(&preds, &test.labels, NUM_EMOTIONS)?);
        log::info!("{kind}: test accuracy {:.4}", metrics.accuracy);
        results.push((kind, metrics));
    }
    let mut report = vec![
        ("config", config.echo()),
        (
            "metrics",
            results
                .iter()
                .map(|(k, m)| metrics_line(k.name(), m))
                .collect(),
        ),
    ];
    if config.has(ModelKind::Late) {
        report.push((
            "weights",
            vec![weights_line(layout.weights.rppg(), layout.weights.visual())],
        ));
    }
    update_report(&config.out, &report)?;
    Ok(results)
}

// ---------------------------------------------------------------- explain

/// Permutation importance of each modality block for the early-fusion model
/// on the test split.
pub fn explain(config: &RunConfig) -> Result<PfiReport, PipelineError> {
    let (ds, split) = prepare(config)?;
    if split.test.is_empty() {
        return Err(PipelineError::EmptySplit { split: "test" });
    }
    let layout = Layout::read(&config.model_dir())?;
    let test = Features::build(&ds, &split.test, &layout);
    let model = restore(config, ModelKind::Early)?;
    let report = explain_modalities(
        &model,
        &test.early,
        &test.labels,
        0..layout.rppg_len,
        layout.rppg_len..layout.rppg_len + layout.visual_len,
        config.pfi_repeats,
        config.seed,
    )?;
    if report.contributions.degenerate {
        log::warn!("neither modality block changes accuracy; contributions default to 50/50");
    }
    update_report(
        &config.out,
        &[
            ("config", config.echo()),
            ("pfi", pfi_lines(&report)),
            ("contribution", contribution_lines(&report)),
        ],
    )?;
    Ok(report)
}
