use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use emofuse::pipeline::{self, ModelKind, PipelineError, RoiSource, RunConfig};
use emofuse::report::{contribution_lines, metrics_line, pfi_lines};
use emofuse::synth::{self, SynthConfig};
use emofuse_core::facedetect::DetectParams;

/// Multimodal (rPPG + facial landmark) emotion classification pipeline.
#[derive(Debug, Parser)]
#[command(name = "emofuse", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic dataset with a manifest, sidecars and a cascade.
    Synth(SynthArgs),
    /// Detect faces and cache per-clip rPPG and landmark features.
    Extract(RunArgs),
    /// Fit the selected models on the training split.
    Train(RunArgs),
    /// Score the trained models on the test split.
    Evaluate(RunArgs),
    /// Permutation importance of each modality for the early-fusion model.
    Explain(RunArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = synth::DEFAULT_CLIPS)]
    clips: usize,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Train, validation and test fractions.
    #[arg(long, value_parser = parse_split, default_value = "0.7,0.15,0.15")]
    split: [f64; 3],
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, default_value_t = 0.001)]
    lr: f64,
    /// Hidden layer widths.
    #[arg(long, value_delimiter = ',', default_value = "512,256")]
    hidden: Vec<usize>,
    /// Identity skips between equal-width hidden layers of the visual model.
    #[arg(long)]
    visual_residual: bool,
    /// Models to train and score: any of rppg, visual, early, late.
    #[arg(long, value_delimiter = ',', value_parser = parse_model, default_value = "rppg,visual,late,early")]
    fusion: Vec<ModelKind>,
    /// Late-fusion weights w1,w2 for rPPG and visual.
    #[arg(long, value_parser = parse_weights, conflicts_with = "tune_step")]
    weights: Option<(f64, f64)>,
    /// Grid step for tuning late-fusion weights on the validation split.
    #[arg(long)]
    tune_step: Option<f64>,
    #[arg(long, default_value_t = 5)]
    pfi_repeats: usize,
    /// Haar cascade JSON; the built-in demo cascade is used otherwise.
    #[arg(long, conflicts_with = "roi_sidecars")]
    cascade: Option<PathBuf>,
    /// Take face boxes from the manifest's roi= sidecars instead of detecting.
    #[arg(long)]
    roi_sidecars: bool,
    #[arg(long, default_value_t = 1.25)]
    scale_factor: f64,
    /// Detector stride as a fraction of the window width.
    #[arg(long, default_value_t = 0.1)]
    stride: f64,
    /// Store landmarks relative to the face box instead of in pixels.
    #[arg(long)]
    normalize_landmarks: bool,
    /// Feed padded features to the networks without z-scoring.
    #[arg(long)]
    no_standardize: bool,
}

fn parse_floats<const N: usize>(s: &str) -> Result<[f64; N], String> {
    let values: Vec<f64> = s
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| format!("{v:?}: {e}")))
        .collect::<Result<_, _>>()?;
    values
        .try_into()
        .map_err(|v: Vec<f64>| format!("expected {N} comma-separated numbers, got {}", v.len()))
}

fn parse_split(s: &str) -> Result<[f64; 3], String> {
    parse_floats::<3>(s)
}

fn parse_weights(s: &str) -> Result<(f64, f64), String> {
    parse_floats::<2>(s).map(|[a, b]| (a, b))
}

fn parse_model(s: &str) -> Result<ModelKind, String> {
    ModelKind::from_name(s)
        .ok_or_else(|| format!("unknown model {s:?}; expected rppg, visual, early or late"))
}

impl RunArgs {
    fn to_config(&self) -> RunConfig {
        let mut fusion = self.fusion.clone();
        fusion.sort();
        fusion.dedup();
        let roi = match (&self.cascade, self.roi_sidecars) {
            (_, true) => RoiSource::Sidecars,
            (Some(p), false) => RoiSource::Cascade(p.clone()),
            (None, false) => RoiSource::DemoCascade,
        };
        RunConfig {
            seed: self.seed,
            split: self.split,
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.lr,
            hidden: self.hidden.clone(),
            visual_residual: self.visual_residual,
            fusion,
            weights: self.weights,
            tune_step: self.tune_step,
            pfi_repeats: self.pfi_repeats,
            roi,
            detect: DetectParams {
                scale_factor: self.scale_factor,
                stride_fraction: self.stride,
            },
            normalize_landmarks: self.normalize_landmarks,
            standardize: !self.no_standardize,
            ..RunConfig::new(&self.manifest, &self.out)
        }
    }
}

fn synthesize(args: SynthArgs) -> Result<(), PipelineError> {
    let clips = synth::generate(&SynthConfig {
        clips: args.clips,
        seed: args.seed,
    });
    let manifest = synth::write_dataset(&args.out, &clips)?;
    println!(
        "wrote {} clips; manifest {}",
        clips.len(),
        manifest.display()
    );
    Ok(())
}

fn dispatch(command: Command) -> Result<(), PipelineError> {
    let args = match command {
        Command::Synth(args) => return synthesize(args),
        Command::Extract(ref a)
        | Command::Train(ref a)
        | Command::Evaluate(ref a)
        | Command::Explain(ref a) => a,
    };
    let config = args.to_config();
    config.validate()?;
    match command {
        Command::Extract(_) => {
            let s = pipeline::extract(&config)?;
            println!(
                "extracted {} clips ({} with landmarks)",
                s.clips, s.with_landmarks
            );
        }
        Command::Train(_) => {
            for (kind, acc) in pipeline::train_models(&config)?.train_accuracy {
                println!("{kind}: final training accuracy {acc:.4}");
            }
        }
        Command::Evaluate(_) => {
            for (kind, m) in pipeline::evaluate(&config)? {
                println!("{}", metrics_line(kind.name(), &m));
            }
        }
        Command::Explain(_) => {
            let r = pipeline::explain(&config)?;
            for line in pfi_lines(&r).iter().chain(&contribution_lines(&r)) {
                println!("{line}");
            }
        }
        Command::Synth(_) => unreachable!("handled above"),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
