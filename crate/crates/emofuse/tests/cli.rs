use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use emofuse::dataio::{load_frames, load_manifest, load_roi_sidecar};
use emofuse::pipeline::{load_model, split_features, ModelKind, Part, RunConfig};
use emofuse::report::metrics_line;
use emofuse_core::evaluate::{compute_metrics, confusion_matrix};
use emofuse_core::fusion::{predict_late, FusionWeights};

fn emofuse(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_emofuse"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn synth(dir: &Path, clips: usize, seed: u64) -> PathBuf {
    let data = dir.join("data");
    let o = emofuse(&[
        "synth",
        "--out",
        data.to_str().unwrap(),
        "--clips",
        &clips.to_string(),
        "--seed",
        &seed.to_string(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    data.join("manifest.tsv")
}

#[test]
fn usage_errors_exit_2() {
    let o = emofuse(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("Usage"));

    let dir = tempfile::tempdir().unwrap();
    let manifest = synth(dir.path(), 3, 0);
    let m = manifest.to_str().unwrap();
    let out = dir.path().join("run");
    let out = out.to_str().unwrap();
    for bad in [
        vec![
            "train",
            "--manifest",
            m,
            "--out",
            out,
            "--split",
            "0.7,0.2,0.2",
        ],
        vec![
            "train",
            "--manifest",
            m,
            "--out",
            out,
            "--weights",
            "0.7,0.4",
        ],
        vec!["train", "--manifest", m, "--out", out, "--fusion", "fused"],
        vec!["extract", "--manifest", "/nonexistent.tsv", "--out", out],
    ] {
        let o = emofuse(&bad);
        assert_eq!(o.status.code(), Some(2), "{bad:?}: {}", stderr(&o));
    }
}

#[test]
fn missing_frames_names_the_clip() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth(dir.path(), 3, 0);
    let text = std::fs::read_to_string(&manifest).unwrap();
    std::fs::write(
        &manifest,
        text.replace("clips/clip0001.fseq", "clips/gone.fseq"),
    )
    .unwrap();
    let out = dir.path().join("run");
    let o = emofuse(&[
        "extract",
        "--manifest",
        manifest.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("clip0001"), "{err}");
    assert!(!err.contains("clip0000:"), "{err}");
}

#[test]
fn train_before_extract_fails_at_runtime() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth(dir.path(), 3, 0);
    let out = dir.path().join("run");
    let o = emofuse(&[
        "train",
        "--manifest",
        manifest.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("run extract first"));
}

#[test]
fn extract_matches_brute_force_means_and_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth(dir.path(), 3, 4);
    let out = dir.path().join("run");
    let args = [
        "extract",
        "--manifest",
        manifest.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--roi-sidecars",
    ];
    assert!(emofuse(&args).status.success());

    let entries = load_manifest(&manifest).unwrap().entries;
    let mut first = Vec::new();
    for e in &entries {
        let frames = load_frames(&e.frames_source).unwrap();
        let rois = load_roi_sidecar(e.roi_path.as_ref().unwrap()).unwrap();
        let cache =
            std::fs::read_to_string(out.join("cache").join(format!("{}.rppg", e.id))).unwrap();
        let rows: Vec<Vec<f64>> = cache
            .lines()
            .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
            .collect();
        assert_eq!(rows.len(), frames.frame_count());
        for (t, (row, roi)) in rows.iter().zip(&rois).enumerate() {
            let frame = frames.frame(t);
            for c in 0..3 {
                let mut sum = 0.0;
                for y in roi.y..roi.y + roi.h {
                    for x in roi.x..roi.x + roi.w {
                        sum += f64::from(frame.rgb(x, y)[c]);
                    }
                }
                let oracle = sum / (roi.w * roi.h) as f64;
                assert!((row[c] - oracle).abs() <= 1e-9, "{} t={t} c={c}", e.id);
            }
        }
        first.push(cache);
        assert!(out.join("cache").join(format!("{}.lmk", e.id)).is_file());
    }

    assert!(emofuse(&args).status.success());
    for (e, old) in entries.iter().zip(&first) {
        let again =
            std::fs::read_to_string(out.join("cache").join(format!("{}.rppg", e.id))).unwrap();
        assert_eq!(&again, old);
    }
}

#[test]
fn late_fusion_report_matches_direct_prediction() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth(dir.path(), 60, 2);
    let out = dir.path().join("run");
    let (m, o) = (manifest.to_str().unwrap(), out.to_str().unwrap());
    let common = [
        "--manifest",
        m,
        "--out",
        o,
        "--seed",
        "3",
        "--epochs",
        "4",
        "--hidden",
        "16",
        "--lr",
        "0.05",
    ];
    for (stage, extra) in [
        ("extract", &[][..]),
        ("train", &["--fusion", "late", "--weights", "0.6,0.4"][..]),
        (
            "evaluate",
            &["--fusion", "late", "--weights", "0.6,0.4"][..],
        ),
    ] {
        let mut args = vec![stage];
        args.extend(common);
        args.extend(extra);
        let r = emofuse(&args);
        assert!(r.status.success(), "{stage}: {}", stderr(&r));
    }
    let report = std::fs::read_to_string(out.join("report.txt")).unwrap();
    assert!(report.contains("\nweights,0.60,0.40\n"), "{report}");
    assert!(report.contains("config,weights,0.6,0.4"));

    let config = RunConfig {
        seed: 3,
        ..RunConfig::new(&manifest, &out)
    };
    let (test, layout) = split_features(&config, Part::Test).unwrap();
    assert_eq!(layout.weights, FusionWeights::new(0.6, 0.4).unwrap());
    let mr = load_model(&config, ModelKind::Rppg).unwrap();
    let mv = load_model(&config, ModelKind::Visual).unwrap();
    let preds: Vec<usize> = test
        .rppg
        .iter_rows()
        .zip(test.visual.iter_rows())
        .map(|(r, v)| {
            predict_late(&mr, &mv, layout.weights, r, v)
                .unwrap()
                .argmax()
        })
        .collect();
    let metrics = compute_metrics(&confusion_matrix(&preds, &test.labels, 10).unwrap());
    let expected = metrics_line("late", &metrics);
    let lines: Vec<&str> = report
        .lines()
        .filter(|l| l.starts_with("metrics,"))
        .collect();
    assert_eq!(lines, vec![expected.as_str()]);
}
