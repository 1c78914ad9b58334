use std::path::Path;
use std::process::{Command, Output};

use axmag_core::datagen::procedural_texture;
use axmag_core::frame::{load_sequence, save_sequence, translate_bilinear};
use axmag_core::{rng, Boundary, Frame, MagnificationSpec};
use axmag_msm::{Model, ModelConfig};

fn axmag(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_axmag")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn small_clip(dir: &Path, frames: usize) -> Vec<Frame> {
    let base = procedural_texture(&mut rng::seeded(9), 48, 48);
    let clip: Vec<Frame> = (0..frames)
        .map(|t| {
            translate_bilinear(&base, 0.3 * t as f64, 0.0, Boundary::Reflect)
                .unwrap()
                .crop(8, 8, 32, 32)
                .unwrap()
        })
        .collect();
    save_sequence(&clip, dir).unwrap();
    load_sequence(dir).unwrap()
}

#[test]
fn every_subcommand_has_help() {
    for sub in ["magnify", "datagen", "train", "eval", "track", "physical"] {
        let o = axmag(&[sub, "--help"]);
        assert_eq!(o.status.code(), Some(0), "{sub}");
        assert!(stdout(&o).contains("Usage"), "{sub}");
    }
    assert_eq!(axmag(&["--help"]).status.code(), Some(0));
}

#[test]
fn bad_usage_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in");
    small_clip(&input, 2);
    let o = axmag(&[
        "magnify",
        "--input",
        input.to_str().unwrap(),
        "--output",
        dir.path().join("out").to_str().unwrap(),
        "--method",
        "axial-phase",
        "--alpha",
        "5",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--angle"), "{}", stderr(&o));

    let o = axmag(&["magnify", "--alpha", "5"]);
    assert_eq!(o.status.code(), Some(2));
    let o = axmag(&["physical", "--freq", "nope"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_input_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let o = axmag(&[
        "magnify",
        "--input",
        dir.path().join("absent").to_str().unwrap(),
        "--output",
        dir.path().join("out").to_str().unwrap(),
        "--method",
        "phase",
        "--alpha",
        "5",
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn classical_magnify_writes_every_frame() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in");
    let out = dir.path().join("out");
    let clip = small_clip(&input, 4);
    let o = axmag(&[
        "magnify",
        "--input",
        input.to_str().unwrap(),
        "--output",
        out.to_str().unwrap(),
        "--method",
        "axial-phase",
        "--angle",
        "0",
        "--alpha",
        "4",
        "--alpha-perp",
        "0",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let result = load_sequence(&out).unwrap();
    assert_eq!(result.len(), clip.len());
    assert_eq!(result[0].height(), 32);
    assert!(result[0].max_abs_diff(&clip[0]) < 0.05);
}

#[test]
fn msm_with_zero_alpha_reconstructs_each_frame() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in");
    let out = dir.path().join("out");
    let clip = small_clip(&input, 3);
    let model = Model::<f32>::new(ModelConfig {
        channels: 4,
        decoder_channels: 8,
        seed: 3,
        ..ModelConfig::default()
    })
    .unwrap();
    let manifest = model.save(dir.path().join("model")).unwrap();
    let o = axmag(&[
        "magnify",
        "--input",
        input.to_str().unwrap(),
        "--output",
        out.to_str().unwrap(),
        "--method",
        "msm",
        "--model",
        manifest.to_str().unwrap(),
        "--angle",
        "25",
        "--alpha",
        "0",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let result = load_sequence(&out).unwrap();
    let zero = MagnificationSpec::axial(25.0, 0.0, 0.0);
    for (f, r) in clip.iter().zip(&result) {
        let expect = model.forward(f, f, &zero).unwrap().clamp01();
        assert!(r.max_abs_diff(&expect) <= 0.5 / 255.0 + 1e-4);
    }
}

#[test]
fn physical_reports_the_pixel_amplitude() {
    let o = axmag(&[
        "physical",
        "--freq",
        "20",
        "--accel",
        "4.11",
        "--distance",
        "2",
        "--focal",
        "0.1",
        "--pixel-size",
        "5.86e-6",
        "--alpha",
        "10",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("peak 2.221 px (alpha=1)"), "{text}");
    assert!(text.contains("peak 22.207 px (alpha=10)"), "{text}");
    assert!(text.contains("4.1100"), "{text}");
}

#[test]
fn zero_learning_rate_keeps_the_initial_weights() {
    let dir = tempfile::tempdir().unwrap();
    let p = |s: &str| dir.path().join(s).to_string_lossy().into_owned();
    let o = axmag(&[
        "datagen", "--count", "3", "--size", "64", "--margin", "16", "--alpha-max", "1.5", "--k-min", "3", "--k-max",
        "4", "--out", &p("data"),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let init = Model::<f32>::new(ModelConfig {
        channels: 4,
        decoder_channels: 8,
        seed: 5,
        ..ModelConfig::default()
    })
    .unwrap();
    let manifest = init.save(dir.path().join("init")).unwrap();
    let o = axmag(&[
        "train",
        "--data",
        &p("data"),
        "--init",
        manifest.to_str().unwrap(),
        "--epochs",
        "1",
        "--batch",
        "2",
        "--lr",
        "0",
        "--out",
        &p("run"),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let after = Model::<f32>::load(dir.path().join("run/checkpoints/epoch_001")).unwrap();
    assert_eq!(after.params.blocks, init.params.blocks);
    let log = std::fs::read_to_string(dir.path().join("run/train_log.csv")).unwrap();
    assert_eq!(log.lines().count(), 3);
}

#[test]
fn track_writes_a_csv() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in");
    small_clip(&input, 4);
    let report = dir.path().join("nested/tracks.csv");
    let o = axmag(&[
        "track",
        "--input",
        input.to_str().unwrap(),
        "--points",
        "16,16;12,20",
        "--report",
        report.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&report).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("track_id,frame,x,y,status"));
    assert_eq!(lines.count(), 8);
}
