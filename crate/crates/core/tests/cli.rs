use std::path::Path;
use std::process::{Command, Output};

use riq_core::features::{Normalizer, NormalizerMode, DEFAULT_FEATURE_LEN};
use riq_core::imaging::RasterImage;
use riq_core::mlnn::{write_model, MlafParams, MlnnModel, DEFAULT_CATEGORIES};

fn riq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_riq"))
        .args(args)
        .env_remove("RIQ_SEED")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn half_red_blue(path: &Path) {
    RasterImage::from_fn(64, 64, |_, c| if c < 32 { [1.0, 0.0, 0.0] } else { [0.0, 0.0, 1.0] })
        .write_ppm(path)
        .unwrap();
}

/// Hidden unit fires on mean hue above ~0.4, pushing the output from the
/// Sky window to the Water window.
fn hue_model(path: &Path) {
    let mlaf = MlafParams::default();
    let mut w_hidden = vec![0.0; DEFAULT_FEATURE_LEN];
    w_hidden[0] = 200.0;
    let model = MlnnModel {
        input_dim: DEFAULT_FEATURE_LEN,
        hidden_dim: 1,
        w_hidden,
        // normalized hue is (h + 1) / 2, so 0.7 corresponds to h = 0.4
        b_hidden: vec![-140.0],
        w_out: vec![4.0 * mlaf.c],
        b_out: mlaf.c / 2.0,
        mlaf,
        normalizer: Normalizer {
            mode: NormalizerMode::Unit,
            mean: vec![0.0; DEFAULT_FEATURE_LEN],
            std_dev: vec![1.0 / 3.0; DEFAULT_FEATURE_LEN],
        },
        categories: DEFAULT_CATEGORIES.iter().map(|s| s.to_string()).collect(),
    };
    write_model(&model, path).unwrap();
}

#[test]
fn help_lists_every_tunable() {
    let top = riq(&["--help"]);
    assert_eq!(top.status.code(), Some(0));
    for sub in ["segment", "train", "classify", "evaluate", "index", "query", "synth"] {
        assert!(stdout(&top).contains(sub), "{sub}");
    }
    let train = stdout(&riq(&["train", "--help"]));
    for flag in [
        "--seed",
        "--radius",
        "--min-region",
        "--beta",
        "--c ",
        "--hidden",
        "--lr",
        "--epochs",
        "RIQ_SEED",
    ] {
        assert!(train.contains(flag), "train --help lacks {flag}");
    }
    assert!(stdout(&riq(&["query", "--help"])).contains("--or"));
    assert!(stdout(&riq(&["segment", "--help"])).contains("--labels-out"));
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(riq(&[]).status.code(), Some(1));
    assert_eq!(riq(&["segment"]).status.code(), Some(1));
    assert_eq!(riq(&["segment", "x.png", "--bogus"]).status.code(), Some(1));
    assert_eq!(riq(&["segment", "x.png", "--radius", "abc"]).status.code(), Some(1));
}

#[test]
fn invalid_parameters_exit_1_before_work() {
    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("a.ppm");
    half_red_blue(&img);
    let o = riq(&["segment", p(&img), "--radius=-0.1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("radius"));
    let o = riq(&["segment", p(&img), "--min-region", "1.5"]);
    assert_eq!(o.status.code(), Some(1));
    let out = dir.path().join("never");
    let o = riq(&["synth", p(&out), "--min-region", "0"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!out.exists());
}

#[test]
fn missing_file_exits_2() {
    let o = riq(&["segment", "/nonexistent/image.png"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("not found"));
}

#[test]
fn segment_constant_and_split_images() {
    let dir = tempfile::tempdir().unwrap();
    let flat = dir.path().join("flat.ppm");
    RasterImage::filled(40, 30, [0.2, 0.6, 0.3]).write_ppm(&flat).unwrap();
    let o = riq(&["segment", p(&flat)]);
    assert_eq!(o.status.code(), Some(0));
    let lines: Vec<String> = stdout(&o).lines().map(String::from).collect();
    assert_eq!(lines.len(), 1);
    let fields: Vec<&str> = lines[0].split('\t').collect();
    assert_eq!(fields[2], "65536");
    assert_eq!(fields[3], "0,0,255,255");

    let split = dir.path().join("split.ppm");
    half_red_blue(&split);
    let pgm = dir.path().join("labels.pgm");
    let o = riq(&["segment", p(&split), "--labels-out", p(&pgm)]);
    assert_eq!(stdout(&o).lines().count(), 2);
    let bytes = std::fs::read(&pgm).unwrap();
    assert!(bytes.starts_with(b"P5\n256 256\n255\n"));
}

#[test]
fn classify_prints_one_line_per_region() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model.txt");
    hue_model(&model);
    let blue = dir.path().join("blue.ppm");
    RasterImage::filled(32, 32, [0.1, 0.2, 0.9]).write_ppm(&blue).unwrap();
    let o = riq(&["classify", p(&blue), "-m", p(&model)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    let fields: Vec<&str> = out.trim_end().split('\t').collect();
    assert_eq!(fields[..2], ["0", "Water"]);
    assert!(fields[2].parse::<f64>().is_ok());

    // both halves are 50% of the image, below t = 0.6
    let split = dir.path().join("split.ppm");
    half_red_blue(&split);
    let o = riq(&["classify", p(&split), "-m", p(&model), "--min-region", "0.6"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "");
}

#[test]
fn corrupt_model_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model.txt");
    std::fs::write(&model, "RIQMLNN 1\ngarbage\n").unwrap();
    let img = dir.path().join("a.ppm");
    half_red_blue(&img);
    let o = riq(&["classify", p(&img), "-m", p(&model)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("format error"));
}

#[test]
fn index_and_query_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model.txt");
    hue_model(&model);
    let images = dir.path().join("images");
    std::fs::create_dir_all(images.join("sub")).unwrap();
    RasterImage::filled(32, 32, [0.9, 0.1, 0.1])
        .write_ppm(&images.join("a.ppm"))
        .unwrap();
    RasterImage::filled(32, 32, [0.8, 0.2, 0.1])
        .write_ppm(&images.join("sub/b.ppm"))
        .unwrap();
    RasterImage::filled(32, 32, [0.1, 0.2, 0.9])
        .write_ppm(&images.join("c.ppm"))
        .unwrap();
    std::fs::write(images.join("notes.txt"), "not an image").unwrap();
    let index = dir.path().join("index.txt");
    let o = riq(&["index", p(&images), "-m", p(&model), "-o", p(&index)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let q = |args: &[&str]| {
        let mut all = vec!["query", p(&index)];
        all.extend_from_slice(args);
        riq(&all)
    };
    assert_eq!(stdout(&q(&["water"])), "c.ppm\n");
    assert_eq!(stdout(&q(&["Sky"])), "a.ppm\nsub/b.ppm\n");
    assert_eq!(stdout(&q(&["sky", "water"])), "");
    assert_eq!(stdout(&q(&["sky", "water", "--or"])), "a.ppm\nc.ppm\nsub/b.ppm\n");

    let o = q(&["lava"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("lava"));

    let o = q(&["water", "-m", p(&model)]);
    assert!(!stderr(&o).contains("warning"));
    let o = q(&["water", "-m", p(&model), "--radius", "0.2"]);
    assert!(stderr(&o).contains("warning"));
    assert_eq!(stdout(&o), "c.ppm\n");
}

#[test]
fn empty_directory_gives_empty_index() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model.txt");
    hue_model(&model);
    let images = dir.path().join("empty");
    std::fs::create_dir(&images).unwrap();
    let index = dir.path().join("index.txt");
    let o = riq(&["index", p(&images), "-m", p(&model), "-o", p(&index)]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(std::fs::read_to_string(&index).unwrap().lines().count(), 2);
    let o = riq(&["query", p(&index), "sky"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "");
}

#[test]
fn synth_then_train_and_bad_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let o = riq(&["--seed", "3", "synth", p(&data), "--train", "10", "--test", "10"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let train = std::fs::read_to_string(data.join("train.tsv")).unwrap();
    assert_eq!(train.lines().count(), 10);
    assert_eq!(
        std::fs::read_to_string(data.join("test.tsv")).unwrap().lines().count(),
        10
    );

    let model = dir.path().join("model.txt");
    let o = riq(&["train", p(&data.join("train.tsv")), "-o", p(&model), "--epochs", "50"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("final loss") && out.contains("training accuracy"));
    assert!(std::fs::read_to_string(&model).unwrap().starts_with("RIQMLNN 1\n"));

    let first = train.lines().next().unwrap();
    let image = first.split('\t').next().unwrap();
    let bad = data.join("bad.tsv");
    std::fs::write(&bad, format!("{first}\n{image}\t99\tSky\n")).unwrap();
    let o = riq(&["train", p(&bad), "-o", p(&dir.path().join("m2.txt"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
}

#[test]
fn seed_comes_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        let o = Command::new(env!("CARGO_BIN_EXE_riq"))
            .args(["synth", p(&out), "--train", "5", "--test", "5"])
            .env("RIQ_SEED", seed)
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(0));
        std::fs::read(out.join("train/00000.ppm")).unwrap()
    };
    assert_eq!(run("a", "9"), run("b", "9"));
    assert_ne!(run("c", "9"), run("d", "10"));
}
