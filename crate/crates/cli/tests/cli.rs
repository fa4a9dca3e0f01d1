use std::path::Path;
use std::process::{Command, Output};

use hrnet_core::model::{checkpoint, ArchConfig, ModelParams};
use hrnet_core::spectral::io;
use hrnet_core::RgbImage;

fn hrnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hrnet"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = hrnet(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn tree(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files = Vec::new();
    for sub in ["", "cube", "clean", "real"] {
        let dir = root.join(sub);
        for e in std::fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_file() {
                files.push((p.strip_prefix(root).unwrap().display().to_string(), std::fs::read(&p).unwrap()));
            }
        }
    }
    files.sort();
    files
}

#[test]
fn gen_data_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let stdout = ok(&["gen-data", "--count", "3", "--size", "24", "--seed", "7", "--out", s(out)]);
        assert!(stdout.contains("seed: 7"));
    }
    let (ta, tb) = (tree(&a), tree(&b));
    assert_eq!(ta.len(), 1 + 3 * 3);
    assert!(ta == tb, "outputs differ");
}

#[test]
fn infer_keeps_odd_input_size() {
    let dir = tempfile::tempdir().unwrap();
    let ck = dir.path().join("tiny.hrck");
    checkpoint::save(&ModelParams::<f32>::init(&ArchConfig::tiny(), 1).unwrap(), &ck).unwrap();
    let (h, w) = (100, 100);
    let data = (0..3 * h * w).map(|i| (i % 97) as f32 / 96.0).collect();
    let png = dir.path().join("in.png");
    io::save_png(&RgbImage::new(h, w, data).unwrap(), &png).unwrap();
    let out = dir.path().join("out.hsc");
    ok(&["infer", "--checkpoint", s(&ck), "--input", s(&png), "--out", s(&out)]);
    let cube: hrnet_core::SpectralCube = io::load_hsc(&out).unwrap();
    assert_eq!((cube.height(), cube.width(), cube.channels()), (100, 100, 31));
}

#[test]
fn eval_of_ground_truth_against_itself_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d");
    ok(&["gen-data", "--count", "2", "--size", "16", "--out", s(&data)]);
    let csv = dir.path().join("m.csv");
    ok(&["eval", "--gt", s(&data), "--pred", s(&data.join("cube")), "--out", s(&csv)]);
    let text = std::fs::read_to_string(&csv).unwrap();
    let mean = text.lines().last().unwrap();
    let fields: Vec<&str> = mean.split(',').collect();
    assert_eq!(fields[0], "mean");
    for v in &fields[1..] {
        assert_eq!(v.parse::<f64>().unwrap(), 0.0, "{mean}");
    }
}

#[test]
fn usage_errors_exit_2_and_format_errors_exit_3() {
    assert_eq!(hrnet(&["eval", "--gt", "x"]).status.code(), Some(2));
    assert_eq!(hrnet(&["report", "--width-scale", "0.3"]).status.code(), Some(2));
    assert_eq!(hrnet(&["train", "--patch", "30", "--epochs", "0"]).status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.hsc");
    std::fs::write(&bad, b"HSC1\x01\x00").unwrap();
    let out = hrnet(&["render", "--input", s(&bad), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.hsc"), "{err}");
}

#[test]
fn report_lists_every_scale() {
    let stdout = ok(&["report"]);
    for scale in ["0.5", "0.25", "0.125"] {
        assert!(stdout.lines().any(|l| l.trim_start().starts_with(scale)), "{stdout}");
    }
}
