use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lexseg::postprocess::threshold_baseline;
use lexseg::raster::{Mask, RgbImage};
use lexseg::saliency::load_salmap;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn lexseg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lexseg"))
        .args(args)
        .env_remove("LEXSEG_VGG19_WEIGHTS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn ok(o: Output) -> String {
    assert!(o.status.success(), "exit {:?}: {}", o.status.code(), String::from_utf8_lossy(&o.stderr));
    stdout(&o)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A 24x20 image with a red rectangle on grey, and its mask.
fn red_scene(dir: &Path) -> (PathBuf, PathBuf) {
    let mut img = RgbImage::filled(24, 20, [0.5, 0.5, 0.5]);
    let gt = Mask::from_fn(24, 20, |x, y| (6..17).contains(&x) && (5..14).contains(&y));
    for y in 0..20 {
        for x in 0..24 {
            if gt.get(x, y) {
                img.set(x, y, [0.9, 0.08, 0.08]);
            }
        }
    }
    let (ip, mp) = (dir.join("scene.png"), dir.join("scene_gt.png"));
    img.save_png(&ip).unwrap();
    gt.save_png(&mp).unwrap();
    (ip, mp)
}

fn train_quick(dir: &Path, variant: &str, steps: &str) -> PathBuf {
    let runs = dir.join("runs");
    let cfg = configs().join("tiny_synthetic.toml");
    ok(lexseg(&[
        "--config", s(&cfg), "train", "--partition", "0", "--variant", variant, "--steps", steps, "--out", s(&runs),
    ]));
    runs
}

#[test]
fn map_labels_lists_bottle_proxies() {
    let out = ok(lexseg(&["map-labels", "--label", "bottle", "--mapper", "wordnet", "--all"]));
    assert!(out.contains("beer bottle"), "{out}");
    assert!(out.contains("pill bottle"), "{out}");
    let one = ok(lexseg(&["map-labels", "--label", "bottle", "--k", "1"]));
    assert_eq!(one.lines().filter(|l| l.starts_with("positive")).count(), 1, "{one}");
}

#[test]
fn usage_and_runtime_errors_have_distinct_exit_codes() {
    assert_eq!(lexseg(&["map-labels", "--label", "car", "--mapper", "bert"]).status.code(), Some(2));
    assert_eq!(lexseg(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(lexseg(&["map-labels", "--label", "  "]).status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let (img, _) = red_scene(dir.path());
    let missing = dir.path().join("none.safetensors");
    let o = lexseg(&[
        "segment", "--image", s(&img), "--label", "red", "--checkpoint", s(&missing), "--out", s(&dir.path().join("m.png")),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("none.safetensors"));
    let o = lexseg(&["saliency", "--image", s(&dir.path().join("nope.png")), "--label", "red", "--out", s(dir.path()), "--backend", "fixture"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn train_with_zero_steps_writes_only_an_initial_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let runs = train_quick(dir.path(), "sem-2-c-neg", "0");
    let ck = runs.join("sem-2-c-neg/partition-0.safetensors");
    let c = lexseg::segnet::load_checkpoint(&ck).unwrap();
    assert_eq!(c.state.step, 0);
    let steps = runs.join("sem-2-c-neg/partition-0/steps");
    assert_eq!(std::fs::read_dir(steps).map(|d| d.count()).unwrap_or(0), 0);
}

#[test]
fn segment_writes_mask_and_intermediates() {
    let dir = tempfile::tempdir().unwrap();
    let runs = train_quick(dir.path(), "sem-2-c-neg", "20");
    let ck = runs.join("sem-2-c-neg/partition-0.safetensors");
    let (img, _) = red_scene(dir.path());
    let out = dir.path().join("out/mask.png");
    let (sal, ann) = (dir.path().join("sal"), dir.path().join("ann"));
    ok(lexseg(&[
        "segment", "--image", s(&img), "--label", "red", "--checkpoint", s(&ck), "--out", s(&out),
        "--dump-saliency", s(&sal), "--dump-annotation", s(&ann),
    ]));
    let mask = Mask::load_png(&out).unwrap();
    assert_eq!(mask.dims(), (24, 20));
    for name in ["positive", "negative"] {
        assert_eq!(load_salmap(&sal.join(format!("{name}.salmap"))).unwrap().dims(), (24, 20));
    }
    assert!(ann.join("annotation.png").exists());

    let plain = dir.path().join("plain.png");
    let ann2 = dir.path().join("ann2");
    ok(lexseg(&[
        "segment", "--image", s(&img), "--label", "red", "--checkpoint", s(&ck), "--out", s(&plain), "--no-grabcut",
        "--dump-annotation", s(&ann2),
    ]));
    let likelihood = load_salmap(&ann2.join("likelihood.salmap")).unwrap();
    assert_eq!(Mask::load_png(&plain).unwrap(), threshold_baseline(&likelihood, 0.5));
}

#[test]
fn oracle_segmentation_uses_the_ground_truth_channel() {
    let dir = tempfile::tempdir().unwrap();
    let runs = train_quick(dir.path(), "oracle", "1");
    let ck = runs.join("oracle/partition-0.safetensors");
    let (img, gt) = red_scene(dir.path());
    let sal = dir.path().join("sal");
    let out = dir.path().join("m.png");
    let base = ["segment", "--image", s(&img), "--label", "red", "--checkpoint", s(&ck), "--out", s(&out), "--variant", "oracle"];
    assert_eq!(lexseg(&base).status.code(), Some(1));
    let mut args = base.to_vec();
    args.extend(["--gt", s(&gt), "--dump-saliency", s(&sal)]);
    ok(lexseg(&args));
    let pos = load_salmap(&sal.join("positive.salmap")).unwrap();
    let mask = Mask::load_png(&gt).unwrap();
    assert_eq!(pos, mask.to_plane());
}

#[test]
fn eval_reports_only_test_labels_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let runs = train_quick(dir.path(), "sem-2-c-neg", "10");
    let cfg = configs().join("tiny_synthetic.toml");
    let report = |name: &str| {
        let rep = dir.path().join(name);
        ok(lexseg(&[
            "--config", s(&cfg), "--seed", "3", "eval", "--partition", "0", "--variant", "sem-2-c-neg",
            "--checkpoint-dir", s(&runs), "--report", s(&rep),
        ]));
        std::fs::read_to_string(rep.join("report.tsv")).unwrap()
    };
    let a = report("r1");
    assert_eq!(a, report("r2"));
    let classes: Vec<&str> = a
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("variant"))
        .filter_map(|l| l.split('\t').nth(2))
        .filter(|c| !["mIOU", "mean"].contains(c))
        .collect();
    assert!(!classes.is_empty());
    assert!(classes.iter().all(|c| ["red", "green"].contains(c)), "{a}");
}

#[test]
fn leaky_partition_file_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("leak.toml");
    std::fs::write(&p, "index = 0\ntest_labels = [\"red\", \"green\"]\ntrain_labels = [\"red\", \"blue\"]\n").unwrap();
    let cfg = configs().join("tiny_synthetic.toml");
    let o = lexseg(&[
        "--config", s(&cfg), "train", "--partition", "0", "--partition-file", s(&p), "--steps", "1",
        "--out", s(&dir.path().join("runs")),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).to_lowercase().contains("leak"));
}

#[test]
fn training_is_reproducible_under_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let a = train_quick(&dir.path().join("a"), "sem-2-c-neg", "5");
    let b = train_quick(&dir.path().join("b"), "sem-2-c-neg", "5");
    let read = |r: &Path| std::fs::read(r.join("sem-2-c-neg/partition-0.safetensors")).unwrap();
    assert_eq!(read(&a), read(&b));
}
