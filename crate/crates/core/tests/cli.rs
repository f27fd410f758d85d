mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use maskgen::dataset::{read_manifest, PairStatus, MANIFEST_FILE};
use maskgen::imgcore::load_image;
use maskgen::pipeline::{DUMP_BOXES_FILE, DUMP_FILES};
use maskgen::ColorImage;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn maskgen(args: &[&str], envs: &[(&str, &Path)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_maskgen"));
    cmd.args(args).env_remove(maskgen::cli::CONFIG_ENV);
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn save_color(img: &ColorImage, path: &Path) {
    let (w, h) = img.dimensions();
    let raw: Vec<u8> = img.as_slice().iter().flatten().copied().collect();
    image::RgbImage::from_raw(w as u32, h as u32, raw).unwrap().save(path).unwrap();
}

fn noise(w: usize, h: usize, seed: u64) -> ColorImage {
    common::random_color(&mut ChaCha8Rng::seed_from_u64(seed), w, h)
}

#[test]
fn single_identical_pair_prints_zero_white_fraction() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.png");
    save_color(&noise(40, 30, 1), &a);
    let out = dir.path().join("mask.png");
    let res = maskgen(&["single", "--original", arg(&a), "--tampered", arg(&a), "--out", arg(&out)], &[]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));

    let stats: serde_json::Value = serde_json::from_slice(&res.stdout).unwrap();
    assert_eq!(stats["white_fraction"], 0.0);
    assert_eq!(stats["boxes_after_nms"], 0);
    let mask = load_image(&out).unwrap();
    assert_eq!(mask.dimensions(), (40, 30));
    assert!(mask.as_slice().iter().all(|p| *p == [0, 0, 0]));
    assert!(!dir.path().join("mask_stages").exists());
}

#[test]
fn single_reports_tampered_rectangle() {
    let dir = tempfile::tempdir().unwrap();
    let (original, tampered, rect) = common::rectangle_fixture(256, 5);
    let (a, b) = (dir.path().join("a.png"), dir.path().join("b.png"));
    save_color(&original, &a);
    save_color(&tampered, &b);
    let out = dir.path().join("m.png");
    let res = maskgen(&["single", "--original", arg(&a), "--tampered", arg(&b), "--out", arg(&out)], &[]);
    assert_eq!(res.status.code(), Some(0));
    let mask = load_image(&out).unwrap();
    let white = |x: u32, y: u32| mask.get(x as usize, y as usize) == [255, 255, 255];
    let cx = (rect.x0 + rect.x1) / 2;
    let cy = (rect.y0 + rect.y1) / 2;
    assert!(white(cx, cy));
    assert!(!white(2, 2));
}

#[test]
fn single_mismatched_sizes_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.png"), dir.path().join("b.png"));
    save_color(&noise(20, 20, 1), &a);
    save_color(&noise(21, 20, 2), &b);
    let out = dir.path().join("m.png");
    let res = maskgen(&["single", "--original", arg(&a), "--tampered", arg(&b), "--out", arg(&out)], &[]);
    assert_eq!(res.status.code(), Some(2));
    assert!(!res.stderr.is_empty());
}

#[test]
fn single_unreadable_input_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.png");
    let out = dir.path().join("m.png");
    let res = maskgen(
        &["single", "--original", arg(&missing), "--tampered", arg(&missing), "--out", arg(&out)],
        &[],
    );
    assert_eq!(res.status.code(), Some(1));
}

#[test]
fn single_dump_writes_stage_files() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.png");
    save_color(&noise(32, 32, 3), &a);
    let out = dir.path().join("mask.png");
    let res = maskgen(
        &["single", "--original", arg(&a), "--tampered", arg(&a), "--out", arg(&out), "--dump-intermediates"],
        &[],
    );
    assert_eq!(res.status.code(), Some(0));
    let stages = dir.path().join("mask_stages");
    for name in DUMP_FILES.iter().chain([&DUMP_BOXES_FILE]) {
        assert!(stages.join(name).is_file(), "{name} missing");
    }
}

#[test]
fn config_from_environment_is_used() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.png");
    save_color(&noise(16, 16, 4), &a);
    let config = dir.path().join("tuning.conf");
    fs::write(&config, "dump-intermediates = true\n").unwrap();
    let out = dir.path().join("mask.png");
    let args = ["single", "--original", arg(&a), "--tampered", arg(&a), "--out", arg(&out)];

    let res = maskgen(&args, &[(maskgen::cli::CONFIG_ENV, &config)]);
    assert_eq!(res.status.code(), Some(0));
    assert!(dir.path().join("mask_stages").is_dir());

    fs::write(&config, "binarize-threshold = 0\n").unwrap();
    let res = maskgen(&args, &[(maskgen::cli::CONFIG_ENV, &config)]);
    assert_eq!(res.status.code(), Some(64));

    // An explicit --config wins over the environment.
    let good = dir.path().join("good.conf");
    fs::write(&good, "nms-iou = 0.5\n").unwrap();
    let mut explicit = args.to_vec();
    explicit.extend(["--config", arg(&good)]);
    let res = maskgen(&explicit, &[(maskgen::cli::CONFIG_ENV, &config)]);
    assert_eq!(res.status.code(), Some(0));
}

#[test]
fn unknown_config_key_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.conf");
    fs::write(&config, "no-such-key = 1\n").unwrap();
    let res = maskgen(
        &["batch", "--corpus", arg(dir.path()), "--out", arg(&dir.path().join("o")), "--config", arg(&config)],
        &[],
    );
    assert_eq!(res.status.code(), Some(64));
}

fn corpus_with_groups(root: &Path) {
    for (g, seed) in [("g1", 10u64), ("g2", 20)] {
        let dir = root.join(g);
        fs::create_dir_all(&dir).unwrap();
        let base = noise(48, 40, seed);
        save_color(&base, &dir.join("a.png"));
        let edited = ColorImage::from_fn(48, 40, |x, y| {
            if (10..30).contains(&x) && (8..28).contains(&y) { [250, 250, 250] } else { base.get(x, y) }
        });
        save_color(&edited, &dir.join("b.png"));
    }
}

#[test]
fn batch_valid_corpus_exit_0() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    corpus_with_groups(&corpus);
    save_color(&noise(10, 10, 9), &corpus.join("g1").join("c_small.png"));
    let out = dir.path().join("out");
    let res = maskgen(&["batch", "--corpus", arg(&corpus), "--out", arg(&out), "--jobs", "2"], &[]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let summary = String::from_utf8_lossy(&res.stderr);
    assert!(summary.contains("ok=2"), "{summary}");
    assert!(summary.contains("skipped_size_mismatch=1"), "{summary}");

    let rows = read_manifest(&out.join(MANIFEST_FILE)).unwrap();
    assert_eq!(rows.len(), 3);
    for row in rows.iter().filter(|r| r.status == PairStatus::Ok) {
        let mask = load_image(row.mask_path.as_ref().unwrap()).unwrap();
        assert!(mask.as_slice().iter().all(|p| *p == [0, 0, 0] || *p == [255, 255, 255]));
    }
    assert!(out.join("g1").join("b_mask.png").is_file());
    assert!(!out.join("g1").join("c_small_mask.png").exists());
}

#[test]
fn batch_corrupt_jpeg_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    corpus_with_groups(&corpus);
    fs::write(corpus.join("g2").join("c.jpg"), [0xFF, 0xD8, 0xFF, 0xE0, 0x00, 0x10]).unwrap();
    let out = dir.path().join("out");
    let res = maskgen(&["batch", "--corpus", arg(&corpus), "--out", arg(&out)], &[]);
    assert_eq!(res.status.code(), Some(3));

    let rows = read_manifest(&out.join(MANIFEST_FILE)).unwrap();
    let statuses: Vec<PairStatus> = rows.iter().map(|r| r.status).collect();
    assert_eq!(statuses, [PairStatus::Ok, PairStatus::Ok, PairStatus::DecodeError]);
    assert!(out.join("g2").join("b_mask.png").is_file());
}

#[test]
fn batch_dump_toggle() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    corpus_with_groups(&corpus);
    let plain = dir.path().join("plain");
    let dumped = dir.path().join("dumped");
    let base = ["batch", "--corpus", arg(&corpus), "--jobs", "1", "--out"];

    let mut args = base.to_vec();
    args.push(arg(&plain));
    assert_eq!(maskgen(&args, &[]).status.code(), Some(0));
    assert!(!plain.join("g1").join("b_stages").exists());

    let mut args = base.to_vec();
    args.extend([arg(&dumped), "--dump-intermediates"]);
    assert_eq!(maskgen(&args, &[]).status.code(), Some(0));
    for name in DUMP_FILES {
        assert!(dumped.join("g1").join("b_stages").join(name).is_file(), "{name} missing");
    }
    assert_eq!(
        fs::read(plain.join("g1").join("b_mask.png")).unwrap(),
        fs::read(dumped.join("g1").join("b_mask.png")).unwrap()
    );
}

#[test]
fn zero_jobs_is_usage_error() {
    let res = maskgen(&["batch", "--corpus", ".", "--out", "x", "--jobs", "0"], &[]);
    assert_eq!(res.status.code(), Some(64));
}

#[test]
fn missing_subcommand_and_bad_flags_exit_64() {
    assert_eq!(maskgen(&[], &[]).status.code(), Some(64));
    assert_eq!(maskgen(&["single", "--bogus"], &[]).status.code(), Some(64));
    let res = maskgen(&["--help"], &[]);
    assert_eq!(res.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&res.stdout).contains("batch"));
}
