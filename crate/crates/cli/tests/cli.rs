use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

use semvoc::features::io::read_feature_file;
use semvoc_cli::config::parse_pairs;
use semvoc_cli::{run_experiment, ExperimentConfig};
use tempfile::TempDir;

const TINY: &str = "
source = synthetic
synth.num_labels = 3
synth.images_per_label = 32
synth.features_per_image = 40
strategies = random,random_km,model,filt_model
vocab_sizes = 12,24
nc_values = 3,6,9
clustering_repeats = 2
construction_repeats = 1
linear.epochs = 200
seed = 11
";

fn semvoc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_semvoc"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, extra: &str) -> PathBuf {
    let path = dir.join("config.txt");
    fs::write(&path, format!("{TINY}{extra}")).unwrap();
    path
}

fn tiny(out: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.apply_all(&parse_pairs(TINY).unwrap()).unwrap();
    cfg.out_dir = out.to_path_buf();
    cfg
}

fn data_lines(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(String::from)
        .collect()
}

fn pgm(path: &Path, w: usize, h: usize) {
    let mut bytes = format!("P5\n{w} {h}\n255\n").into_bytes();
    bytes.extend((0..w * h).map(|i| ((i * 37) % 251) as u8));
    fs::write(path, bytes).unwrap();
}

#[test]
fn extract_empty_dir_is_an_error() {
    let tmp = TempDir::new().unwrap();
    let images = tmp.path().join("images");
    fs::create_dir(&images).unwrap();
    let out = semvoc(&["extract", "--images", images.to_str().unwrap(), "--out", tmp.path().join("f").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn extract_one_image_follows_grid_arithmetic() {
    let tmp = TempDir::new().unwrap();
    let images = tmp.path().join("images");
    fs::create_dir(&images).unwrap();
    pgm(&images.join("a.pgm"), 40, 33);
    let feats = tmp.path().join("f");
    let out = semvoc(&[
        "extract",
        "--images",
        images.to_str().unwrap(),
        "--grid-step",
        "8",
        "--out",
        feats.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let files: Vec<_> = fs::read_dir(&feats).unwrap().collect();
    assert_eq!(files.len(), 1);
    let (img, dim) = read_feature_file::<f32>(&feats.join("a.boff")).unwrap();
    // centers 8..=32 by 8 across, 8..=25 by 8 down
    assert_eq!(img.len(), 4 * 3);
    assert_eq!(dim, 128);
}

#[test]
fn synth_vocab_encode_eval_pipeline() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "");
    let c = cfg.to_str().unwrap();
    let p = |name: &str| tmp.path().join(name).to_str().unwrap().to_string();

    let out = semvoc(&["synth", "--config", c, "--out", &p("synth")]);
    assert_eq!(out.status.code(), Some(0));
    let gt = fs::read_to_string(tmp.path().join("synth/ground_truth.csv")).unwrap();
    assert!(gt.starts_with("# config_hash="));
    assert_eq!(data_lines(&tmp.path().join("synth/ground_truth.csv")).len(), 3 * 32 * 40);

    let out = semvoc(&["vocab", "--config", c, "--strategy", "filt_model", "--vocab-size", "12", "--out", &p("v.bofv")]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(tmp.path().join("v.filter.csv").exists());

    let out = semvoc(&["encode", "--config", c, "--vocab", &p("v.bofv"), "--out", &p("enc.csv")]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(data_lines(&tmp.path().join("enc.csv")).len(), 96);

    let out = semvoc(&[
        "eval",
        "--config",
        c,
        "--strategy",
        "filt_model",
        "--encoding",
        &p("enc.csv"),
        "--out",
        &p("eval"),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = data_lines(&tmp.path().join("eval/results.csv"));
    // three nc rows for clustering, one for the linear protocol
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r.starts_with("filt_model,12,")));
}

#[test]
fn vocab_requires_a_single_strategy() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "");
    let out = semvoc(&["vocab", "--config", cfg.to_str().unwrap(), "--vocab-size", "12", "--out", "v.bofv"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unknown_strategy_fails_before_any_work() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "");
    let out_dir = tmp.path().join("out");
    let out = semvoc(&[
        "experiment",
        "--config",
        cfg.to_str().unwrap(),
        "--strategy",
        "random,bogus",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));
    assert!(!out_dir.exists());
}

#[test]
fn tiny_experiment_outputs() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "alpha_sweep = 0.8,1.25\n");
    let out_dir = tmp.path().join("out");
    let start = Instant::now();
    let out = semvoc(&["experiment", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    let elapsed = start.elapsed().as_secs_f64();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(elapsed < 60.0, "tiny sweep took {elapsed:.1} s");

    // strategies x sizes x repetitions x (nc rows + one linear row)
    assert_eq!(data_lines(&out_dir.join("results.csv")).len(), 4 * 2 * 4);
    for name in [
        "results.csv",
        "per_class.csv",
        "curve_f_vs_size.csv",
        "curve_tpr_vs_size.csv",
        "roc.csv",
        "alpha_sweep.csv",
        "failures.csv",
    ] {
        let text = fs::read_to_string(out_dir.join(name)).unwrap();
        assert!(text.starts_with("# config_hash="), "{name}");
        assert!(text.lines().next().unwrap().ends_with("seed=11"), "{name}");
    }
    assert_eq!(data_lines(&out_dir.join("failures.csv")).len(), 0);
    // two alpha values, two protocols, two sizes
    assert_eq!(data_lines(&out_dir.join("alpha_sweep.csv")).len(), 2 * 2 * 2);
    let roc = data_lines(&out_dir.join("roc.csv"));
    assert_eq!(roc.iter().filter(|r| r.ends_with(",*")).count(), 4 * 2);
}

#[test]
fn partial_failure_exits_with_two() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "strategies = random\nprotocols = clustering\n");
    let out_dir = tmp.path().join("out");
    let out = semvoc(&[
        "experiment",
        "--config",
        cfg.to_str().unwrap(),
        "--vocab-size",
        "12,100000",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let failures = data_lines(&out_dir.join("failures.csv"));
    assert_eq!(failures.len(), 1);
    assert!(failures[0].contains("100000"));
    assert_eq!(data_lines(&out_dir.join("results.csv")).len(), 3);
}

#[test]
fn rerun_resumes_and_is_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let mut cfg = tiny(&tmp.path().join("a"));
    cfg.set("strategies", "random_km,filt_model").unwrap();
    cfg.set("protocols", "clustering").unwrap();

    let first = run_experiment(&cfg).unwrap();
    assert_eq!((first.cells, first.resumed), (4, 0));
    let results = fs::read(tmp.path().join("a/results.csv")).unwrap();

    let again = run_experiment(&cfg).unwrap();
    assert_eq!(again.resumed, 4);
    assert_eq!(fs::read(tmp.path().join("a/results.csv")).unwrap(), results);

    // a fresh directory recomputes everything and still matches
    cfg.out_dir = tmp.path().join("b");
    let fresh = run_experiment(&cfg).unwrap();
    assert_eq!(fresh.resumed, 0);
    assert_eq!(fs::read(tmp.path().join("b/results.csv")).unwrap(), results);

    // a changed setting invalidates the stored cells
    cfg.out_dir = tmp.path().join("a");
    cfg.set("clustering_repeats", "3").unwrap();
    assert_eq!(run_experiment(&cfg).unwrap().resumed, 0);
}
