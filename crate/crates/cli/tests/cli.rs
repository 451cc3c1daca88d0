use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use radarbeam::config::RunConfig;
use radarbeam::dataset::read_dataset;
use radarbeam::dsp::FeatureKind;
use radarbeam::eval::{read_jsonl, ReportRow};

const SMALL: &str = r#"
seed = 7
samples = 40

[radar]
samples_per_chirp = 32
chirps_per_frame = 16

[train]
epochs = 1
batch_size = 8
"#;

fn radarbeam(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_radarbeam")).current_dir(dir).args(args).output().expect("spawn radarbeam")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = radarbeam(dir, args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn code(dir: &Path, args: &[&str]) -> i32 {
    radarbeam(dir, args).status.code().expect("exit code")
}

fn workdir() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("small.toml"), SMALL).unwrap();
    dir
}

fn small_dataset(dir: &Path, extra: &[&str]) -> PathBuf {
    let mut args = vec!["simulate", "--config", "small.toml", "--out", "ds"];
    args.extend_from_slice(extra);
    ok(dir, &args);
    dir.join("ds")
}

#[test]
fn simulate_writes_requested_samples_and_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["simulate", "--samples", "2000", "--seed", "7", "--out", "ds", "--sequential"]);
    let ds = read_dataset(&dir.path().join("ds")).unwrap();
    assert_eq!(ds.len(), 2000);
    assert!(ds.labels().iter().all(|&l| l < 64));
    let snapshot = RunConfig::load(&dir.path().join("ds/config.toml")).unwrap();
    assert_eq!((snapshot.seed, snapshot.samples), (7, 2000));
}

#[test]
fn snapshot_reproduces_dataset_bytes() {
    let dir = workdir();
    let first = small_dataset(dir.path(), &["--keep-raw", "--kinds", "ra64,rv"]);
    ok(dir.path(), &["simulate", "--config", "ds/config.toml", "--out", "again", "--threads", "1"]);
    let second = dir.path().join("again");
    for file in ["manifest.toml", "records.bin", "raw.bin", "features-ra64.bin", "features-rv.bin"] {
        assert_eq!(fs::read(first.join(file)).unwrap(), fs::read(second.join(file)).unwrap(), "{file}");
    }
}

#[test]
fn scene_flags_reach_metadata() {
    let dir = workdir();
    let path = small_dataset(dir.path(), &["--clutter", "5", "--distractors", "2"]);
    let ds = read_dataset(&path).unwrap();
    assert!(ds.samples.iter().all(|m| m.n_clutter == 5 && m.n_distractors == 2));
}

#[test]
fn preprocess_adds_kinds_once() {
    let dir = workdir();
    let path = small_dataset(dir.path(), &["--keep-raw"]);
    let out = ok(dir.path(), &["preprocess", "--dataset", "ds", "--kinds", "ra64,rv"]);
    assert_eq!(out, "ra64: unchanged\nrv: added\n");
    let again = ok(dir.path(), &["preprocess", "--dataset", "ds", "--kinds", "ra64,rv"]);
    assert_eq!(again, "ra64: unchanged\nrv: unchanged\n");
    let ds = read_dataset(&path).unwrap();
    assert_eq!(ds.features.len(), 2);
}

#[test]
fn preprocess_radar_cube_has_full_shape() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["simulate", "--samples", "2", "--out", "ds", "--keep-raw"]);
    ok(dir.path(), &["preprocess", "--dataset", "ds", "--kinds", "rc"]);
    let ds = read_dataset(&dir.path().join("ds")).unwrap();
    let set = ds.feature(FeatureKind::RadarCube).unwrap();
    assert_eq!(set.shape, [4, 256, 128]);
    assert_eq!(set.sample_len(), 4 * 256 * 128);
}

#[test]
fn preprocess_without_raw_is_a_data_error() {
    let dir = workdir();
    small_dataset(dir.path(), &[]);
    assert_eq!(code(dir.path(), &["preprocess", "--dataset", "ds", "--kinds", "rv"]), 3);
}

#[test]
fn train_five_seeds_then_eval_checkpoint() {
    let dir = workdir();
    small_dataset(dir.path(), &[]);
    ok(
        dir.path(),
        &["train", "--config", "small.toml", "--dataset", "ds", "--out", "run", "--variant", "ra64", "--seeds", "5"],
    );
    let run = dir.path().join("run");
    let mut ckpts: Vec<String> = fs::read_dir(run.join("models"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    ckpts.sort();
    assert_eq!(ckpts, (0..5).map(|s| format!("cnn-ra64-p100-s{s}.ckpt")).collect::<Vec<_>>());
    let rows: Vec<ReportRow> = read_jsonl(&run.join("report.jsonl")).unwrap();
    assert_eq!(rows.len(), 5 * 3 + 3);
    assert_eq!(rows.iter().filter(|r| r.seed == "mean").count(), 3);
    assert!(run.join("report.csv").exists() && run.join("summary.json").exists() && run.join("config.toml").exists());

    let table = ok(
        dir.path(),
        &["eval", "--dataset", "ds", "--checkpoint", "run/models/cnn-ra64-p100-s3.ckpt", "--topk", "1,3,5"],
    );
    let accs: Vec<f64> = table.lines().skip(2).map(|l| l.split_whitespace().nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(accs.len(), 3);
    assert!(accs.windows(2).all(|w| w[0] <= w[1]));
    // The stored test-split top-1 of seed 3 matches a fresh evaluation.
    let stored = rows.iter().find(|r| r.seed == "3" && r.k == 1).unwrap().accuracy;
    assert!((stored - accs[0]).abs() < 1e-4, "{stored} vs {}", accs[0]);
}

#[test]
fn baseline_writes_tables_that_eval_reads() {
    let dir = workdir();
    small_dataset(dir.path(), &["--kinds", "ra4,ra64"]);
    ok(dir.path(), &["baseline", "--config", "small.toml", "--dataset", "ds", "--out", "bl", "--seeds", "1"]);
    assert!(dir.path().join("bl/models/lut-4-p100-s0.lut").exists());
    let table = ok(
        dir.path(),
        &["eval", "--dataset", "ds", "--lut", "bl/models/lut-64-p100-s0.lut", "--angle-fft", "64", "--out", "ev"],
    );
    assert!(table.starts_with("lut-64 on test"));
    assert!(dir.path().join("ev/eval.csv").exists());
}

#[test]
fn bench_all_reports_every_stage() {
    let dir = workdir();
    let out = ok(
        dir.path(),
        &["bench", "--config", "small.toml", "--all", "--iterations", "1", "--warmup", "0", "--out", "b"],
    );
    for name in ["ra4", "ra64", "rv", "rc", "cnn-ra64", "cnn-rc", "lut-4", "lut-64"] {
        assert!(out.lines().any(|l| l.split_whitespace().nth(1) == Some(name)), "{name} missing:\n{out}");
    }
    assert!(dir.path().join("b/bench.csv").exists() && dir.path().join("b/config.toml").exists());
}

#[test]
fn exit_codes_separate_config_data_and_internal_errors() {
    let dir = workdir();
    fs::write(dir.path().join("bad.toml"), "samples = 10\nbogus = 1\n").unwrap();
    assert_eq!(code(dir.path(), &["simulate", "--config", "bad.toml", "--out", "x"]), 2);
    assert_eq!(code(dir.path(), &["simulate", "--config", "small.toml", "--kinds", "ra0x", "--out", "x"]), 2);
    assert_eq!(code(dir.path(), &["simulate", "--bogus-flag"]), 2);
    assert_eq!(code(dir.path(), &["eval", "--dataset", "missing", "--checkpoint", "c"]), 2);

    let path = small_dataset(dir.path(), &[]);
    let features = path.join("features-ra64.bin");
    let bytes = fs::read(&features).unwrap();
    fs::write(&features, &bytes[..bytes.len() - 5]).unwrap();
    assert_eq!(code(dir.path(), &["baseline", "--dataset", "ds", "--out", "b", "--angle-fft", "64"]), 3);

    fs::write(dir.path().join("file"), "").unwrap();
    assert_eq!(code(dir.path(), &["simulate", "--config", "small.toml", "--out", "file/ds"]), 4);
}
