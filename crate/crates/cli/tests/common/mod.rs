#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use blurforge::model::{accuracy, predict, train, Sample, TinyCnn, TrainConfig};
use blurforge::shapes::{generate, ShapeSample, NUM_CLASSES};

pub struct Run {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn blurforge(args: &[&str], envs: &[(&str, &str)]) -> Run {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_blurforge"));
    cmd.args(args).env_remove("BLURFORGE_THREADS");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    let out = cmd.output().expect("binary runs");
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

pub fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 temp path")
}

/// Writes a `count`-image shapes corpus (PNG images, mask files, manifest).
pub fn write_shapes(dir: &Path, count: usize, offset: u64) {
    let r = blurforge(
        &["generate", "--out", p(dir), "--count", &count.to_string(), "--seed", "1", "--offset", &offset.to_string()],
        &[],
    );
    assert_eq!(r.code, 0, "{}", r.stderr);
}

/// An untrained 32x32 checkpoint with enlarged weights so predictions vary.
pub fn write_random_model(path: &Path, seed: u64) {
    let mut m = TinyCnn::new((32, 32, 3), NUM_CLASSES, seed).unwrap();
    let params = m.params().iter().map(|v| v * 8.0).collect();
    m.set_params(params).unwrap();
    m.save(path).unwrap();
}

/// TinyCnn trained on the seeded shapes corpus, with the held-out test split.
pub struct Desk {
    pub model: TinyCnn,
    pub test: Vec<ShapeSample>,
    /// Test samples the model classifies correctly.
    pub correct: Vec<ShapeSample>,
    pub test_accuracy: f64,
    pub train_time: Duration,
}

pub const TRAIN_COUNT: usize = 1600;
pub const TEST_COUNT: usize = 400;
pub const TEST_OFFSET: u64 = 1_000_000;

pub fn desk() -> &'static Desk {
    static DESK: OnceLock<Desk> = OnceLock::new();
    DESK.get_or_init(|| {
        let t0 = Instant::now();
        let train_set: Vec<Sample> = generate(1, 0, TRAIN_COUNT, 32).iter().map(|s| s.sample()).collect();
        let test = generate(1, TEST_OFFSET, TEST_COUNT, 32);
        let mut model = TinyCnn::new((32, 32, 3), NUM_CLASSES, 0).unwrap();
        train(&mut model, &train_set, None, TrainConfig { epochs: 8, lr: 0.01, seed: 0 }).unwrap();
        let train_time = t0.elapsed();
        let test_set: Vec<Sample> = test.iter().map(|s| s.sample()).collect();
        let test_accuracy = accuracy(&model, &test_set).unwrap();
        let correct = test
            .iter()
            .filter(|s| predict(&model, &s.image).unwrap().0 == s.label)
            .cloned()
            .collect();
        Desk {
            model,
            test,
            correct,
            test_accuracy,
            train_time,
        }
    })
}

pub fn temp_path(dir: &tempfile::TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}
