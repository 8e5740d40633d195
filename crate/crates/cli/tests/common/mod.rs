#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use parametrix_cli::config::{AFamily, BFamily};
use parametrix_cli::{run_experiment, Experiment, ExperimentConfig};
use serde_json::Value;

pub fn shipped() -> ExperimentConfig {
    ExperimentConfig::shipped()
}

/// Shipped family with A = 0.
pub fn without_a() -> ExperimentConfig {
    let mut c = shipped();
    c.family.a_family = AFamily::Zero;
    c
}

/// b = β0 (1+ξ²)^{γ/2}, A = 0.
pub fn multiplier(beta0: f64, n: usize, band: Vec<usize>) -> ExperimentConfig {
    let mut c = without_a();
    c.family.b_family = BFamily::Multiplier;
    c.family.beta0 = beta0;
    c.grid.n = n;
    c.run.band_k_list = band;
    c
}

pub fn run(exp: Experiment, cfg: &ExperimentConfig, out: &Path) -> (bool, PathBuf) {
    let o = run_experiment(exp, cfg, out).unwrap_or_else(|e| panic!("{exp}: {e}"));
    (o.pass, o.dir)
}

pub fn json(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap()
}

/// Rows of a CSV body as f64 columns (header dropped).
pub fn csv(path: PathBuf) -> Vec<Vec<f64>> {
    fs::read_to_string(&path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}
