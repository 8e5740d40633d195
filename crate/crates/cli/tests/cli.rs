mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use common::*;
use parametrix_cli::config::{AFamily, BFamily};
use parametrix_cli::{Experiment, RunError};
use sha2::{Digest, Sha256};

fn bin(args: &[&str], out_env: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_parametrix"));
    cmd.args(args).env_remove("PARAMETRIX_OUTPUT_DIR");
    if let Some(p) = out_env {
        cmd.env("PARAMETRIX_OUTPUT_DIR", p);
    }
    cmd.output().unwrap()
}

fn write_config(dir: &Path, v: &serde_json::Value) -> String {
    let p = dir.join("config.json");
    fs::write(&p, v.to_string()).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn config_errors_exit_2_with_one_line() {
    let tmp = tempfile::tempdir().unwrap();
    let mut v = serde_json::to_value(shipped()).unwrap();
    v["grid"]["N"] = 100.into();
    let cfg = write_config(tmp.path(), &v);
    for args in [
        vec!["run-ivp", "--config", cfg.as_str()],
        vec!["no-such-experiment", "--config", cfg.as_str()],
        vec!["run-ivp", "--config", "/nonexistent/config.json"],
        vec!["run-ivp"],
    ] {
        let o = bin(&args, None);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        let err = String::from_utf8(o.stderr).unwrap();
        assert_eq!(err.trim_end().lines().count(), 1, "{err}");
        assert!(err.starts_with("error: "));
    }
}

#[test]
fn instability_maps_to_exit_3() {
    let e: RunError = parametrix_core::Error::Instability { z: 0.1, ratio: 1e9 }.into();
    assert_eq!(e.exit_code(), 3);
    let e: RunError = parametrix_core::Error::RayBlowup { z: 0.1, xi: 1e9 }.into();
    assert_eq!(e.exit_code(), 3);
    let e: RunError = parametrix_core::Error::InvalidInput("x".into()).into();
    assert_eq!(e.exit_code(), 1);
}

#[test]
fn check_failure_exits_4_and_pass_exits_0() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &serde_json::to_value(shipped()).unwrap());
    let out = tmp.path().join("out");
    let o = bin(&["verify-symbol-class", "--config", &cfg, "--out", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(4));
    let doc = json(out.join("verify-symbol-class/symbol_class.json"));
    assert_eq!(doc["pass"], false);
    assert_eq!(doc["failing"], serde_json::json!(["exp_minus_I_class"]));

    let o = bin(&["sqrt-check", "--config", &cfg], Some(&out));
    assert_eq!(o.status.code(), Some(0));
    assert!(out.join("sqrt-check/sqrt_report.json").exists());
}

#[test]
fn output_dir_precedence() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = shipped();
    c.output_dir = tmp.path().join("from_config");
    let cfg = write_config(tmp.path(), &serde_json::to_value(&c).unwrap());
    let (flag, env) = (tmp.path().join("from_flag"), tmp.path().join("from_env"));
    bin(&["trace-rays", "--config", &cfg, "--out", flag.to_str().unwrap()], Some(&env));
    bin(&["trace-rays", "--config", &cfg], Some(&env));
    bin(&["trace-rays", "--config", &cfg], None);
    for d in [&flag, &env, &c.output_dir] {
        assert!(d.join("trace-rays/manifest.json").exists(), "{}", d.display());
    }
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &serde_json::to_value(shipped()).unwrap());
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for d in [&a, &b] {
        assert_eq!(bin(&["trace-rays", "--config", &cfg, "--out", d.to_str().unwrap()], None).status.code(), Some(0));
    }
    for f in ["rays_index.csv", "rays/ray_000.csv", "rays/ray_031.csv", "rays_report.json"] {
        assert_eq!(fs::read(a.join("trace-rays").join(f)).unwrap(), fs::read(b.join("trace-rays").join(f)).unwrap(), "{f}");
    }
}

#[test]
fn manifest_lists_every_file_with_its_hash() {
    let tmp = tempfile::tempdir().unwrap();
    let (_, dir) = run(Experiment::TraceRays, &shipped(), tmp.path());
    let m = json(dir.join("manifest.json"));
    assert_eq!(m["experiment"], "trace-rays");
    assert_eq!(m["config"], serde_json::to_value(shipped()).unwrap());
    let listed: Vec<&serde_json::Value> = m["files"].as_array().unwrap().iter().collect();
    let mut on_disk = Vec::new();
    let mut stack = vec![dir.clone()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().unwrap() != "manifest.json" {
                on_disk.push(p.strip_prefix(&dir).unwrap().to_str().unwrap().to_string());
            }
        }
    }
    assert_eq!(on_disk.len(), listed.len());
    for f in listed {
        let bytes = fs::read(dir.join(f["path"].as_str().unwrap())).unwrap();
        assert_eq!(f["sha256"].as_str().unwrap(), format!("{:x}", Sha256::digest(&bytes)));
        assert_eq!(f["bytes"].as_u64().unwrap(), bytes.len() as u64);
    }
}

#[test]
fn compare_with_zero_b_is_exact() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = shipped();
    c.family.b_family = BFamily::Zero;
    c.grid.n = 64;
    c.run.band_k_list = vec![4, 8, 16];
    assert_eq!(c.family.a_family, AFamily::Hyperbolic);
    let (pass, dir) = run(Experiment::Compare, &c, tmp.path());
    let rows = csv(dir.join("compare.csv"));
    assert_eq!(rows.len(), 3 * 3);
    for r in &rows {
        assert!(r[2] <= 1e-10, "K = {}, J = {}: {}", r[0], r[1], r[2]);
    }
    assert!(pass);
}

#[test]
fn multiplier_ivp_matches_mode_weights() {
    let tmp = tempfile::tempdir().unwrap();
    let c = multiplier(0.5, 64, vec![4, 8, 16]);
    let (pass, dir) = run(Experiment::RunIvp, &c, tmp.path());
    assert!(pass);
    let span = c.run.z_max - c.run.z0;
    let mut checked = 0;
    for r in csv(dir.join("ivp_modes.csv")) {
        let (k, a0, a1) = (r[0], r[1], r[2]);
        if a0 > 1e-12 {
            let want = (-span * 0.5 * (1.0 + k * k).sqrt()).exp();
            assert!((a1 / a0 - want).abs() <= 1e-6 * want, "k = {k}: {} vs {want}", a1 / a0);
            checked += 1;
        }
    }
    assert_eq!(checked, 33);
    let snap = fs::read_to_string(dir.join("ivp_snapshot.csv")).unwrap();
    assert!(snap.starts_with("z,j,re,im\n"));
    assert_eq!(snap.lines().count(), 1 + 2 * 64);
}

#[test]
fn build_parametrix_dumps_w() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = without_a();
    c.grid.n = 32;
    c.run.band_k_list = vec![2, 4, 8];
    let (pass, dir) = run(Experiment::BuildParametrix, &c, tmp.path());
    assert!(pass);
    let w = fs::read_to_string(dir.join("parametrix_W.csv")).unwrap();
    assert!(w.starts_with("j,k,re,im\n"));
    assert_eq!(w.lines().count(), 1 + 32 * 32);
}
