//! Acceptance criteria, one PASS/FAIL line each. Outcomes are compared with
//! the documented expectation; the target fails only on a mismatch.

mod common;

use std::path::Path;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use common::*;
use parametrix_cli::Experiment;
use parametrix_core::estimates::fit_slope;
use parametrix_core::symbol::check_h_inequality;
use parametrix_core::{trace_ray, CutoffFamily, HKind, HyperbolicA, RaySystem, RhoFn};
use serde_json::Value;

/// Criteria whose documented outcome is FAIL.
const EXPECTED_RED: &[usize] = &[3];

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn report<'a>(doc: &'a Value, id: &str) -> &'a Value {
    doc["reports"].as_array().unwrap().iter().find(|r| r["claim_id"] == id).unwrap()
}

fn c1_multiplier_exactness(out: &Path) -> Verdict {
    let mut cfg = multiplier(0.5, 128, vec![8, 16, 32]);
    cfg.run.j = 0;
    let (_, dir) = run(Experiment::Compare, &cfg, out);
    let worst = csv(dir.join("compare.csv")).iter().map(|r| r[2]).fold(0.0, f64::max);
    verdict(worst <= 1e-6, format!("max J=0 rel error {worst:.2e} (≤ 1e-6)"))
}

fn c2_order_improvement(out: &Path) -> Verdict {
    let mut cfg = without_a();
    cfg.run.j = 1;
    let (_, dir) = run(Experiment::Compare, &cfg, out);
    let rep = json(dir.join("compare_report.json"));
    let fits = rep["fits"].as_array().unwrap();
    let slope = |j: usize| fits[j]["slope"].as_f64().unwrap_or(f64::NEG_INFINITY);
    let below = fits[1]["below_previous_J"].as_bool().unwrap();
    let (s0, s1) = (slope(0), slope(1));
    let pass = s0 <= -0.5 + 0.3 && s1 <= -1.0 + 0.4 && below;
    verdict(pass, format!("slope J=0 {s0:.3} (≤ -0.2), J=1 {s1:.3} (≤ -0.6), J=1 below J=0 at every K: {below}"))
}

fn symbol_class(out: &Path) -> Value {
    let (_, dir) = run(Experiment::VerifySymbolClass, &shipped(), out);
    json(dir.join("symbol_class.json"))
}

fn c3_exp_i_class(doc: &Value) -> Verdict {
    let r = report(doc, "exp_minus_I_class");
    let orders = r["orders_tested"].as_array().unwrap();
    let margins = r["margins"].as_array().unwrap();
    let over: Vec<String> = orders
        .iter()
        .zip(margins)
        .filter(|(_, m)| m.as_f64().is_some_and(|m| m > 0.15))
        .map(|(o, m)| format!("{o}: {:.3}", m.as_f64().unwrap()))
        .collect();
    verdict(r["pass"].as_bool().unwrap(), format!("orders over bound + 0.15: [{}]", over.join(", ")))
}

fn c4_i_bounds(doc: &Value) -> Verdict {
    let ids = ["I_derivative_bounds", "z_uniform_bounds", "I_derivative_bounds_refinement", "z_uniform_bounds_refinement"];
    let finite = ids[..2].iter().all(|id| report(doc, id)["sup_constants"].as_array().unwrap().iter().all(|v| v.as_f64().is_some()));
    let worst = ids[2..]
        .iter()
        .flat_map(|id| report(doc, id)["sup_constants"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap_or(f64::INFINITY)))
        .fold(0.0, f64::max);
    let pass = finite && ids.iter().all(|id| report(doc, id)["pass"].as_bool().unwrap());
    verdict(pass, format!("finite sups: {finite}; worst 4x refinement change {:.1}% (< 10%)", 100.0 * worst))
}

fn c5_h_inequality() -> Verdict {
    let n = 400;
    let (lo, hi) = (1e-4f64.ln(), 0.5f64.ln());
    let ys: Vec<f64> = (0..=n).map(|i| (lo + (hi - lo) * i as f64 / n as f64).exp()).collect();
    let mut worst = 0.0f64;
    let mut pass = true;
    for l in 2..=8u32 {
        let family = CutoffFamily {
            gamma: 0.5,
            w0: 1.0,
            rho: RhoFn::Cosine { r0: 0.5, x_c: std::f64::consts::PI, s: 0.0, z0: 0.0 },
            h_kind: HKind::ExpInv,
            beta: 0.5,
            l,
        };
        let r = check_h_inequality(&family, l as usize - 1, &ys, 1e20).unwrap();
        pass &= r.pass;
        worst = r.sup_constants.iter().fold(worst, |m, v| m.max(*v));
    }
    verdict(pass, format!("L = 2..8, largest sup ratio {worst:.3e} (cap 1e20)"))
}

fn c6_rays(out: &Path) -> Verdict {
    let (_, dir) = run(Experiment::TraceRays, &shipped(), out);
    let drift = json(dir.join("rays_report.json"))["max_hamiltonian_drift"].as_f64().unwrap();
    let a = Arc::new(HyperbolicA { c0: 0.5, eps_a: 0.1 });
    let end = |h: f64| {
        let sys = RaySystem::new(Some(a.clone()), 0.0, h).unwrap();
        let r = trace_ray(&sys, 0.0, 1.0, 0.3, 5.0).unwrap();
        (*r.gamma_x.last().unwrap(), *r.gamma_xi.last().unwrap())
    };
    let hs = [0.2, 0.1, 0.05, 0.025, 0.0125];
    let ends: Vec<(f64, f64)> = hs.iter().map(|&h| end(h)).collect();
    let xs: Vec<f64> = hs[..4].iter().map(|h| h.log2()).collect();
    let ys: Vec<f64> = ends.windows(2).map(|w| ((w[0].0 - w[1].0).abs() + (w[0].1 - w[1].1).abs()).log2()).collect();
    let slope = fit_slope(&xs, &ys);
    let pass = drift <= 1e-8 && (slope - 4.0).abs() <= 0.3;
    verdict(pass, format!("Hamiltonian drift {drift:.2e} (≤ 1e-8), RK4 slope {slope:.3} (4 ± 0.3)"))
}

fn c7_energy(out: &Path) -> Verdict {
    let (_, dir) = run(Experiment::RunIvp, &without_a(), out);
    let r = json(dir.join("ivp_report.json"));
    let inc = r["max_step_increase"].as_f64().unwrap();
    let e2 = r["energy"][0]["pass"].as_bool().unwrap();
    let pass = r["monotone_required"].as_bool().unwrap() && inc <= 1e-9 && e2;
    verdict(pass, format!("max per-step norm increase {inc:.2e} (≤ 1e-9), energy at λ = 0: {e2}"))
}

fn c8_sqrt(out: &Path) -> Verdict {
    let (_, dir) = run(Experiment::SqrtCheck, &shipped(), out);
    let r = json(dir.join("sqrt_report.json"));
    let rr = &r["residual_report"];
    let slope = rr["fitted_exponents"][0].as_f64().unwrap_or(f64::NEG_INFINITY);
    let bound = rr["bound_exponents"][0].as_f64().unwrap();
    verdict(rr["pass"].as_bool().unwrap(), format!("k_max = 1 residual slope {slope:.3} (≤ {bound})"))
}

fn c9_egorov(out: &Path) -> Verdict {
    let (pass, dir) = run(Experiment::EgorovCheck, &shipped(), out);
    let slope = json(dir.join("egorov_report.json"))["slope"].as_f64().unwrap_or(f64::NEG_INFINITY);
    verdict(pass, format!("conjugation error slope {slope:.3} (≤ -0.7)"))
}

fn c10_vanishing(out: &Path) -> Verdict {
    let (_, dir) = run(Experiment::BuildParametrix, &without_a(), out);
    let r = json(dir.join("parametrix_report.json"));
    let k = r["max_abs_K_where_I_zero"].as_f64().unwrap();
    let n = r["points_with_zero_I"].as_u64().unwrap();
    verdict(k <= 1e-10 && n > 0, format!("sup |K^(j)| = {k:.2e} over {n} grid points with I = 0 (≤ 1e-10)"))
}

fn c11_determinism(out: &Path) -> Verdict {
    let mut small = without_a();
    small.grid.n = 64;
    small.run.band_k_list = vec![4, 8, 16];
    let runs: [(Experiment, _); 4] = [
        (Experiment::RunIvp, shipped()),
        (Experiment::TraceRays, shipped()),
        (Experiment::VerifySymbolClass, shipped()),
        (Experiment::Compare, small),
    ];
    let mut files = 0;
    let mut diffs = Vec::new();
    for (exp, cfg) in &runs {
        let (_, a) = run(*exp, cfg, &out.join("first"));
        let (_, b) = run(*exp, cfg, &out.join("second"));
        let ma = json(a.join("manifest.json"));
        let mb = json(b.join("manifest.json"));
        for (fa, fb) in ma["files"].as_array().unwrap().iter().zip(mb["files"].as_array().unwrap()) {
            files += 1;
            let same = fa == fb && std::fs::read(a.join(fa["path"].as_str().unwrap())).unwrap() == std::fs::read(b.join(fb["path"].as_str().unwrap())).unwrap();
            if !same {
                diffs.push(format!("{exp}/{}", fa["path"].as_str().unwrap()));
            }
        }
    }
    verdict(diffs.is_empty() && files > 0, format!("{files} files compared across two runs, differing: {diffs:?}"))
}

fn main() -> ExitCode {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path();
    let names = [
        "multiplier exactness",
        "order-improvement slope",
        "symbol-class certification",
        "I-bound certification",
        "h-family inequality",
        "ray tracer",
        "energy/dissipation",
        "square-root residual",
        "Egorov remainder",
        "vanishing region",
        "determinism",
    ];
    let mut doc = None;
    let mut mismatches = 0;
    for (i, name) in names.iter().enumerate() {
        let id = i + 1;
        let start = Instant::now();
        let v = match id {
            1 => c1_multiplier_exactness(out),
            2 => c2_order_improvement(out),
            3 => c3_exp_i_class(doc.get_or_insert_with(|| symbol_class(out))),
            4 => c4_i_bounds(doc.get_or_insert_with(|| symbol_class(out))),
            5 => c5_h_inequality(),
            6 => c6_rays(out),
            7 => c7_energy(out),
            8 => c8_sqrt(out),
            9 => c9_egorov(out),
            10 => c10_vanishing(out),
            _ => c11_determinism(out),
        };
        let expected = !EXPECTED_RED.contains(&id);
        let note = match (v.pass, expected) {
            (true, true) | (false, false) => "",
            (false, true) => "  <-- unexpected FAIL",
            (true, false) => "  <-- passes but is documented as FAIL; update the expectation",
        };
        if v.pass != expected {
            mismatches += 1;
        }
        println!(
            "criterion {id:>2} {name}: {} | {} [{:.1} s]{note}",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            start.elapsed().as_secs_f64()
        );
    }
    if mismatches == 0 {
        println!("acceptance: outcomes match expectations (documented red: {EXPECTED_RED:?})");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {mismatches} outcome(s) differ from expectations");
        ExitCode::FAILURE
    }
}
