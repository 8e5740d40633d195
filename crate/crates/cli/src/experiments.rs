//! The seven experiments. Each writes into `<out>/<name>/` and returns
//! whether its acceptance check passed.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use parametrix_core::egorov::{conjugation_errors, egorov_report};
use parametrix_core::estimates::{
    check_exp_i_class, check_i_derivative_bounds, check_z_uniform_bounds, dyadic_ladder, fit_growth_exponent, fit_slope,
    refinement_stability,
};
use parametrix_core::quantize::{fmt17, random_field, rel_error};
use parametrix_core::rays::trace_ray_damped;
use parametrix_core::solver::evolve_to;
use parametrix_core::sqrt::q_matrix;
use parametrix_core::symbol::{check_assumption_b1, check_h_inequality};
use parametrix_core::{
    build_parametrix, build_sqrt, conjugated_parametrix, energy_report, evolve, parametrix_apply, sqrt_residual_report,
    wave_packet, EstimateReport, Grid, IVPProblem, NormP, ParametrixSymbol, RaySystem, SampleSpec, WaveField,
};
use serde::Serialize;
use serde_json::json;

use crate::config::ExperimentConfig;
use crate::manifest::OutputDir;
use crate::RunError;

const FLOOR: f64 = 1e-300;
/// Relative errors below this count as exact in slope fits.
const EXACT: f64 = 1e-10;
const SUP_CAP: f64 = 1e6;
const EGOROV_BOUND: f64 = -0.7;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Experiment {
    RunIvp,
    TraceRays,
    BuildParametrix,
    Compare,
    VerifySymbolClass,
    SqrtCheck,
    EgorovCheck,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::RunIvp,
        Experiment::TraceRays,
        Experiment::BuildParametrix,
        Experiment::Compare,
        Experiment::VerifySymbolClass,
        Experiment::SqrtCheck,
        Experiment::EgorovCheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::RunIvp => "run-ivp",
            Experiment::TraceRays => "trace-rays",
            Experiment::BuildParametrix => "build-parametrix",
            Experiment::Compare => "compare",
            Experiment::VerifySymbolClass => "verify-symbol-class",
            Experiment::SqrtCheck => "sqrt-check",
            Experiment::EgorovCheck => "egorov-check",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| format!("unknown experiment {s:?}"))
    }
}

#[derive(Debug)]
pub struct Outcome {
    pub pass: bool,
    pub dir: PathBuf,
    pub manifest: PathBuf,
}

/// Runs one experiment into `<out_root>/<name>/` and writes its manifest.
pub fn run_experiment(exp: Experiment, cfg: &ExperimentConfig, out_root: &Path) -> Result<Outcome, RunError> {
    cfg.validate()?;
    let start = Instant::now();
    let mut out = OutputDir::create(out_root.join(exp.name()))?;
    let pass = match exp {
        Experiment::RunIvp => run_ivp(cfg, &mut out)?,
        Experiment::TraceRays => trace_rays(cfg, &mut out)?,
        Experiment::BuildParametrix => build(cfg, &mut out)?,
        Experiment::Compare => compare(cfg, &mut out)?,
        Experiment::VerifySymbolClass => verify_symbol_class(cfg, &mut out)?,
        Experiment::SqrtCheck => sqrt_check(cfg, &mut out)?,
        Experiment::EgorovCheck => egorov_check(cfg, &mut out)?,
    };
    let dir = out.path().to_path_buf();
    let echo = serde_json::to_value(cfg)?;
    let manifest = out.finish(exp.name(), pass, &echo, start.elapsed().as_secs_f64())?;
    Ok(Outcome { pass, dir, manifest })
}

fn finite_or_null(v: f64) -> serde_json::Value {
    if v.is_finite() {
        json!(v)
    } else {
        json!(null)
    }
}

/// log₂-slope of errors against K; −∞ when every error is below `EXACT`.
fn error_slope(ks: &[usize], errs: &[f64]) -> f64 {
    if errs.iter().all(|&e| e < EXACT) {
        return f64::NEG_INFINITY;
    }
    let xs: Vec<f64> = ks.iter().map(|&k| (k as f64).log2()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.max(FLOOR).log2()).collect();
    fit_slope(&xs, &ys)
}

fn snapshot_rows(u: &WaveField) -> impl Iterator<Item = String> + '_ {
    u.values
        .iter()
        .enumerate()
        .map(move |(j, v)| format!("{},{},{},{}", fmt17(u.z), j, fmt17(v.re), fmt17(v.im)))
}

#[derive(Serialize)]
struct EnergyJson {
    p: &'static str,
    lambda: f64,
    left: f64,
    right: f64,
    pass: bool,
}

fn run_ivp(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<bool, RunError> {
    let prob = cfg.problem()?;
    let (z0, z1) = (cfg.run.z0, cfg.run.z_max);
    let band = *cfg.run.band_k_list.last().unwrap();
    let u0 = random_field(&prob.grid, z0, band, cfg.run.seed);
    let trace = evolve(&prob, &u0, z1, true)?;

    out.write_csv(
        "ivp_norms.csv",
        "z,l2",
        trace.z_samples.iter().zip(&trace.l2_norms).map(|(z, n)| format!("{},{}", fmt17(*z), fmt17(*n))),
    )?;
    out.write_csv("ivp_snapshot.csv", "z,j,re,im", snapshot_rows(&u0).chain(snapshot_rows(trace.last())))?;
    let (c0, c1) = (u0.coeffs(), trace.last().coeffs());
    out.write_csv(
        "ivp_modes.csv",
        "k,initial_abs,terminal_abs",
        (0..prob.grid.n_points()).map(|i| format!("{},{},{}", prob.grid.k(i), fmt17(c0[i].norm()), fmt17(c1[i].norm()))),
    )?;

    let mut energies = Vec::new();
    for (p, name) in [(NormP::Two, "2"), (NormP::Infinity, "inf")] {
        let r = energy_report(&trace, 0.0, p)?;
        energies.push(EnergyJson { p: name, lambda: r.lambda, left: r.left, right: r.right, pass: r.pass });
    }
    let max_inc = trace.l2_norms.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    let monotone = max_inc <= 1e-9;
    // Op(a) is not skew-adjoint for x-dependent a, so monotonicity is only required at A = 0
    let need_monotone = prob.a.is_none();
    let pass = energies.iter().all(|e| e.pass) && (monotone || !need_monotone);
    out.write_json(
        "ivp_report.json",
        &json!({
            "energy": energies,
            "max_step_increase": max_inc,
            "monotone": monotone,
            "monotone_required": need_monotone,
            "steps": trace.z_samples.len() - 1,
            "pass": pass,
        }),
    )?;
    Ok(pass)
}

fn trace_rays(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<bool, RunError> {
    let prob = cfg.problem()?;
    let sys = RaySystem::new(prob.a.clone(), cfg.run.z0, cfg.grid.dz)?;
    let b = prob.b.as_ref();
    let mut index = Vec::new();
    let mut worst_drift = 0.0f64;
    let mut monotone = true;
    let mut id = 0;
    for &k in &cfg.run.band_k_list {
        for m in 0..8 {
            let (x0, xi0) = (2.0 * std::f64::consts::PI * m as f64 / 8.0, k as f64);
            let ray = trace_ray_damped(&sys, b, cfg.run.z_max, x0, xi0, cfg.grid.quad_dz)?;
            let drift = match &prob.a {
                Some(a) => {
                    let h0 = a.value(cfg.run.z0, x0, xi0);
                    (0..ray.z_samples.len())
                        .map(|i| (a.value(ray.z_samples[i], ray.gamma_x[i], ray.gamma_xi[i]) - h0).abs() / h0.abs().max(FLOOR))
                        .fold(0.0, f64::max)
                }
                None => 0.0,
            };
            let i = &ray.i_forward;
            monotone &= i[0] >= 0.0 && i.windows(2).all(|w| w[1] >= w[0]);
            worst_drift = worst_drift.max(drift);
            let name = format!("rays/ray_{id:03}.csv");
            out.write_csv(
                &name,
                "z,x,xi,I",
                (0..ray.z_samples.len()).map(|n| {
                    format!("{},{},{},{}", fmt17(ray.z_samples[n]), fmt17(ray.gamma_x[n]), fmt17(ray.gamma_xi[n]), fmt17(i[n]))
                }),
            )?;
            index.push(format!("{id},{},{},{},{}", fmt17(x0), fmt17(xi0), fmt17(drift), fmt17(*i.last().unwrap())));
            id += 1;
        }
    }
    out.write_csv("rays_index.csv", "ray,x0,xi0,hamiltonian_drift,i_terminal", index)?;
    let conserved = worst_drift <= 1e-8;
    let pass = conserved && monotone;
    out.write_json(
        "rays_report.json",
        &json!({ "rays": id, "max_hamiltonian_drift": worst_drift, "i_nondecreasing": monotone, "pass": pass }),
    )?;
    Ok(pass)
}

/// The parametrix for the configured problem: direct at A = 0, conjugated otherwise.
enum Parametrix {
    Direct(ParametrixSymbol),
    Conjugated(parametrix_core::parametrix::ConjugatedParametrix),
}

impl Parametrix {
    fn new(prob: &IVPProblem, j: usize, quad_dz: f64) -> Result<Self, RunError> {
        Ok(if prob.a.is_none() {
            Parametrix::Direct(build_parametrix(prob, j, quad_dz)?)
        } else {
            Parametrix::Conjugated(conjugated_parametrix(prob, j, quad_dz)?)
        })
    }

    fn symbol(&self) -> &ParametrixSymbol {
        match self {
            Parametrix::Direct(p) => p,
            Parametrix::Conjugated(c) => &c.ps,
        }
    }

    fn apply(&self, prob: &IVPProblem, u0: &WaveField, z: f64) -> Result<WaveField, RunError> {
        Ok(match self {
            Parametrix::Direct(p) => parametrix_apply(p, prob, u0, z)?,
            Parametrix::Conjugated(c) => c.apply(u0, z)?,
        })
    }
}

fn build(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<bool, RunError> {
    let prob = cfg.problem()?;
    let p = Parametrix::new(&prob, cfg.run.j, cfg.grid.quad_dz)?;
    let ps = p.symbol();
    let t = ps.tables(&prob.grid, cfg.run.z_max)?;
    let mut buf = Vec::new();
    t.w.write_csv(&mut buf)?;
    out.write("parametrix_W.csv", &buf)?;

    let zero_i: Vec<usize> = (0..t.i.len()).filter(|&p| t.i[p] == 0.0).collect();
    let vanish = t.k.iter().flat_map(|k| zero_i.iter().map(move |&p| k[p].norm())).fold(0.0, f64::max);
    let t0 = ps.tables(&prob.grid, cfg.run.z0)?;
    let w0_defect = t0.w.table.iter().map(|w| (w - 1.0).norm()).fold(0.0, f64::max);
    let pass = vanish <= 1e-10 && w0_defect <= 1e-12;
    out.write_json(
        "parametrix_report.json",
        &json!({
            "J": cfg.run.j,
            "z": cfg.run.z_max,
            "conjugated": matches!(p, Parametrix::Conjugated(_)),
            "points_with_zero_I": zero_i.len(),
            "max_abs_K_where_I_zero": vanish,
            "max_abs_W_minus_1_at_z0": w0_defect,
            "pass": pass,
        }),
    )?;
    Ok(pass)
}

fn compare(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<bool, RunError> {
    let prob = cfg.problem()?;
    let ks = &cfg.run.band_k_list;
    let (z0, z1) = (cfg.run.z0, cfg.run.z_max);
    let center = cfg.boundary_center();
    let order_gap = 1.0 - 2.0 * prob.params.delta();
    let data: Vec<WaveField> = ks.iter().map(|&k| wave_packet(&prob.grid, z0, k, center)).collect::<Result<_, _>>()?;
    let refs: Vec<WaveField> = data.iter().map(|u| evolve_to(&prob, u, z1, true)).collect::<Result<_, _>>()?;

    let mut rows = Vec::new();
    let mut per_j = Vec::new();
    let mut errs: Vec<Vec<f64>> = Vec::new();
    let mut pass = true;
    for j in 0..=cfg.run.j {
        let p = Parametrix::new(&prob, j, cfg.grid.quad_dz)?;
        let mut e = Vec::with_capacity(ks.len());
        for (u, r) in data.iter().zip(&refs) {
            e.push(rel_error(&p.apply(&prob, u, z1)?, r, FLOOR));
        }
        for (k, v) in ks.iter().zip(&e) {
            rows.push(format!("{k},{j},{}", fmt17(*v)));
        }
        let slope = error_slope(ks, &e);
        let bound = -((j + 1) as f64) * order_gap + 0.3 + 0.1 * j as f64;
        let improves = j == 0
            || e.iter().zip(&errs[j - 1]).all(|(now, before)| now < before || (*now < EXACT && *before < EXACT));
        let ok = slope <= bound && improves;
        pass &= ok;
        per_j.push(json!({
            "J": j,
            "slope": finite_or_null(slope),
            "exact": slope == f64::NEG_INFINITY,
            "bound": bound,
            "below_previous_J": improves,
            "pass": ok,
        }));
        errs.push(e);
    }
    out.write_csv("compare.csv", "K_band,J,rel_l2_error", rows)?;
    out.write_json(
        "compare_report.json",
        &json!({
            "center": center,
            "z": z1,
            "conjugated": prob.a.is_some(),
            "fits": per_j,
            "pass": pass,
        }),
    )?;
    Ok(pass)
}

/// Derivative orders (∂_x^a ∂_ξ^b) of I with total ≤ 3.
fn i_orders() -> Vec<[usize; 2]> {
    vec![[0, 0], [1, 0], [0, 1], [2, 0], [1, 1], [0, 2], [3, 0], [2, 1], [1, 2], [0, 3]]
}

fn z_orders() -> Vec<[usize; 3]> {
    vec![[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1], [0, 0, 2], [1, 0, 1], [2, 0, 0]]
}

fn verify_symbol_class(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<bool, RunError> {
    let prob = cfg.problem_without_a()?;
    let params = &prob.params;
    let rho = cfg.rho();
    let quad = cfg.grid.quad_dz;
    let base = SampleSpec::standard(params, rho.as_ref(), dyadic_ladder(3, 8), 1, cfg.run.seed);
    let fine = SampleSpec::standard(params, rho.as_ref(), dyadic_ladder(3, 8), 4, cfg.run.seed);

    let mut reports: Vec<EstimateReport> = Vec::new();
    reports.push(check_exp_i_class(&prob, 3, &base, quad, 0.15)?);
    let ib = check_i_derivative_bounds(&prob, &i_orders(), &base, quad, SUP_CAP)?;
    let ifn = check_i_derivative_bounds(&prob, &i_orders(), &fine, quad, SUP_CAP)?;
    let zb = check_z_uniform_bounds(&prob, &z_orders(), &base, quad, SUP_CAP)?;
    let zf = check_z_uniform_bounds(&prob, &z_orders(), &fine, quad, SUP_CAP)?;
    let (si, sz) = (refinement_stability(&ib, &ifn, 0.10)?, refinement_stability(&zb, &zf, 0.10)?);
    reports.extend([ib, zb, si, sz]);
    if let Some(family) = cfg.cutoff_family() {
        let n = 400;
        let (lo, hi) = (1e-4f64.ln(), family.beta.ln());
        let ys: Vec<f64> = (0..=n).map(|i| (lo + (hi - lo) * i as f64 / n as f64).exp()).collect();
        reports.push(check_h_inequality(&family, family.l as usize - 1, &ys, 1e20)?);
    }
    let orders: Vec<[usize; 3]> = (0..params.l as usize)
        .flat_map(|t| (0..=t).flat_map(move |a| (0..=t - a).map(move |b| [a, b, t - a - b])))
        .collect();
    reports.push(check_assumption_b1(prob.b.as_ref(), params, &orders, &base, SUP_CAP)?);

    let pass = reports.iter().all(|r| r.pass);
    let failing: Vec<&str> = reports.iter().filter(|r| !r.pass).map(|r| r.claim_id.as_str()).collect();
    out.write_json("symbol_class.json", &json!({ "pass": pass, "failing": failing, "reports": reports }))?;
    Ok(pass)
}

fn sqrt_check(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<bool, RunError> {
    let prob = cfg.problem_without_a()?;
    let params = &prob.params;
    let z = cfg.run.z0;
    let q = build_sqrt(prob.b.clone(), None, params, cfg.run.k_max)?;
    let center = cfg.boundary_center();
    let residual = sqrt_residual_report(&q, params, &prob.grid, z, &cfg.run.band_k_list, center)?;
    out.write_csv(
        "sqrt_residuals.csv",
        "band_K,residual",
        cfg.run.band_k_list.iter().zip(&residual.sup_constants).map(|(k, r)| format!("{k},{}", fmt17(*r))),
    )?;

    // order ladder of the stored terms over the estimate sample set
    let rho = cfg.rho();
    let sample = SampleSpec::standard(params, rho.as_ref(), dyadic_ladder(3, 8), 1, cfg.run.seed);
    let ns = sample.x.len();
    let mut vals = vec![Vec::with_capacity(sample.xi.len() * ns); q.k_max + 1];
    for &xi in &sample.xi {
        for &x in &sample.x {
            for (k, t) in q.terms_at(z, x, xi, 0)?.iter().enumerate() {
                vals[k].push(t.value());
            }
        }
    }
    let gap = 1.0 - 2.0 * params.delta();
    let mut ladder = EstimateReport::new("sqrt_order_ladder".into(), 0.15);
    for (k, v) in vals.iter().enumerate() {
        let fit = fit_growth_exponent(v, &sample.xi, ns)?;
        if fit.vacuous {
            ladder.notes.push(format!("Q^({k}) numerically zero, vacuous"));
        }
        ladder.push_exponent([k, 0, 0], fit.exponent, params.gamma / 2.0 - k as f64 * gap);
    }
    ladder.finish();

    let small = Grid::new(cfg.grid.n.min(64))?;
    let m = q_matrix(&q.tables(&small, z)?, &small)?;
    let n = small.n_points();
    let (mut num, mut den) = (0.0, 0.0);
    for r in 0..n {
        for c in 0..n {
            num += (m[c][r] - m[r][c].conj()).norm_sqr();
            den += m[c][r].norm_sqr();
        }
    }
    let hermitian_defect = (num / den).sqrt();
    let hermitian = hermitian_defect <= 1e-8;

    let pass = residual.pass && ladder.pass && hermitian;
    let slope = residual.fitted_exponents[0];
    out.write_json(
        "sqrt_report.json",
        &json!({
            "k_max": q.k_max,
            "center": center,
            "band_K": cfg.run.band_k_list,
            "residuals": residual.sup_constants,
            "slope": finite_or_null(slope),
            "bound": residual.bound_exponents[0],
            "residual_report": residual,
            "order_ladder": ladder,
            "hermitian_grid_n": n,
            "hermitian_defect": hermitian_defect,
            "pass": pass,
        }),
    )?;
    Ok(pass)
}

fn egorov_check(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<bool, RunError> {
    let prob = cfg.problem()?;
    let grid = &prob.grid;
    let z = cfg.run.z_max;
    // centre at the grid maximum of b at the top frequency: the packet sits where Op(b ∘ Φ)u is large
    let k_top = *cfg.run.band_k_list.last().unwrap() as f64;
    let center = (0..grid.n_points())
        .map(|j| (grid.x(j), prob.b.value(cfg.run.z0, grid.x(j), k_top)))
        .fold((std::f64::consts::PI, f64::NEG_INFINITY), |acc, p| if p.1 > acc.1 { p } else { acc })
        .0;
    let probes = conjugation_errors(&prob, z, &cfg.run.band_k_list, center)?;
    let report = egorov_report(&probes, EGOROV_BOUND);
    out.write_csv(
        "egorov.csv",
        "band_K,rel_error",
        probes.iter().map(|p| format!("{},{}", p.band_k, fmt17(p.rel_error))),
    )?;
    out.write_json(
        "egorov_report.json",
        &json!({
            "z": z,
            "center": center,
            "slope": finite_or_null(report.fitted_exponents[0]),
            "bound": EGOROV_BOUND,
            "report": report,
            "pass": report.pass,
        }),
    )?;
    Ok(report.pass)
}
