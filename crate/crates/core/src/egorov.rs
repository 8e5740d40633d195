//! Leading-order Egorov check: E0^{-1} Op(b) E0 against Op(b ∘ Φ).

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimates::{fit_slope, EstimateReport};
use crate::quantize::{apply_op, rel_error, wave_packet, Grid, GridSymbol, WaveField};
use crate::rays::{PullbackSymbol, RaySystem};
use crate::solver::{evolve_inverse_e0, evolve_to, IVPProblem};

const FLOOR: f64 = 1e-300;

#[derive(Clone, Debug)]
pub struct ConjugationProbe {
    pub z: f64,
    pub band_k: usize,
    pub conj_result: WaveField,
    pub pullback_result: WaveField,
    pub rel_error: f64,
}

fn pullback_table(prob: &IVPProblem, z: f64) -> Result<GridSymbol> {
    let sys = RaySystem::new(prob.a.clone(), prob.z0(), prob.dz)?;
    let pb = PullbackSymbol { sys, b: prob.b.clone() };
    let t = GridSymbol::from_model(&pb, &prob.grid, z);
    if !t.is_finite() {
        return Err(Error::InvalidInput("pullback symbol is not finite on the grid".into()));
    }
    Ok(t)
}

fn conjugate(prob: &IVPProblem, bt: &GridSymbol, u: &WaveField, z: f64) -> Result<WaveField> {
    let v = evolve_to(prob, u, z, false)?;
    let w = apply_op(bt, &v)?;
    evolve_inverse_e0(prob, &w, z, prob.z0())
}

fn probe_with(prob: &IVPProblem, bt: &GridSymbol, pt: &GridSymbol, z: f64, band_k: usize, center: f64) -> Result<ConjugationProbe> {
    let u = wave_packet(&prob.grid, prob.z0(), band_k, center)?;
    let conj = conjugate(prob, bt, &u, z)?;
    let pull = apply_op(pt, &u)?;
    Ok(ConjugationProbe {
        z,
        band_k,
        rel_error: rel_error(&conj, &pull, FLOOR),
        conj_result: conj,
        pullback_result: pull,
    })
}

fn check_z(prob: &IVPProblem, z: f64) -> Result<()> {
    if !(z > prob.z0() && z <= prob.params.z_max) {
        return Err(Error::InvalidInput(format!("z = {z} outside ]z0, Z]")));
    }
    Ok(())
}

/// E0(z,z0)^{-1} Op(b(z)) E0(z,z0) u_K against Op(b ∘ Φ_{z,z0}) u_K for a
/// packet centred at `center`.
pub fn conjugation_error(prob: &IVPProblem, z: f64, band_k: usize, center: f64) -> Result<ConjugationProbe> {
    check_z(prob, z)?;
    let bt = GridSymbol::from_model(prob.b.as_ref(), &prob.grid, z);
    let pt = pullback_table(prob, z)?;
    probe_with(prob, &bt, &pt, z, band_k, center)
}

/// One probe per K, sharing the symbol tables.
pub fn conjugation_errors(prob: &IVPProblem, z: f64, band_k_list: &[usize], center: f64) -> Result<Vec<ConjugationProbe>> {
    check_z(prob, z)?;
    let bt = GridSymbol::from_model(prob.b.as_ref(), &prob.grid, z);
    let pt = pullback_table(prob, z)?;
    band_k_list
        .par_iter()
        .map(|&k| probe_with(prob, &bt, &pt, z, k, center))
        .collect()
}

/// Fitted log₂ slope of rel_error against K; pass iff slope ≤ `bound`.
pub fn egorov_report(probes: &[ConjugationProbe], bound: f64) -> EstimateReport {
    let mut report = EstimateReport::new("egorov_remainder".into(), 0.0);
    let xs: Vec<f64> = probes.iter().map(|p| (p.band_k as f64).log2()).collect();
    let errs: Vec<f64> = probes.iter().map(|p| p.rel_error).collect();
    let slope = if errs.iter().all(|&e| e < 1e-12) {
        report.notes.push("conjugation exact to round-off at every K".into());
        f64::NEG_INFINITY
    } else {
        let ys: Vec<f64> = errs.iter().map(|e| e.max(FLOOR).log2()).collect();
        fit_slope(&xs, &ys)
    };
    report.push_exponent([0, 0, 0], slope, bound);
    report.sup_constants = errs;
    report.notes.push("rel_error per K stored in sup_constants".into());
    report.finish();
    report
}

/// Dense matrices of E0^{-1} Op(b) E0 and Op(b ∘ Φ) at z, by columns.
pub fn conjugation_matrices(prob: &IVPProblem, z: f64) -> Result<(Vec<Vec<num_complex::Complex64>>, Vec<Vec<num_complex::Complex64>>)> {
    check_z(prob, z)?;
    let grid: &Grid = &prob.grid;
    let n = grid.n_points();
    if n > 128 {
        return Err(Error::InvalidInput("matrix materialization is limited to N <= 128".into()));
    }
    let bt = GridSymbol::from_model(prob.b.as_ref(), grid, z);
    let pt = pullback_table(prob, z)?;
    let cols = (0..n)
        .into_par_iter()
        .map(|c| {
            let mut e = WaveField::zeros(grid, prob.z0());
            e.values[c] = num_complex::Complex64::new(1.0, 0.0);
            Ok((conjugate(prob, &bt, &e, z)?.values, apply_op(&pt, &e)?.values))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(cols.into_iter().unzip())
}
