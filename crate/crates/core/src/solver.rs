//! Spectral method-of-lines reference solver for ∂_z u = (iA − B) u.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::quantize::{GridSymbol, Grid, WaveField};
use crate::symbol::{AssumptionParams, Symbol, SymbolKind};

type C64 = Complex64;

#[derive(Clone)]
pub struct IVPProblem {
    pub a: Option<Symbol>,
    pub b: Symbol,
    pub bs: Option<Symbol>,
    pub params: AssumptionParams,
    pub grid: Grid,
    pub dz: f64,
}

impl IVPProblem {
    pub fn new(a: Option<Symbol>, b: Symbol, bs: Option<Symbol>, params: AssumptionParams, grid: Grid, dz: f64) -> Result<Self> {
        if b.info().kind != SymbolKind::DissipativeB {
            return Err(Error::InvalidParameter("b must be a dissipative symbol".into()));
        }
        if let Some(a) = &a {
            if a.info().kind != SymbolKind::HyperbolicA {
                return Err(Error::InvalidParameter("a must be a hyperbolic symbol".into()));
            }
        }
        let prob = IVPProblem { a, b, bs, params, grid, dz };
        let cap = prob.stability_cap();
        if !(dz > 0.0) || dz > cap {
            return Err(Error::InvalidParameter(format!("dz = {dz} outside (0, {cap:.6e}]")));
        }
        Ok(prob)
    }

    pub fn z0(&self) -> f64 {
        self.params.z0
    }

    /// 1 / ((1 + max|a_ξ|) K_max + β_max K_max^γ), with the maxima scanned
    /// on the grid at z0 and Z.
    pub fn stability_cap(&self) -> f64 {
        let kmax = self.grid.k_max() as f64;
        let gamma = self.params.gamma;
        let (mut amax, mut bmax) = (0.0f64, 0.0f64);
        for z in [self.params.z0, self.params.z_max] {
            for j in 0..self.grid.n_points() {
                let x = self.grid.x(j);
                for idx in 0..self.grid.n_points() {
                    let xi = self.grid.k(idx) as f64;
                    if let Some(a) = &self.a {
                        if let Ok((a_xi, _)) = a.field_value(z, x, xi) {
                            amax = amax.max(a_xi.abs());
                        }
                    }
                    let w = (1.0 + xi * xi).powf(gamma / 2.0);
                    bmax = bmax.max(self.b.value(z, x, xi) / w);
                }
            }
        }
        1.0 / ((1.0 + amax) * kmax + bmax * kmax.powf(gamma))
    }

    fn generator(&self, z: f64, include_b: bool) -> GridSymbol {
        GridSymbol::from_fn(&self.grid, z, |x, xi| {
            let mut v = C64::new(0.0, 0.0);
            if let Some(a) = &self.a {
                v += C64::new(0.0, a.value(z, x, xi));
            }
            if include_b {
                v -= self.b.value(z, x, xi);
                if let Some(bs) = &self.bs {
                    v -= bs.value(z, x, xi);
                }
            }
            v
        })
    }

    fn z_independent(&self, include_b: bool) -> bool {
        let a_ok = self.a.as_ref().is_none_or(|a| a.info().z_independent);
        let b_ok = !include_b
            || (self.b.info().z_independent && self.bs.as_ref().is_none_or(|s| s.info().z_independent));
        a_ok && b_ok
    }
}

/// Generator table with phases folded in: row j holds f(x_j, k) e^{i k x_j}.
struct Phased {
    rows: Vec<C64>,
    n: usize,
}

impl Phased {
    fn new(sym: &GridSymbol) -> Self {
        let g = &sym.grid;
        let n = g.n_points();
        let rows = (0..n * n)
            .into_par_iter()
            .map(|i| sym.table[i] * g.phase(i / n, g.k(i % n)))
            .collect();
        Phased { rows, n }
    }

    fn apply(&self, grid: &Grid, u: &[C64]) -> Vec<C64> {
        let uh = crate::quantize::dft(grid, u);
        let n = self.n;
        (0..n)
            .into_par_iter()
            .map(|j| {
                let row = &self.rows[j * n..(j + 1) * n];
                let mut s = C64::new(0.0, 0.0);
                for idx in 0..n {
                    s += row[idx] * uh[idx];
                }
                s
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvolutionTrace {
    pub z_samples: Vec<f64>,
    pub fields: Vec<WaveField>,
    pub l2_norms: Vec<f64>,
}

impl EvolutionTrace {
    pub fn last(&self) -> &WaveField {
        self.fields.last().unwrap()
    }
}

fn axpy(u: &[C64], k: &[C64], s: f64) -> Vec<C64> {
    u.iter().zip(k).map(|(a, b)| a + b * s).collect()
}

/// RK4 from u.z to z_to (either direction); `keep` stores every step.
fn integrate(prob: &IVPProblem, u: &WaveField, z_to: f64, include_b: bool, keep: bool) -> Result<EvolutionTrace> {
    if u.grid.n_points() != prob.grid.n_points() {
        return Err(Error::GridMismatch(u.grid.n_points(), prob.grid.n_points()));
    }
    let z_from = u.z;
    let n0 = u.norm();
    let mut trace = EvolutionTrace {
        z_samples: vec![z_from],
        fields: vec![u.clone()],
        l2_norms: vec![n0],
    };
    if z_to == z_from || (prob.a.is_none() && !include_b) {
        if z_to != z_from {
            let mut v = u.clone();
            v.z = z_to;
            trace.z_samples.push(z_to);
            trace.l2_norms.push(n0);
            trace.fields.push(v);
        }
        return Ok(trace);
    }
    let steps = crate::rays::n_steps(z_to - z_from, prob.dz);
    let h = (z_to - z_from) / steps as f64;
    let fixed = prob.z_independent(include_b).then(|| Phased::new(&prob.generator(z_from, include_b)));
    let grid = &prob.grid;
    let mut cur = u.values.clone();
    let mut cache: Option<(f64, std::sync::Arc<Phased>)> = None;
    let mut table = |z: f64| -> std::sync::Arc<Phased> {
        if let Some((zc, t)) = &cache {
            if *zc == z {
                return t.clone();
            }
        }
        let t = std::sync::Arc::new(Phased::new(&prob.generator(z, include_b)));
        cache = Some((z, t.clone()));
        t
    };
    for s in 0..steps {
        let z = z_from + h * s as f64;
        let (k1, k2, k3, k4) = match &fixed {
            Some(op) => {
                let k1 = op.apply(grid, &cur);
                let k2 = op.apply(grid, &axpy(&cur, &k1, h / 2.0));
                let k3 = op.apply(grid, &axpy(&cur, &k2, h / 2.0));
                let k4 = op.apply(grid, &axpy(&cur, &k3, h));
                (k1, k2, k3, k4)
            }
            None => {
                let t0 = table(z);
                let k1 = t0.apply(grid, &cur);
                let th = std::sync::Arc::new(Phased::new(&prob.generator(z + h / 2.0, include_b)));
                let k2 = th.apply(grid, &axpy(&cur, &k1, h / 2.0));
                let k3 = th.apply(grid, &axpy(&cur, &k2, h / 2.0));
                let k4 = table(z + h).apply(grid, &axpy(&cur, &k3, h));
                (k1, k2, k3, k4)
            }
        };
        for i in 0..cur.len() {
            cur[i] += (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (h / 6.0);
        }
        let zn = if s + 1 == steps { z_to } else { z_from + h * (s + 1) as f64 };
        let field = WaveField {
            grid: grid.clone(),
            z: zn,
            values: cur.clone(),
        };
        let nrm = field.norm();
        if !field.is_finite() || nrm > 1e6 * n0.max(f64::MIN_POSITIVE) {
            return Err(Error::Instability { z: zn, ratio: nrm / n0 });
        }
        if keep || s + 1 == steps {
            trace.z_samples.push(zn);
            trace.l2_norms.push(nrm);
            trace.fields.push(field);
        }
    }
    Ok(trace)
}

/// RK4 method of lines from u0 (at u0.z) to z_to; E when include_b, else E0.
pub fn evolve(prob: &IVPProblem, u0: &WaveField, z_to: f64, include_b: bool) -> Result<EvolutionTrace> {
    if z_to < u0.z || z_to > prob.params.z_max + 1e-12 || u0.z < prob.z0() - 1e-12 {
        return Err(Error::InvalidInput(format!(
            "evolution from {} to {z_to} leaves [{}, {}]",
            u0.z,
            prob.z0(),
            prob.params.z_max
        )));
    }
    integrate(prob, u0, z_to, include_b, true)
}

/// Terminal field only.
pub fn evolve_to(prob: &IVPProblem, u0: &WaveField, z_to: f64, include_b: bool) -> Result<WaveField> {
    if z_to < u0.z {
        return Err(Error::InvalidInput(format!("cannot evolve backward from {} to {z_to}", u0.z)));
    }
    Ok(integrate(prob, u0, z_to, include_b, false)?.fields.pop().unwrap())
}

/// Hyperbolic flow between z_from and z_to in either order (E0 or E0^{-1}).
pub fn evolve_inverse_e0(prob: &IVPProblem, u: &WaveField, z_from: f64, z_to: f64) -> Result<WaveField> {
    let lo = prob.z0() - 1e-12;
    let hi = prob.params.z_max + 1e-12;
    if !(lo..=hi).contains(&z_from) || !(lo..=hi).contains(&z_to) {
        return Err(Error::InvalidInput(format!("z range [{z_from}, {z_to}] outside the problem")));
    }
    let mut v = u.clone();
    v.z = z_from;
    Ok(integrate(prob, &v, z_to, false, false)?.fields.pop().unwrap())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormP {
    Two,
    Infinity,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnergyReport {
    pub lambda: f64,
    pub left: f64,
    pub right: f64,
    pub max_step_increase: f64,
    pub pass: bool,
}

/// Homogeneous energy inequality on a trace:
/// (½ ∫ ‖e^{−λ(z−z0)} u‖^p dz)^{1/p} ≤ ‖u(z0)‖, the max for p = ∞.
pub fn energy_report(trace: &EvolutionTrace, lambda: f64, p: NormP) -> Result<EnergyReport> {
    if trace.z_samples.is_empty() {
        return Err(Error::InvalidInput("empty trace".into()));
    }
    let z0 = trace.z_samples[0];
    let w: Vec<f64> = trace
        .z_samples
        .iter()
        .zip(&trace.l2_norms)
        .map(|(z, n)| (-lambda * (z - z0)).exp() * n)
        .collect();
    let left = match p {
        NormP::Infinity => w.iter().cloned().fold(0.0, f64::max),
        NormP::Two => {
            let mut s = 0.0;
            for i in 1..w.len() {
                let dz = trace.z_samples[i] - trace.z_samples[i - 1];
                s += 0.5 * dz * (w[i] * w[i] + w[i - 1] * w[i - 1]);
            }
            (0.5 * s).sqrt()
        }
    };
    let right = trace.l2_norms[0];
    let max_step_increase = trace
        .l2_norms
        .windows(2)
        .map(|p| p[1] - p[0])
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(EnergyReport {
        lambda,
        left,
        right,
        max_step_increase,
        pass: left <= right + 1e-6,
    })
}
