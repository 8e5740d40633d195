//! Finite-order square root Q of 1 + B.
//!
//! Every term is realized as ½(Op(q) + Op(q)^H). Symbols carry a grade: the
//! term Q^(k) has grade k, and each pair ∂_ξ ∂_x in a composition or adjoint
//! expansion adds one. R^(k) = Q_{<k} # Q_{<k} − 1 − B is formed up to grade
//! k_max + 1 and Q^(k) = Re[−½ (1+b)^{−1/2} · (grade-k part of R^(k))].

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimates::{fit_slope, EstimateReport};
use crate::jet::{Axis, CJet, Jet, RJet};
use crate::quantize::{apply_adjoint, apply_op, apply_symmetrized, GridSymbol, Grid, WaveField};
use crate::symbol::{AssumptionParams, Symbol};

type C64 = Complex64;

pub struct SqrtSymbol {
    pub k_max: usize,
    b: Symbol,
    bs: Option<Symbol>,
}

/// Symbol components by grade.
type Graded = Vec<Option<CJet>>;

fn add_at(g: &mut Graded, grade: usize, t: CJet) {
    if grade >= g.len() {
        return;
    }
    g[grade] = Some(match g[grade].take() {
        None => t,
        Some(a) => &a + &t,
    });
}

fn minus_i_over_fact(m: usize) -> C64 {
    let p = [C64::new(1.0, 0.0), C64::new(0.0, -1.0), C64::new(-1.0, 0.0), C64::new(0.0, 1.0)][m % 4];
    p / (1..=m).fold(1.0, |a, k| a * k as f64)
}

fn mixed(q: &CJet, d: usize) -> Option<CJet> {
    if q.order() < 2 * d {
        return None;
    }
    Some(q.diff_n(Axis::Xi, d).diff_n(Axis::X, d))
}

/// Symbol of ½(Op(q) + Op(q)^H) for real q placed at `grade`.
fn symmetrized(q: &RJet, grade: usize, top: usize) -> Graded {
    let q = q.to_complex();
    let mut g: Graded = vec![None; top + 1];
    add_at(&mut g, grade, q.clone());
    for d in 1..=top.saturating_sub(grade) {
        if let Some(t) = mixed(&q, d) {
            add_at(&mut g, grade + d, t.mul_scalar(minus_i_over_fact(d) * 0.5));
        }
    }
    g
}

fn compose(f: &Graded, g: &Graded, top: usize) -> Graded {
    let mut out: Graded = vec![None; top + 1];
    for (a, fa) in f.iter().enumerate() {
        let Some(fa) = fa else { continue };
        for (b, gb) in g.iter().enumerate() {
            let Some(gb) = gb else { continue };
            for m in 0..=top.saturating_sub(a + b) {
                if fa.order() < m || gb.order() < m {
                    break;
                }
                let t = &fa.diff_n(Axis::Xi, m) * &gb.diff_n(Axis::X, m);
                add_at(&mut out, a + b + m, t.mul_scalar(minus_i_over_fact(m)));
            }
        }
    }
    out
}

fn sum_graded(parts: &[Graded], top: usize) -> Graded {
    let mut out: Graded = vec![None; top + 1];
    for p in parts {
        for (g, t) in p.iter().enumerate() {
            if let Some(t) = t {
                add_at(&mut out, g, t.clone());
            }
        }
    }
    out
}

impl SqrtSymbol {
    fn top(&self) -> usize {
        self.k_max + 1
    }

    fn base_order(&self, extra: usize) -> usize {
        2 * self.top() + extra
    }

    fn b_hat(&self, bj: &RJet, bsj: Option<&RJet>) -> Graded {
        let top = self.top();
        let mut parts = vec![symmetrized(bj, 0, top)];
        if let Some(s) = bsj {
            parts.push(symmetrized(s, 1, top));
        }
        sum_graded(&parts, top)
    }

    /// Jets of Q^(0..=k_max) at a point and the graded residual R^(k_max+1).
    fn build_at(&self, z: f64, x: f64, xi: f64, extra: usize) -> Result<(Vec<RJet>, Graded)> {
        let top = self.top();
        let n = self.base_order(extra);
        let bj = self.b.jet(z, x, xi, n)?;
        let bsj = match &self.bs {
            Some(s) => Some(s.jet(z, x, xi, n)?),
            None => None,
        };
        let one_b = bj.add_const(1.0);
        let q0 = one_b.sqrt();
        let inv_half = one_b.powf(-0.5).scale(-0.5);
        let b_hat = self.b_hat(&bj, bsj.as_ref());
        let mut terms = vec![q0];
        let residual = |terms: &[RJet]| -> Graded {
            let parts: Vec<Graded> = terms.iter().enumerate().map(|(g, q)| symmetrized(q, g, top)).collect();
            let q = sum_graded(&parts, top);
            let mut r = compose(&q, &q, top);
            let minus_one = CJet::constant(C64::new(-1.0, 0.0), n);
            add_at(&mut r, 0, minus_one);
            for (g, t) in b_hat.iter().enumerate() {
                if let Some(t) = t {
                    add_at(&mut r, g, -t);
                }
            }
            r
        };
        for k in 1..=self.k_max {
            let r = residual(&terms);
            let qk = match &r[k] {
                Some(rk) => (&rk.re() * &inv_half).truncate(rk.order()),
                None => Jet::zero(0),
            };
            terms.push(qk);
        }
        let r = residual(&terms);
        Ok((terms, r))
    }

    /// Jets of the stored terms Q^(0..=k_max) with `extra` spare orders.
    pub fn terms_at(&self, z: f64, x: f64, xi: f64, extra: usize) -> Result<Vec<RJet>> {
        Ok(self.build_at(z, x, xi, extra)?.0)
    }

    /// Value of the residual symbol Q#Q − 1 − B (all grades up to k_max + 1).
    pub fn residual_symbol(&self, z: f64, x: f64, xi: f64) -> Result<C64> {
        let (_, r) = self.build_at(z, x, xi, 0)?;
        Ok(r.iter().flatten().map(|t| t.value()).sum())
    }

    /// Grid tables of Q^(0..=k_max).
    pub fn tables(&self, grid: &Grid, z: f64) -> Result<Vec<GridSymbol>> {
        let n = grid.n_points();
        let vals = (0..n * n)
            .into_par_iter()
            .map(|p| {
                let t = self.terms_at(z, grid.x(p / n), grid.k(p % n) as f64, 0)?;
                Ok(t.iter().map(|q| q.value()).collect::<Vec<f64>>())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((0..=self.k_max)
            .map(|k| GridSymbol {
                grid: grid.clone(),
                z,
                table: vals.iter().map(|v| C64::new(v[k], 0.0)).collect(),
            })
            .collect())
    }
}

pub fn build_sqrt(b: Symbol, bs: Option<Symbol>, params: &AssumptionParams, k_max: usize) -> Result<SqrtSymbol> {
    if !(2.0 * params.gamma < params.l as f64) {
        return Err(Error::InvalidParameter("need 2 gamma < L".into()));
    }
    let s = SqrtSymbol { k_max, b, bs };
    if s.base_order(0) > s.b.info().max_deriv_order {
        return Err(Error::UnsupportedOrder {
            requested: s.base_order(0),
            max: s.b.info().max_deriv_order,
        });
    }
    Ok(s)
}

/// Op(Q) u = Σ_k ½(Op(q_k) + Op(q_k)^H) u.
pub fn apply_q(tables: &[GridSymbol], u: &WaveField) -> Result<WaveField> {
    let mut out = WaveField::zeros(&u.grid, u.z);
    for t in tables {
        let v = apply_symmetrized(t, u)?;
        for (o, x) in out.values.iter_mut().zip(&v.values) {
            *o += x;
        }
    }
    Ok(out)
}

/// ‖Op(Q)² u − u − B_sym u‖ / ‖u‖ for packets at each K; the slope
/// threshold is −(k_max+1)(1 − 2γ/L) + 0.5.
pub fn sqrt_residual_report(
    q: &SqrtSymbol,
    params: &AssumptionParams,
    grid: &Grid,
    z: f64,
    band_k_list: &[usize],
    center: f64,
) -> Result<EstimateReport> {
    let tables = q.tables(grid, z)?;
    let bt = GridSymbol::from_model(q.b.as_ref(), grid, z);
    let bst = q.bs.as_ref().map(|s| GridSymbol::from_model(s.as_ref(), grid, z));
    let mut res = Vec::with_capacity(band_k_list.len());
    for &k in band_k_list {
        let u = crate::quantize::wave_packet(grid, z, k, center)?;
        let qu = apply_q(&tables, &u)?;
        let qqu = apply_q(&tables, &qu)?;
        let mut bu = apply_symmetrized(&bt, &u)?;
        if let Some(s) = &bst {
            let v = apply_symmetrized(s, &u)?;
            for (o, x) in bu.values.iter_mut().zip(&v.values) {
                *o += x;
            }
        }
        let mut r = qqu.sub(&u).sub(&bu);
        r.z = z;
        res.push(r.norm() / u.norm());
    }
    let delta = 1.0 - 2.0 * params.delta();
    let bound = -((q.k_max + 1) as f64) * delta + 0.5;
    let mut report = EstimateReport::new(format!("sqrt_residual_kmax{}", q.k_max), 0.0);
    let ks: Vec<f64> = band_k_list.iter().map(|&k| (k as f64).log2()).collect();
    let slope = if res.iter().all(|&r| r < 1e-10) {
        report.notes.push("residual numerically zero at every K".into());
        f64::NEG_INFINITY
    } else {
        let ys: Vec<f64> = res.iter().map(|r| r.max(1e-300).log2()).collect();
        fit_slope(&ks, &ys)
    };
    report.push_exponent([0, 0, 0], slope, bound);
    report.sup_constants = res;
    report.notes.push("residual per K stored in sup_constants, in band_K order".into());
    report.notes.push("terms are symmetrized as ½(Op(q)+Op(q)^H); B is replaced by its self-adjoint part".into());
    report.finish();
    Ok(report)
}

/// Dense matrix of Op(Q) by columns (N ≤ 128).
pub fn q_matrix(tables: &[GridSymbol], grid: &Grid) -> Result<Vec<Vec<C64>>> {
    let n = grid.n_points();
    if n > 128 {
        return Err(Error::InvalidInput("matrix materialization is limited to N <= 128".into()));
    }
    (0..n)
        .map(|c| {
            let mut e = WaveField::zeros(grid, 0.0);
            e.values[c] = C64::new(1.0, 0.0);
            Ok(apply_q(tables, &e)?.values)
        })
        .collect()
}

/// Unsymmetrized pair for reference: Op(q) u and Op(q)^H u.
pub fn op_and_adjoint(t: &GridSymbol, u: &WaveField) -> Result<(WaveField, WaveField)> {
    Ok((apply_op(t, u)?, apply_adjoint(t, u)?))
}
