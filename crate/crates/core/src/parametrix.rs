//! W = (1 + Σ_{j≤J} K^(j)) exp(−I) for A = 0, and its conjugated form.
//!
//! Per (x, ξ) column the construction runs on a uniform z grid:
//! I is the running integral of b, and
//!   K^(k) = −∫ Σ_{j=1}^{k} M^(k−j+1)[K^(j−1)],
//!   M^(l)[K] = ((−i)^l / l!) ∂_ξ^l b · H_l[K] + ((−i)^{l−1}/(l−1)!) ∂_ξ^{l−1} B_s · H_{l−1}[K],
//! where H_0 = K and H_{m+1} = ∂_x H_m − ∂_x I · H_m, i.e. H_m = e^{I} ∂_x^m (K e^{−I}).

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::jet::{Axis, CJet, Jet, RJet};
use crate::quantize::{apply_op, GridSymbol, Grid, JetSymbol, WaveField};
use crate::rays::{cumulative_simpson, n_steps, simpson_nodes, flow_jets_on_nodes, RaySystem};
use crate::solver::{evolve_to, IVPProblem};
use crate::symbol::{Symbol, SymbolModel};

type C64 = Complex64;

pub const MAX_J: usize = 4;

#[derive(Clone)]
enum Source {
    Direct { b: Symbol, bs: Option<Symbol> },
    /// b̃(z, x, ξ) = b(z, Φ_{z,z0}(x, ξ)); rays share the quadrature nodes.
    Pullback { sys: RaySystem, b: Symbol },
}

/// Jets of I and K^(1..J) at one (z, x, ξ).
#[derive(Clone, Debug)]
pub struct Column {
    pub i: RJet,
    pub k: Vec<CJet>,
}

impl Column {
    pub fn assembled(&self) -> C64 {
        let s: C64 = self.k.iter().map(|k| k.value()).sum();
        (C64::new(1.0, 0.0) + s) * (-self.i.value()).exp()
    }
}

/// M^(j,l) and r^(k,l) jets at one point.
#[derive(Clone, Debug, Default)]
pub struct CompositionLedger {
    pub m_table: BTreeMap<(usize, usize), CJet>,
    pub r_table: BTreeMap<(usize, usize), CJet>,
}

pub struct GridTables {
    pub z: f64,
    pub i: Vec<f64>,
    pub k: Vec<Vec<C64>>,
    pub w: GridSymbol,
}

pub struct ParametrixSymbol {
    pub order_j: usize,
    pub z0: f64,
    pub quad_dz: f64,
    source: Source,
    cache: Mutex<HashMap<(u64, usize), Arc<GridTables>>>,
}

fn minus_i_pow(m: usize) -> C64 {
    [C64::new(1.0, 0.0), C64::new(0.0, -1.0), C64::new(-1.0, 0.0), C64::new(0.0, 1.0)][m % 4]
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |a, k| a * k as f64)
}

/// H_m[K] for m = 0..=m_max.
fn h_chain(k: &CJet, i_x: &CJet, m_max: usize) -> Vec<CJet> {
    let mut out = vec![k.clone()];
    for m in 0..m_max {
        let h = &out[m];
        if h.order() == 0 {
            break;
        }
        let next = &h.diff(Axis::X) - &(i_x * h);
        out.push(next);
    }
    out
}

/// M^(l)[K] from the node data. `bxi[m]` = ∂_ξ^m b, `bsxi[m]` = ∂_ξ^m B_s.
fn m_term(l: usize, h: &[CJet], bxi: &[CJet], bsxi: Option<&[CJet]>) -> Option<CJet> {
    let mut acc: Option<CJet> = None;
    let mut add = |t: CJet| {
        acc = Some(match acc.take() {
            None => t,
            Some(a) => &a + &t,
        })
    };
    if l < h.len() && l < bxi.len() {
        let c = minus_i_pow(l) / factorial(l);
        add((&bxi[l] * &h[l]).mul_scalar(c));
    }
    if let Some(bs) = bsxi {
        if l >= 1 && l - 1 < h.len() && l - 1 < bs.len() {
            let c = minus_i_pow(l - 1) / factorial(l - 1);
            add((&bs[l - 1] * &h[l - 1]).mul_scalar(c));
        }
    }
    acc
}

fn xi_derivs(b: &CJet, m_max: usize) -> Vec<CJet> {
    let mut out = vec![b.clone()];
    for _ in 0..m_max.min(b.order()) {
        let next = out.last().unwrap().diff(Axis::Xi);
        out.push(next);
    }
    out
}

struct NodeData {
    h: f64,
    b: Vec<RJet>,
    bs: Option<Vec<RJet>>,
}

impl ParametrixSymbol {
    fn new(order_j: usize, z0: f64, quad_dz: f64, source: Source) -> Result<Self> {
        if order_j > MAX_J {
            return Err(Error::InvalidParameter(format!("J = {order_j} above {MAX_J}")));
        }
        if !(quad_dz > 0.0) {
            return Err(Error::InvalidParameter(format!("quad_dz must be positive, got {quad_dz}")));
        }
        Ok(ParametrixSymbol {
            order_j,
            z0,
            quad_dz,
            source,
            cache: Mutex::new(HashMap::new()),
        })
    }

    fn nodes(&self, z: f64, x: f64, xi: f64, order: usize) -> Result<NodeData> {
        let span = z - self.z0;
        let n = simpson_nodes(span, self.quad_dz);
        let h = span / n as f64;
        let zs: Vec<f64> = (0..=n).map(|i| self.z0 + h * i as f64).collect();
        let xj = Jet::var(Axis::X, x, order);
        let xij = Jet::var(Axis::Xi, xi, order);
        match &self.source {
            Source::Direct { b, bs } => {
                let eval = |s: &Symbol| -> Result<Vec<RJet>> {
                    if s.info().z_independent {
                        let j = s.eval_args(&Jet::constant(z, order), &xj, &xij)?;
                        Ok(vec![j; n + 1])
                    } else {
                        zs.iter().map(|&zz| s.eval_args(&Jet::constant(zz, order), &xj, &xij)).collect()
                    }
                };
                Ok(NodeData {
                    h,
                    b: eval(b)?,
                    bs: bs.as_ref().map(eval).transpose()?,
                })
            }
            Source::Pullback { sys, b } => {
                let sub = if sys.a.is_some() { n_steps(h, sys.step_dz) } else { 1 };
                let states = flow_jets_on_nodes(sys, self.z0, z, &xj, &xij, n, sub)?;
                let bv = states
                    .iter()
                    .zip(&zs)
                    .map(|((gx, gxi), &zz)| b.eval_args(&Jet::constant(zz, order), gx, gxi))
                    .collect::<Result<Vec<_>>>()?;
                Ok(NodeData { h, b: bv, bs: None })
            }
        }
    }

    /// Jets of I and K^(1..J) at (z, x, ξ), `extra` orders beyond what the
    /// recursion consumes.
    pub fn column(&self, z: f64, x: f64, xi: f64, extra: usize) -> Result<Column> {
        Ok(self.column_with_ledger(z, x, xi, extra, false)?.0)
    }

    fn column_with_ledger(&self, z: f64, x: f64, xi: f64, extra: usize, ledger: bool) -> Result<(Column, CompositionLedger)> {
        if z < self.z0 {
            return Err(Error::InvalidInput(format!("z = {z} below z0 = {}", self.z0)));
        }
        let jj = self.order_j;
        let order = jj + extra;
        if z == self.z0 {
            let col = Column {
                i: Jet::zero(order),
                k: (1..=jj).map(|k| CJet::zero(order - k)).collect(),
            };
            return Ok((col, CompositionLedger::default()));
        }
        let nd = self.nodes(z, x, xi, order)?;
        let n = nd.b.len();
        let i_nodes = cumulative_simpson(&nd.b, nd.h, Jet::zero(order));
        let vanishing = nd.b.iter().all(|b| b.is_zero()) && nd.bs.as_ref().is_none_or(|v| v.iter().all(|b| b.is_zero()));
        if vanishing && !ledger {
            let col = Column {
                i: Jet::zero(order),
                k: (1..=jj).map(|k| CJet::zero(order - k)).collect(),
            };
            return Ok((col, CompositionLedger::default()));
        }
        // per node: ∂_ξ^m b, ∂_ξ^m B_s, ∂_x I
        let bxi: Vec<Vec<CJet>> = nd.b.iter().map(|b| xi_derivs(&b.to_complex(), jj + 1)).collect();
        let bsxi: Option<Vec<Vec<CJet>>> = nd
            .bs
            .as_ref()
            .map(|v| v.iter().map(|b| xi_derivs(&b.to_complex(), jj + 1)).collect());
        let i_x: Vec<CJet> = i_nodes
            .iter()
            .map(|i| if order > 0 { i.diff(Axis::X).to_complex() } else { CJet::zero(0) })
            .collect();

        // ks[j][node] = K^(j); chains[j][node] = H_m[K^(j)]
        let mut ks: Vec<Vec<CJet>> = vec![vec![CJet::constant(C64::new(1.0, 0.0), order); n]];
        let mut chains: Vec<Vec<Vec<CJet>>> = vec![(0..n).map(|p| h_chain(&ks[0][p], &i_x[p], jj + 1)).collect()];
        let mut book = CompositionLedger::default();
        let m_at = |chains: &Vec<Vec<Vec<CJet>>>, src: usize, l: usize, p: usize| -> Option<CJet> {
            m_term(l, &chains[src - 1][p], &bxi[p], bsxi.as_ref().map(|v| v[p].as_slice()))
        };
        for k in 1..=jj {
            let r: Vec<CJet> = (0..n)
                .map(|p| {
                    let mut acc = CJet::zero(order - k);
                    for j in 1..=k {
                        if let Some(m) = m_at(&chains, j, k - j + 1, p) {
                            acc = &acc + &m;
                        }
                    }
                    acc
                })
                .collect();
            let integral = cumulative_simpson(&r, nd.h, CJet::zero(order - k));
            let kk: Vec<CJet> = integral.iter().map(|v| -v).collect();
            chains.push((0..n).map(|p| h_chain(&kk[p], &i_x[p], jj + 1 - k)).collect());
            ks.push(kk);
        }
        if ledger {
            let p = n - 1;
            for j in 1..=jj + 1 {
                for l in 0..=jj + 1 {
                    if let Some(m) = m_at(&chains, j, l, p) {
                        book.m_table.insert((j, l), m);
                    }
                }
            }
            for k in 1..=jj + 1 {
                for l in k..=jj + 1 {
                    let mut acc: Option<CJet> = None;
                    for j in 1..=k {
                        if let Some(m) = book.m_table.get(&(j, l + 1 - j)) {
                            acc = Some(match acc {
                                None => m.clone(),
                                Some(a) => &a + m,
                            });
                        }
                    }
                    if let Some(a) = acc {
                        book.r_table.insert((k, l), a);
                    }
                }
            }
        }
        let col = Column {
            i: i_nodes[n - 1].clone(),
            k: ks.into_iter().skip(1).map(|v| v[n - 1].clone()).collect(),
        };
        Ok((col, book))
    }

    /// M^(j,l) and r^(k,l) (l ≥ k) at a point, with `extra` spare jet orders.
    /// The entries r^(k,k−1) = r^(k−1,k−1) + ∂_z K^(k−1) for k = 2..=J are
    /// filled with a five-point z-stencil of K^(k−1); they should vanish.
    pub fn ledger_at(&self, z: f64, x: f64, xi: f64, extra: usize) -> Result<CompositionLedger> {
        let mut book = self.column_with_ledger(z, x, xi, extra + 1, true)?.1;
        if z > self.z0 && self.order_j >= 1 {
            let hz = 0.25 * self.quad_dz.min(0.5 * (z - self.z0));
            let cols = [-2.0, -1.0, 1.0, 2.0]
                .iter()
                .map(|s| self.column(z + s * hz, x, xi, 0))
                .collect::<Result<Vec<_>>>()?;
            for k in 2..=self.order_j + 1 {
                let kk = |c: &Column| c.k[k - 2].value();
                let dk = (kk(&cols[0]) - 8.0 * kk(&cols[1]) + 8.0 * kk(&cols[2]) - kk(&cols[3])) / (12.0 * hz);
                if let Some(r) = book.r_table.get(&(k - 1, k - 1)) {
                    let v = r.value() + dk;
                    book.r_table.insert((k, k - 1), CJet::constant(v, 0));
                }
            }
        }
        Ok(book)
    }

    pub fn i_value(&self, z: f64, x: f64, xi: f64) -> Result<f64> {
        Ok(self.column(z, x, xi, 0)?.i.value())
    }

    pub fn assembled(&self, z: f64, x: f64, xi: f64) -> Result<C64> {
        Ok(self.column(z, x, xi, 0)?.assembled())
    }

    /// Memoized tables of I, K^(j) and W on the grid at depth z.
    pub fn tables(&self, grid: &Grid, z: f64) -> Result<Arc<GridTables>> {
        let key = (z.to_bits(), grid.n_points());
        if let Some(t) = self.cache.lock().unwrap().get(&key) {
            return Ok(t.clone());
        }
        let n = grid.n_points();
        let cols = (0..n * n)
            .into_par_iter()
            .map(|p| self.column(z, grid.x(p / n), grid.k(p % n) as f64, 0))
            .collect::<Result<Vec<_>>>()?;
        let w = GridSymbol {
            grid: grid.clone(),
            z,
            table: cols.iter().map(Column::assembled).collect(),
        };
        let t = Arc::new(GridTables {
            z,
            i: cols.iter().map(|c| c.i.value()).collect(),
            k: (0..self.order_j).map(|j| cols.iter().map(|c| c.k[j].value()).collect()).collect(),
            w,
        });
        self.cache.lock().unwrap().insert(key, t.clone());
        Ok(t)
    }

    pub fn k_component(&self, j: usize) -> KComponent<'_> {
        assert!((1..=self.order_j).contains(&j));
        KComponent { ps: self, j }
    }
}

/// K^(j) as a jet-evaluable symbol.
pub struct KComponent<'a> {
    ps: &'a ParametrixSymbol,
    j: usize,
}

impl JetSymbol for KComponent<'_> {
    fn cjet(&self, z: f64, x: f64, xi: f64, order: usize) -> Result<CJet> {
        Ok(self.ps.column(z, x, xi, order)?.k[self.j - 1].truncate(order))
    }
}

/// M^(k)[K] at a point for a given jet-evaluable K, with the I of `b`
/// for A = 0.
pub fn composition_terms_m(k_sym: &dyn JetSymbol, b: &dyn SymbolModel, bs: Option<&dyn SymbolModel>, z0: f64, k: usize, z: f64, x: f64, xi: f64, quad_dz: f64) -> Result<C64> {
    let bj = b.jet(z, x, xi, k + 1)?;
    let sys = RaySystem::new(None, z0, quad_dz)?;
    let i = crate::rays::damping_jet(&sys, b, z, x, xi, k + 1, quad_dz)?;
    let kj = k_sym.cjet(z, x, xi, k + 1)?;
    let i_x = i.diff(Axis::X).to_complex();
    let chain = h_chain(&kj, &i_x, k);
    let bxi = xi_derivs(&bj.to_complex(), k);
    let bsxi = match bs {
        Some(s) => Some(xi_derivs(&s.jet(z, x, xi, k + 1)?.to_complex(), k)),
        None => None,
    };
    Ok(m_term(k, &chain, &bxi, bsxi.as_deref())
        .map(|m| m.value())
        .unwrap_or(C64::new(0.0, 0.0)))
}

/// The order-J parametrix for an A = 0 problem.
pub fn build_parametrix(prob: &IVPProblem, order_j: usize, quad_dz: f64) -> Result<ParametrixSymbol> {
    if prob.a.is_some() {
        return Err(Error::InvalidInput("build_parametrix needs A = 0; use conjugated_parametrix".into()));
    }
    ParametrixSymbol::new(
        order_j,
        prob.z0(),
        quad_dz,
        Source::Direct {
            b: prob.b.clone(),
            bs: prob.bs.clone(),
        },
    )
}

/// Op(W(z)) E0(z, z0) u0.
pub fn parametrix_apply(ps: &ParametrixSymbol, prob: &IVPProblem, u0: &WaveField, z: f64) -> Result<WaveField> {
    if z < prob.z0() || z > prob.params.z_max + 1e-12 {
        return Err(Error::InvalidInput(format!("z = {z} outside the problem range")));
    }
    let mut v = if prob.a.is_some() { evolve_to(prob, u0, z, false)? } else { u0.clone() };
    v.z = z;
    let t = ps.tables(&prob.grid, z)?;
    apply_op(&t.w, &v)
}

/// u0 ↦ E0(z, z0) Op(W̃(z)) u0 with W̃ built from b̃ = b ∘ Φ_{z,z0}.
pub struct ConjugatedParametrix {
    pub ps: ParametrixSymbol,
    pub prob: IVPProblem,
}

impl ConjugatedParametrix {
    pub fn apply(&self, u0: &WaveField, z: f64) -> Result<WaveField> {
        let t = self.ps.tables(&self.prob.grid, z)?;
        let mut w = apply_op(&t.w, u0)?;
        w.z = u0.z;
        if self.prob.a.is_none() {
            w.z = z;
            return Ok(w);
        }
        evolve_to(&self.prob, &w, z, false)
    }
}

/// Leading-order conjugated parametrix; the rays step on the quadrature grid.
pub fn conjugated_parametrix(prob: &IVPProblem, order_j: usize, quad_dz: f64) -> Result<ConjugatedParametrix> {
    if prob.bs.is_some() {
        return Err(Error::InvalidInput("conjugated parametrix is leading order: B_s must be absent".into()));
    }
    let sys = RaySystem::new(prob.a.clone(), prob.z0(), quad_dz)?;
    let ps = ParametrixSymbol::new(order_j, prob.z0(), quad_dz, Source::Pullback { sys, b: prob.b.clone() })?;
    Ok(ConjugatedParametrix { ps, prob: prob.clone() })
}
