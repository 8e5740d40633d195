//! Analytic symbol families and their jet evaluation.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::estimates::{EstimateReport, SampleSpec};
use crate::jet::{eval_poly, exp_inv_polys, Axis, Jet, RJet, MAX_ORDER};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SymbolKind {
    HyperbolicA,
    DissipativeB,
    SubprincipalBs,
    Generic,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SymbolInfo {
    pub kind: SymbolKind,
    pub max_deriv_order: usize,
    pub order_mu: f64,
    pub type_rho: f64,
    pub type_delta: f64,
    pub x_independent: bool,
    pub z_independent: bool,
}

/// A real symbol in (z, x, ξ) that can be evaluated on jet arguments.
///
/// Evaluating on jets composes the symbol with the argument expansions, so
/// `eval_args(var z, var x, var ξ)` yields the Taylor jet at a point and
/// feeding ray jets yields jets of pulled-back symbols.
pub trait SymbolModel: Send + Sync {
    fn info(&self) -> SymbolInfo;

    fn eval_args(&self, z: &RJet, x: &RJet, xi: &RJet) -> Result<RJet>;

    fn jet(&self, z: f64, x: f64, xi: f64, order: usize) -> Result<RJet> {
        let max = self.info().max_deriv_order;
        if order > max {
            return Err(Error::UnsupportedOrder { requested: order, max });
        }
        self.eval_args(
            &Jet::var(Axis::Z, z, order),
            &Jet::var(Axis::X, x, order),
            &Jet::var(Axis::Xi, xi, order),
        )
    }

    fn value(&self, z: f64, x: f64, xi: f64) -> f64 {
        self.jet(z, x, xi, 0).map(|j| j.value()).unwrap_or(f64::NAN)
    }

    /// (∂_ξ a, ∂_x a) at a point.
    fn field_value(&self, z: f64, x: f64, xi: f64) -> Result<(f64, f64)> {
        let j = self.jet(z, x, xi, 1)?;
        Ok((j.coeff(0, 1, 0), j.coeff(1, 0, 0)))
    }

    /// (∂_ξ a, ∂_x a) composed with jet arguments.
    fn field_args(&self, z: &RJet, x: &RJet, xi: &RJet) -> Result<(RJet, RJet)> {
        let n = z.order().min(x.order()).min(xi.order());
        let base = self.jet(z.value(), x.value(), xi.value(), n + 1)?;
        let dz = z.add_const(-z.value());
        let dx = x.add_const(-x.value());
        let dxi = xi.add_const(-xi.value());
        let a_xi = base.diff(Axis::Xi).substitute(&dx, &dxi, &dz);
        let a_x = base.diff(Axis::X).substitute(&dx, &dxi, &dz);
        Ok((a_xi, a_x))
    }
}

pub type Symbol = Arc<dyn SymbolModel>;

/// ∂_x^ax ∂_ξ^bxi ∂_z^jz of the symbol at a point.
pub fn eval_jet(model: &dyn SymbolModel, z: f64, x: f64, xi: f64, ax: usize, bxi: usize, jz: usize) -> Result<f64> {
    let j = model.jet(z, x, xi, ax + bxi + jz)?;
    Ok(j.derivative(ax, bxi, jz).expect("order checked"))
}

fn closed_form(kind: SymbolKind, mu: f64, rho: f64, delta: f64, xi_ind: bool, z_ind: bool) -> SymbolInfo {
    SymbolInfo {
        kind,
        max_deriv_order: MAX_ORDER,
        order_mu: mu,
        type_rho: rho,
        type_delta: delta,
        x_independent: xi_ind,
        z_independent: z_ind,
    }
}

#[derive(Clone, Debug)]
pub struct ZeroSymbol(pub SymbolKind);

impl SymbolModel for ZeroSymbol {
    fn info(&self) -> SymbolInfo {
        closed_form(self.0, f64::NEG_INFINITY, 1.0, 0.0, true, true)
    }
    fn eval_args(&self, z: &RJet, x: &RJet, xi: &RJet) -> Result<RJet> {
        Ok(Jet::zero(z.order().min(x.order()).min(xi.order())))
    }
}

/// a(z, x, ξ) = c0 (1 + ε_a cos x) ξ.
#[derive(Clone, Debug)]
pub struct HyperbolicA {
    pub c0: f64,
    pub eps_a: f64,
}

impl SymbolModel for HyperbolicA {
    fn info(&self) -> SymbolInfo {
        closed_form(SymbolKind::HyperbolicA, 1.0, 1.0, 0.0, self.eps_a == 0.0, true)
    }

    fn eval_args(&self, _z: &RJet, x: &RJet, xi: &RJet) -> Result<RJet> {
        let w = x.cos().scale(self.c0 * self.eps_a).add_const(self.c0);
        Ok(&w * xi)
    }

    fn field_value(&self, _z: f64, x: f64, xi: f64) -> Result<(f64, f64)> {
        let (s, c) = x.sin_cos();
        Ok((self.c0 * (1.0 + self.eps_a * c), -self.c0 * self.eps_a * s * xi))
    }

    fn field_args(&self, _z: &RJet, x: &RJet, xi: &RJet) -> Result<(RJet, RJet)> {
        let a_xi = x.cos().scale(self.c0 * self.eps_a).add_const(self.c0);
        let a_x = &x.sin().scale(-self.c0 * self.eps_a) * xi;
        Ok((a_xi, a_x))
    }
}

/// b(z, x, ξ) = β0 (1 + ξ²)^{γ/2}.
#[derive(Clone, Debug)]
pub struct MultiplierB {
    pub beta0: f64,
    pub gamma: f64,
}

impl SymbolModel for MultiplierB {
    fn info(&self) -> SymbolInfo {
        closed_form(SymbolKind::DissipativeB, self.gamma, 1.0, 0.0, true, true)
    }

    fn eval_args(&self, _z: &RJet, _x: &RJet, xi: &RJet) -> Result<RJet> {
        let w = (xi * xi).add_const(1.0).powf(self.gamma / 2.0);
        Ok(w.scale(self.beta0))
    }
}

#[derive(Clone)]
pub enum HKind {
    ExpInv,
    /// `h(y, n)` returns `[h(y), h'(y), …, h^(n)(y)]`.
    Custom(Arc<dyn Fn(f64, usize) -> Vec<f64> + Send + Sync>),
}

impl std::fmt::Debug for HKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            HKind::ExpInv => write!(f, "ExpInv"),
            HKind::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl HKind {
    pub fn apply(&self, y: &RJet) -> RJet {
        match self {
            HKind::ExpInv => y.exp_inv(),
            HKind::Custom(h) => {
                let d = h(y.value(), y.order());
                let mut g = Vec::with_capacity(d.len());
                let mut fact = 1.0;
                for (k, v) in d.iter().enumerate() {
                    if k > 0 {
                        fact *= k as f64;
                    }
                    g.push(v / fact);
                }
                y.compose(&g)
            }
        }
    }

    /// Derivatives `h^(0..=n)(y)`.
    pub fn derivatives(&self, y: f64, n: usize) -> Vec<f64> {
        match self {
            HKind::ExpInv => {
                if y <= 0.0 {
                    return vec![0.0; n + 1];
                }
                let h = (-1.0 / y).exp();
                exp_inv_polys(n).iter().map(|p| h * eval_poly(p, 1.0 / y)).collect()
            }
            HKind::Custom(h) => h(y, n),
        }
    }
}

/// ρ(z, x, ω) = r0 − cos(x − x_c) + s (z − z0); independent of ω.
#[derive(Clone, Debug, PartialEq)]
pub enum RhoFn {
    Constant(f64),
    Cosine { r0: f64, x_c: f64, s: f64, z0: f64 },
}

impl RhoFn {
    pub fn eval_args(&self, z: &RJet, x: &RJet) -> RJet {
        let n = z.order().min(x.order());
        match *self {
            RhoFn::Constant(c) => Jet::constant(c, n),
            RhoFn::Cosine { r0, x_c, s, z0 } => {
                let c = x.add_const(-x_c).cos();
                let lin = z.add_const(-z0).scale(s);
                (&lin - &c).add_const(r0)
            }
        }
    }

    pub fn value(&self, z: f64, x: f64) -> f64 {
        match *self {
            RhoFn::Constant(c) => c,
            RhoFn::Cosine { r0, x_c, s, z0 } => r0 - (x - x_c).cos() + s * (z - z0),
        }
    }

    /// The points of {ρ = 0} on the circle at depth z, if any.
    pub fn boundary(&self, z: f64) -> Vec<f64> {
        match *self {
            RhoFn::Constant(_) => Vec::new(),
            RhoFn::Cosine { r0, x_c, s, z0 } => {
                let c = r0 + s * (z - z0);
                if c.abs() >= 1.0 {
                    return Vec::new();
                }
                let t = c.acos();
                vec![(x_c + t).rem_euclid(2.0 * PI), (x_c - t).rem_euclid(2.0 * PI)]
            }
        }
    }

    pub fn z_independent(&self) -> bool {
        !matches!(self, RhoFn::Cosine { s, .. } if *s != 0.0)
    }
}

/// b = (1 + ξ²)^{γ/2} w0 h(ρ) with a constant weight w0 > 0.
#[derive(Clone, Debug)]
pub struct CutoffFamily {
    pub gamma: f64,
    pub w0: f64,
    pub rho: RhoFn,
    pub h_kind: HKind,
    /// Half-width of the interval on which the h-inequality is checked.
    pub beta: f64,
    pub l: u32,
}

impl CutoffFamily {
    pub fn validate(&self) -> Result<()> {
        if !(self.w0 > 0.0) {
            return Err(Error::InvalidParameter(format!("w0 must be positive, got {}", self.w0)));
        }
        if !(self.gamma > 0.0) || self.l < 2 {
            return Err(Error::InvalidParameter("need gamma > 0 and L >= 2".into()));
        }
        if let HKind::Custom(h) = &self.h_kind {
            for y in [-0.5, -1e-3, 0.0] {
                if h(y, 0)[0] != 0.0 {
                    return Err(Error::InvalidParameter(format!("h({y}) must vanish")));
                }
            }
            for y in [1e-2, 0.1, 0.5] {
                if !(h(y, 0)[0] > 0.0) {
                    return Err(Error::InvalidParameter(format!("h({y}) must be positive")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct CutoffB {
    pub family: CutoffFamily,
}

impl SymbolModel for CutoffB {
    fn info(&self) -> SymbolInfo {
        let d = self.family.gamma / self.family.l as f64;
        closed_form(
            SymbolKind::DissipativeB,
            self.family.gamma,
            1.0 - d,
            d,
            matches!(self.family.rho, RhoFn::Constant(_)),
            self.family.rho.z_independent(),
        )
    }

    fn eval_args(&self, z: &RJet, x: &RJet, xi: &RJet) -> Result<RJet> {
        let rho = self.family.rho.eval_args(z, x);
        let h = self.family.h_kind.apply(&rho);
        let n = z.order().min(x.order()).min(xi.order());
        if h.is_zero() {
            return Ok(Jet::zero(n));
        }
        let w = (xi * xi).add_const(1.0).powf(self.family.gamma / 2.0);
        Ok((&w * &h).scale(self.family.w0))
    }
}

pub fn build_cutoff_b(family: CutoffFamily) -> Result<CutoffB> {
    family.validate()?;
    Ok(CutoffB { family })
}

/// A sampled symbol whose derivatives come from nested central differences
/// with one Richardson level.
#[derive(Clone)]
pub struct SampledSymbol {
    pub f: Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>,
    pub info: SymbolInfo,
}

impl SampledSymbol {
    pub fn new(kind: SymbolKind, f: Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>) -> Self {
        SampledSymbol {
            f,
            info: SymbolInfo {
                kind,
                max_deriv_order: 3,
                order_mu: f64::NAN,
                type_rho: f64::NAN,
                type_delta: f64::NAN,
                x_independent: false,
                z_independent: false,
            },
        }
    }

    fn central(&self, z: f64, x: f64, xi: f64, ord: [usize; 3], h: [f64; 3]) -> f64 {
        let w = |m: usize| -> Vec<(f64, f64)> {
            let mut c = 1.0;
            (0..=m)
                .map(|i| {
                    let coef = if i % 2 == 0 { c } else { -c };
                    c = c * (m - i) as f64 / (i + 1) as f64;
                    (coef, m as f64 / 2.0 - i as f64)
                })
                .collect()
        };
        let (wx, wxi, wz) = (w(ord[0]), w(ord[1]), w(ord[2]));
        let mut acc = 0.0;
        for &(cx, sx) in &wx {
            for &(cxi, sxi) in &wxi {
                for &(cz, sz) in &wz {
                    acc += cx * cxi * cz * (self.f)(z + sz * h[2], x + sx * h[0], xi + sxi * h[1]);
                }
            }
        }
        acc / (h[0].powi(ord[0] as i32) * h[1].powi(ord[1] as i32) * h[2].powi(ord[2] as i32))
    }

    pub fn fd_derivative(&self, z: f64, x: f64, xi: f64, ax: usize, bxi: usize, jz: usize) -> f64 {
        if ax + bxi + jz == 0 {
            return (self.f)(z, x, xi);
        }
        let h = [1e-4, 1e-4 * (1.0 + xi.abs()), 1e-4];
        let half = [h[0] / 2.0, h[1] / 2.0, h[2] / 2.0];
        let d1 = self.central(z, x, xi, [ax, bxi, jz], h);
        let d2 = self.central(z, x, xi, [ax, bxi, jz], half);
        (4.0 * d2 - d1) / 3.0
    }
}

impl SymbolModel for SampledSymbol {
    fn info(&self) -> SymbolInfo {
        self.info.clone()
    }

    fn jet(&self, z: f64, x: f64, xi: f64, order: usize) -> Result<RJet> {
        let max = self.info.max_deriv_order;
        if order > max {
            return Err(Error::UnsupportedOrder { requested: order, max });
        }
        let mut c = Vec::with_capacity(crate::jet::n_coeffs(order));
        for d in 0..=order {
            for a in (0..=d).rev() {
                for b in (0..=d - a).rev() {
                    let cz = d - a - b;
                    let fact: f64 = [a, b, cz].iter().map(|&k| (1..=k).product::<usize>() as f64).product();
                    c.push(self.fd_derivative(z, x, xi, a, b, cz) / fact);
                }
            }
        }
        Ok(Jet::from_coeffs(order, &c))
    }

    fn eval_args(&self, z: &RJet, x: &RJet, xi: &RJet) -> Result<RJet> {
        let n = z.order().min(x.order()).min(xi.order());
        let base = self.jet(z.value(), x.value(), xi.value(), n)?;
        Ok(base.substitute(
            &x.add_const(-x.value()),
            &xi.add_const(-xi.value()),
            &z.add_const(-z.value()),
        ))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AssumptionParams {
    pub gamma: f64,
    pub l: u32,
    pub z_max: f64,
    pub z0: f64,
}

impl AssumptionParams {
    pub fn new(gamma: f64, l: u32, z0: f64, z_max: f64) -> Result<Self> {
        if !(gamma > 0.0) || l < 2 {
            return Err(Error::InvalidParameter("need gamma > 0 and L >= 2".into()));
        }
        if !(2.0 * gamma < l as f64) {
            return Err(Error::InvalidParameter(format!("2*gamma = {} must be below L = {l}", 2.0 * gamma)));
        }
        if !(z0 < z_max) {
            return Err(Error::InvalidParameter(format!("need z0 < Z, got {z0} >= {z_max}")));
        }
        Ok(AssumptionParams { gamma, l, z_max, z0 })
    }

    pub fn delta(&self) -> f64 {
        self.gamma / self.l as f64
    }
}

/// Sup over `grid` of |h^(j)(y)| / h(y)^{1 − j/L} for j = 1..=j_max.
pub fn check_h_inequality(family: &CutoffFamily, j_max: usize, grid: &[f64], cap: f64) -> Result<EstimateReport> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("empty y grid".into()));
    }
    if j_max + 1 > family.l as usize {
        return Err(Error::InvalidInput(format!("j_max = {j_max} must be at most L - 1")));
    }
    if grid.iter().any(|&y| y <= 0.0) {
        return Err(Error::InvalidInput("grid must lie in (0, beta]".into()));
    }
    let l = family.l as f64;
    let polys = exp_inv_polys(j_max);
    let mut report = EstimateReport::new(format!("h_inequality_L{}", family.l), 0.0);
    for j in 1..=j_max {
        let mut sup_log = f64::NEG_INFINITY;
        for &y in grid {
            let log_ratio = match family.h_kind {
                HKind::ExpInv => {
                    let t = 1.0 / y;
                    eval_poly(&polys[j], t).abs().ln() - j as f64 * t / l
                }
                HKind::Custom(_) => {
                    let d = family.h_kind.derivatives(y, j);
                    d[j].abs().ln() - (1.0 - j as f64 / l) * d[0].ln()
                }
            };
            sup_log = sup_log.max(log_ratio);
        }
        let sup = sup_log.exp();
        report.push_sup([j, 0, 0], sup, cap);
    }
    report.finish();
    Ok(report)
}

/// The first structural inequality for b on a ladder × (z, x) sample set.
pub fn check_assumption_b1(
    model: &dyn SymbolModel,
    params: &AssumptionParams,
    orders: &[[usize; 3]],
    sample: &SampleSpec,
    cap: f64,
) -> Result<EstimateReport> {
    if model.info().kind != SymbolKind::DissipativeB {
        return Err(Error::InvalidInput("assumption check needs a dissipative symbol".into()));
    }
    let l = params.l as f64;
    let mut report = EstimateReport::new("assumption_b1".into(), 0.0);
    let n = orders.iter().map(|o| o[0] + o[1] + o[2]).max().unwrap_or(0);
    for &ord in orders {
        let t = ord[0] + ord[1] + ord[2];
        if t >= params.l as usize {
            return Err(Error::InvalidInput(format!("order {ord:?} not below L")));
        }
        let mut sup: f64 = 0.0;
        for &z in &sample.z {
            for &x in &sample.x {
                for &xi in &sample.xi {
                    let j = model.jet(z, x, xi, n)?;
                    let num = j.derivative(ord[0], ord[1], ord[2]).unwrap().abs();
                    let b = j.value();
                    let s = (ord[0] + ord[1]) as f64;
                    let den = (1.0 + xi.abs()).powf(-(ord[1] as f64) + s * params.gamma / l)
                        * (1.0 + b).powf(1.0 - s / l);
                    sup = sup.max(num / den);
                }
            }
        }
        report.push_sup(ord, sup, cap);
    }
    report.finish();
    Ok(report)
}
