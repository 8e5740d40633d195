//! Bicharacteristics of ∂_z − i a and damping integrals along them.
//!
//! dx/dz = −∂_ξ a, dξ/dz = ∂_x a.

use crate::error::{Error, Result};
use crate::jet::{Axis, Jet, RJet, Scalar};
use crate::symbol::{Symbol, SymbolInfo, SymbolKind, SymbolModel};

#[derive(Clone)]
pub struct RaySystem {
    /// `None` is the A = 0 case (straight, stationary rays).
    pub a: Option<Symbol>,
    pub z0: f64,
    pub step_dz: f64,
}

impl RaySystem {
    pub fn new(a: Option<Symbol>, z0: f64, step_dz: f64) -> Result<Self> {
        if !(step_dz > 0.0) {
            return Err(Error::InvalidParameter(format!("step_dz must be positive, got {step_dz}")));
        }
        if let Some(a) = &a {
            if a.info().kind != SymbolKind::HyperbolicA {
                return Err(Error::InvalidParameter("ray system needs a hyperbolic symbol".into()));
            }
        }
        Ok(RaySystem { a, z0, step_dz })
    }

    fn rhs(&self, z: f64, x: f64, xi: f64) -> Result<(f64, f64)> {
        match &self.a {
            None => Ok((0.0, 0.0)),
            Some(a) => {
                let (a_xi, a_x) = a.field_value(z, x, xi)?;
                Ok((-a_xi, a_x))
            }
        }
    }

    fn rhs_jet(&self, z: f64, x: &RJet, xi: &RJet) -> Result<(RJet, RJet)> {
        match &self.a {
            None => Ok((Jet::zero(x.order()), Jet::zero(x.order()))),
            Some(a) => {
                let zj = Jet::constant(z, x.order());
                let (a_xi, a_x) = a.field_args(&zj, x, xi)?;
                Ok((-&a_xi, a_x))
            }
        }
    }

    /// One RK4 step of size h.
    pub fn step(&self, z: f64, x: f64, xi: f64, h: f64) -> Result<(f64, f64)> {
        let (k1x, k1p) = self.rhs(z, x, xi)?;
        let (k2x, k2p) = self.rhs(z + h / 2.0, x + h / 2.0 * k1x, xi + h / 2.0 * k1p)?;
        let (k3x, k3p) = self.rhs(z + h / 2.0, x + h / 2.0 * k2x, xi + h / 2.0 * k2p)?;
        let (k4x, k4p) = self.rhs(z + h, x + h * k3x, xi + h * k3p)?;
        Ok((
            x + h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x),
            xi + h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p),
        ))
    }

    pub fn step_jet(&self, z: f64, x: &RJet, xi: &RJet, h: f64) -> Result<(RJet, RJet)> {
        let lin = |a: &RJet, k: &RJet, s: f64| a + &k.scale(s);
        let (k1x, k1p) = self.rhs_jet(z, x, xi)?;
        let (k2x, k2p) = self.rhs_jet(z + h / 2.0, &lin(x, &k1x, h / 2.0), &lin(xi, &k1p, h / 2.0))?;
        let (k3x, k3p) = self.rhs_jet(z + h / 2.0, &lin(x, &k2x, h / 2.0), &lin(xi, &k2p, h / 2.0))?;
        let (k4x, k4p) = self.rhs_jet(z + h, &lin(x, &k3x, h), &lin(xi, &k3p, h))?;
        let comb = |a: &RJet, k1: &RJet, k2: &RJet, k3: &RJet, k4: &RJet| {
            let s = &(&(k1 + &k2.scale(2.0)) + &k3.scale(2.0)) + k4;
            a + &s.scale(h / 6.0)
        };
        Ok((comb(x, &k1x, &k2x, &k3x, &k4x), comb(xi, &k1p, &k2p, &k3p, &k4p)))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    FromZ0,
    ToZ0,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RaySolution {
    pub z_samples: Vec<f64>,
    pub gamma_x: Vec<f64>,
    pub gamma_xi: Vec<f64>,
    /// Accumulated ∫ b from the start of the trace; zero when traced without b.
    pub i_forward: Vec<f64>,
    pub direction: Direction,
}

fn check_xi(z: f64, xi: f64) -> Result<()> {
    let m = xi.abs();
    if !(1e-8..=1e8).contains(&m) {
        return Err(Error::RayBlowup { z, xi });
    }
    Ok(())
}

/// Uniform node count with spacing at most `step`.
pub fn n_steps(span: f64, step: f64) -> usize {
    ((span.abs() / step) * (1.0 - 1e-12)).ceil().max(1.0) as usize
}

/// RK4 ray from (x0, ξ0) at z_from to z_to, sampled at every step.
pub fn trace_ray(sys: &RaySystem, z_from: f64, z_to: f64, x0: f64, xi0: f64) -> Result<RaySolution> {
    trace_on_nodes(sys, z_from, z_to, x0, xi0, n_steps(z_to - z_from, sys.step_dz), 1)
}

/// Ray sampled on `n_nodes` uniform intervals with `sub` RK4 steps each.
pub fn trace_on_nodes(
    sys: &RaySystem,
    z_from: f64,
    z_to: f64,
    x0: f64,
    xi0: f64,
    n_nodes: usize,
    sub: usize,
) -> Result<RaySolution> {
    if xi0 == 0.0 {
        return Err(Error::DegenerateCovector);
    }
    let direction = if (z_to - sys.z0).abs() < (z_from - sys.z0).abs() {
        Direction::ToZ0
    } else {
        Direction::FromZ0
    };
    let h = (z_to - z_from) / (n_nodes * sub) as f64;
    let mut out = RaySolution {
        z_samples: vec![z_from],
        gamma_x: vec![x0],
        gamma_xi: vec![xi0],
        i_forward: vec![0.0],
        direction,
    };
    let (mut x, mut xi) = (x0, xi0);
    for i in 0..n_nodes {
        for s in 0..sub {
            let z = z_from + h * (i * sub + s) as f64;
            (x, xi) = sys.step(z, x, xi, h)?;
            check_xi(z + h, xi)?;
        }
        let z = if i + 1 == n_nodes { z_to } else { z_from + h * ((i + 1) * sub) as f64 };
        out.z_samples.push(z);
        out.gamma_x.push(x);
        out.gamma_xi.push(xi);
        out.i_forward.push(0.0);
    }
    Ok(out)
}

/// Jet version of [`trace_on_nodes`]: states at every node.
pub fn trace_jets_on_nodes(
    sys: &RaySystem,
    z_from: f64,
    z_to: f64,
    x0: &RJet,
    xi0: &RJet,
    n_nodes: usize,
    sub: usize,
) -> Result<Vec<(RJet, RJet)>> {
    if xi0.value() == 0.0 {
        return Err(Error::DegenerateCovector);
    }
    flow_jets_on_nodes(sys, z_from, z_to, x0, xi0, n_nodes, sub)
}

/// As [`trace_jets_on_nodes`], but a ray on the zero section ξ = 0 is
/// followed without range checks; symbol tables need the k = 0 column.
pub(crate) fn flow_jets_on_nodes(
    sys: &RaySystem,
    z_from: f64,
    z_to: f64,
    x0: &RJet,
    xi0: &RJet,
    n_nodes: usize,
    sub: usize,
) -> Result<Vec<(RJet, RJet)>> {
    let guard = xi0.value() != 0.0;
    let h = (z_to - z_from) / (n_nodes * sub) as f64;
    let mut out = Vec::with_capacity(n_nodes + 1);
    out.push((x0.clone(), xi0.clone()));
    if sys.a.is_none() {
        out.resize(n_nodes + 1, (x0.clone(), xi0.clone()));
        return Ok(out);
    }
    let (mut x, mut xi) = (x0.clone(), xi0.clone());
    for i in 0..n_nodes {
        for s in 0..sub {
            let z = z_from + h * (i * sub + s) as f64;
            (x, xi) = sys.step_jet(z, &x, &xi, h)?;
            if guard {
                check_xi(z + h, xi.value())?;
            }
        }
        out.push((x.clone(), xi.clone()));
    }
    Ok(out)
}

pub trait Linear: Clone {
    fn lincomb(terms: &[(f64, &Self)]) -> Self;
}

impl Linear for f64 {
    fn lincomb(terms: &[(f64, &Self)]) -> Self {
        terms.iter().map(|(c, v)| c * **v).sum()
    }
}

impl<T: Scalar> Linear for Jet<T> {
    fn lincomb(terms: &[(f64, &Self)]) -> Self {
        let mut acc = terms[0].1.scale(terms[0].0);
        for (c, v) in &terms[1..] {
            acc = &acc + &v.scale(*c);
        }
        acc
    }
}

/// Running integral on a uniform grid: Simpson at even nodes, the
/// matching three-point rule at odd nodes.
pub fn cumulative_simpson<T: Linear>(f: &[T], h: f64, zero: T) -> Vec<T> {
    let n = f.len();
    let mut out = Vec::with_capacity(n);
    out.push(zero);
    if n == 1 {
        return out;
    }
    if n == 2 {
        out.push(T::lincomb(&[(h / 2.0, &f[0]), (h / 2.0, &f[1])]));
        return out;
    }
    for i in 1..n {
        let v = if i == 1 {
            T::lincomb(&[(5.0 * h / 12.0, &f[0]), (8.0 * h / 12.0, &f[1]), (-h / 12.0, &f[2])])
        } else if i % 2 == 0 {
            T::lincomb(&[(1.0, &out[i - 2]), (h / 3.0, &f[i - 2]), (4.0 * h / 3.0, &f[i - 1]), (h / 3.0, &f[i])])
        } else {
            T::lincomb(&[(1.0, &out[i - 1]), (-h / 12.0, &f[i - 2]), (8.0 * h / 12.0, &f[i - 1]), (5.0 * h / 12.0, &f[i])])
        };
        out.push(v);
    }
    out
}

/// Even number of Simpson intervals with spacing at most `quad_dz`.
pub fn simpson_nodes(span: f64, quad_dz: f64) -> usize {
    let n = n_steps(span, quad_dz);
    n + n % 2
}

/// RK4 substeps per quadrature interval so the ray step stays ≤ step_dz.
fn substeps(sys: &RaySystem, node_h: f64) -> usize {
    if sys.a.is_none() {
        1
    } else {
        n_steps(node_h, sys.step_dz)
    }
}

fn check_quad(quad_dz: f64) -> Result<()> {
    if !(quad_dz > 0.0) {
        return Err(Error::InvalidParameter(format!("quad_dz must be positive, got {quad_dz}")));
    }
    Ok(())
}

/// Forward ray from (x0, ξ0) at z0 with Ĩ accumulated along it.
pub fn trace_ray_damped(sys: &RaySystem, b: &dyn SymbolModel, z: f64, x0: f64, xi0: f64, quad_dz: f64) -> Result<RaySolution> {
    check_quad(quad_dz)?;
    let n = simpson_nodes(z - sys.z0, quad_dz);
    let sub = substeps(sys, (z - sys.z0) / n as f64);
    let mut ray = trace_on_nodes(sys, sys.z0, z, x0, xi0, n, sub)?;
    let f: Vec<f64> = (0..=n)
        .map(|i| b.value(ray.z_samples[i], ray.gamma_x[i], ray.gamma_xi[i]))
        .collect();
    let h = (z - sys.z0) / n as f64;
    ray.i_forward = cumulative_simpson(&f, h, 0.0);
    // the odd-node rule has a negative weight; clamp between the Simpson neighbours
    let v = &mut ray.i_forward;
    for i in (1..v.len() - 1).step_by(2) {
        v[i] = v[i].clamp(v[i - 1], v[i + 1].max(v[i - 1]));
    }
    Ok(ray)
}

/// I(z, x, ξ): ∫_{z0}^{z} b along the ray through (x, ξ) at z.
pub fn damping_integral_i(sys: &RaySystem, b: &dyn SymbolModel, z: f64, x: f64, xi: f64, quad_dz: f64) -> Result<f64> {
    check_quad(quad_dz)?;
    if z < sys.z0 {
        return Err(Error::InvalidInput(format!("z = {z} below z0 = {}", sys.z0)));
    }
    if z == sys.z0 {
        return Ok(0.0);
    }
    let n = simpson_nodes(z - sys.z0, quad_dz);
    let sub = substeps(sys, (z - sys.z0) / n as f64);
    let ray = trace_on_nodes(sys, z, sys.z0, x, xi, n, sub)?;
    let f: Vec<f64> = (0..=n)
        .rev()
        .map(|i| b.value(ray.z_samples[i], ray.gamma_x[i], ray.gamma_xi[i]))
        .collect();
    let h = (z - sys.z0) / n as f64;
    Ok(*cumulative_simpson(&f, h, 0.0).last().unwrap())
}

/// Ĩ(z, x0, ξ0) = I(z, Φ_{z,z0}(x0, ξ0)), integrated along the forward ray.
pub fn damping_integral_itilde(sys: &RaySystem, b: &dyn SymbolModel, z: f64, x0: f64, xi0: f64, quad_dz: f64) -> Result<f64> {
    if z == sys.z0 {
        return Ok(0.0);
    }
    Ok(*trace_ray_damped(sys, b, z, x0, xi0, quad_dz)?.i_forward.last().unwrap())
}

/// Full (x, ξ, z) jet of I at (z, x, ξ).
///
/// The (x, ξ) part comes from quadrature of b-jets along the backward jet
/// ray; the z part from Picard iteration of ∂_z I = b + a_ξ ∂_x I − a_x ∂_ξ I.
pub fn damping_jet(sys: &RaySystem, b: &dyn SymbolModel, z: f64, x: f64, xi: f64, order: usize, quad_dz: f64) -> Result<RJet> {
    check_quad(quad_dz)?;
    if z < sys.z0 {
        return Err(Error::InvalidInput(format!("z = {z} below z0 = {}", sys.z0)));
    }
    let xj = Jet::var(Axis::X, x, order);
    let xij = Jet::var(Axis::Xi, xi, order);
    let i0 = if z == sys.z0 {
        Jet::zero(order)
    } else if sys.a.is_none() && b.info().z_independent {
        let bj = b.eval_args(&Jet::constant(z, order), &xj, &xij)?;
        bj.scale(z - sys.z0)
    } else {
        let n = simpson_nodes(z - sys.z0, quad_dz);
        let h = (z - sys.z0) / n as f64;
        let sub = substeps(sys, h);
        let states = flow_jets_on_nodes(sys, z, sys.z0, &xj, &xij, n, sub)?;
        let f = states
            .iter()
            .enumerate()
            .rev()
            .map(|(i, (gx, gxi))| b.eval_args(&Jet::constant(z - h * i as f64, order), gx, gxi))
            .collect::<Result<Vec<_>>>()?;
        cumulative_simpson(&f, h, Jet::zero(order)).pop().unwrap()
    };
    if order == 0 {
        return Ok(i0);
    }
    let bz = b.jet(z, x, xi, order)?;
    let field = match &sys.a {
        None => None,
        Some(a) => Some(a.field_args(&Jet::var(Axis::Z, z, order), &xj, &xij)?),
    };
    let mut cur = i0.clone();
    for _ in 0..order {
        let mut rhs = bz.clone();
        if let Some((a_xi, a_x)) = &field {
            let t1 = a_xi * &cur.diff(Axis::X);
            let t2 = a_x * &cur.diff(Axis::Xi);
            rhs = &rhs + &(&t1 - &t2);
        }
        cur = &i0 + &rhs.integrate_z(order);
    }
    Ok(cur)
}

/// Flow map Φ_{z,z0} evaluated on jet arguments. The z argument may only
/// vary through the pure z coordinate.
pub fn flow_args(sys: &RaySystem, z: &RJet, x: &RJet, xi: &RJet) -> Result<(RJet, RJet)> {
    let n = z.order().min(x.order()).min(xi.order());
    let zv = z.value();
    let dz = z.add_const(-zv);
    let pure_z = Jet::var(Axis::Z, 0.0, n);
    let z_varies = !dz.is_zero();
    if z_varies && (dz.truncate(n) != pure_z || depends_on_z(x) || depends_on_z(xi)) {
        return Err(Error::InvalidInput("flow jets need z to vary only through the z coordinate".into()));
    }
    let (x, xi) = (x.truncate(n), xi.truncate(n));
    if sys.a.is_none() {
        return Ok((x, xi));
    }
    let (x1, xi1) = if zv == sys.z0 {
        (x, xi)
    } else {
        let steps = n_steps(zv - sys.z0, sys.step_dz);
        flow_jets_on_nodes(sys, sys.z0, zv, &x, &xi, steps, 1)?.pop().unwrap()
    };
    if !z_varies || n == 0 {
        return Ok((x1, xi1));
    }
    let a = sys.a.as_ref().unwrap();
    let zj = Jet::var(Axis::Z, zv, n);
    let (mut px, mut pxi) = (x1.clone(), xi1.clone());
    for _ in 0..n {
        let (a_xi, a_x) = a.field_args(&zj, &px, &pxi)?;
        px = &x1 - &a_xi.integrate_z(n);
        pxi = &xi1 + &a_x.integrate_z(n);
    }
    Ok((px, pxi))
}

fn depends_on_z(j: &RJet) -> bool {
    let n = j.order();
    (1..=n).any(|d| (0..=d).any(|a| (0..=d - a).any(|b| d - a - b > 0 && j.coeff(a, b, d - a - b) != 0.0)))
}

/// b̃ = b ∘ Φ_{z,z0}.
#[derive(Clone)]
pub struct PullbackSymbol {
    pub sys: RaySystem,
    pub b: Symbol,
}

impl SymbolModel for PullbackSymbol {
    fn info(&self) -> SymbolInfo {
        let mut info = self.b.info();
        info.x_independent = info.x_independent && self.sys.a.as_ref().is_none_or(|a| a.info().x_independent);
        info.z_independent = info.z_independent && self.sys.a.is_none();
        info
    }

    fn eval_args(&self, z: &RJet, x: &RJet, xi: &RJet) -> Result<RJet> {
        let (px, pxi) = flow_args(&self.sys, z, x, xi)?;
        self.b.eval_args(z, &px, &pxi)
    }

    fn value(&self, z: f64, x: f64, xi: f64) -> f64 {
        let (mut px, mut pxi) = (x, xi);
        if self.sys.a.is_some() && z != self.sys.z0 {
            let steps = n_steps(z - self.sys.z0, self.sys.step_dz);
            let h = (z - self.sys.z0) / steps as f64;
            for i in 0..steps {
                match self.sys.step(self.sys.z0 + h * i as f64, px, pxi, h) {
                    Ok(s) => (px, pxi) = s,
                    Err(_) => return f64::NAN,
                }
            }
        }
        self.b.value(z, px, pxi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbol::{HyperbolicA, MultiplierB};
    use std::sync::Arc;

    #[test]
    fn cumulative_simpson_is_exact_on_cubics() {
        let h = 0.1;
        let f: Vec<f64> = (0..=9).map(|i| (i as f64 * h).powi(3)).collect();
        let c = cumulative_simpson(&f, h, 0.0);
        for (i, v) in c.iter().enumerate() {
            let t = i as f64 * h;
            let tol = if i % 2 == 0 { 1e-15 } else { 0.26 * h.powi(4) };
            assert!((v - t.powi(4) / 4.0).abs() < tol, "{i}: {v}");
        }
        let q: Vec<f64> = (0..=7).map(|i| (i as f64 * h).powi(2)).collect();
        for (i, v) in cumulative_simpson(&q, h, 0.0).iter().enumerate() {
            assert!((v - (i as f64 * h).powi(3) / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn transport_example() {
        let sys = RaySystem::new(Some(Arc::new(HyperbolicA { c0: 0.7, eps_a: 0.0 })), 0.0, 1e-3).unwrap();
        let r = trace_ray(&sys, 0.0, 2.0, 1.0, 3.0).unwrap();
        assert!((r.gamma_x.last().unwrap() + 0.4).abs() < 1e-12);
        assert_eq!(*r.gamma_xi.last().unwrap(), 3.0);
        assert_eq!(r.z_samples.len(), 2001);
        assert!(matches!(trace_ray(&sys, 0.0, 1.0, 0.0, 0.0), Err(Error::DegenerateCovector)));
    }

    #[test]
    fn constant_integrand() {
        let sys = RaySystem::new(None, 0.0, 1e-3).unwrap();
        let b = MultiplierB { beta0: 0.5, gamma: 1.0 };
        let i = damping_integral_i(&sys, &b, 1.0, 0.3, 3.0, 0.02).unwrap();
        assert!((i - 0.5 * 10f64.sqrt()).abs() < 1e-14);
        assert_eq!(damping_integral_i(&sys, &b, 0.0, 0.3, 3.0, 0.02).unwrap(), 0.0);
    }

    #[test]
    fn flow_jet_matches_finite_differences() {
        let a: Symbol = Arc::new(HyperbolicA { c0: 0.5, eps_a: 0.3 });
        let sys = RaySystem::new(Some(a), 0.0, 1e-3).unwrap();
        let z = 0.8;
        let (px, pxi) = flow_args(
            &sys,
            &Jet::var(Axis::Z, z, 2),
            &Jet::var(Axis::X, 1.2, 2),
            &Jet::var(Axis::Xi, 5.0, 2),
        )
        .unwrap();
        let phi = |z: f64, x: f64, xi: f64| {
            let r = trace_ray(&sys, 0.0, z, x, xi).unwrap();
            (*r.gamma_x.last().unwrap(), *r.gamma_xi.last().unwrap())
        };
        let e = 1e-5;
        let dx = (phi(z, 1.2 + e, 5.0).0 - phi(z, 1.2 - e, 5.0).0) / (2.0 * e);
        assert!((px.derivative(1, 0, 0).unwrap() - dx).abs() < 1e-7);
        let dz = (phi(z + e, 1.2, 5.0).1 - phi(z - e, 1.2, 5.0).1) / (2.0 * e);
        assert!((pxi.derivative(0, 0, 1).unwrap() - dz).abs() < 1e-7);
        let dzz = (phi(z + 1e-3, 1.2, 5.0).0 - 2.0 * phi(z, 1.2, 5.0).0 + phi(z - 1e-3, 1.2, 5.0).0) / 1e-6;
        assert!((px.derivative(0, 0, 2).unwrap() - dzz).abs() < 1e-5);
    }

    #[test]
    fn pullback_scalar_path_matches_jets() {
        let a: Symbol = Arc::new(HyperbolicA { c0: 0.5, eps_a: 0.1 });
        let b: Symbol = Arc::new(MultiplierB { beta0: 1.0, gamma: 1.0 });
        let pb = PullbackSymbol { sys: RaySystem::new(Some(a), 0.0, 1e-3).unwrap(), b };
        for &(x, xi) in &[(0.3, 5.0), (2.0, 0.0), (4.0, -7.0)] {
            let v = pb.value(0.9, x, xi);
            let j = pb.jet(0.9, x, xi, 0).unwrap().value();
            assert!((v - j).abs() <= 1e-12 * v.abs().max(1.0), "{v} vs {j}");
        }
    }
}
