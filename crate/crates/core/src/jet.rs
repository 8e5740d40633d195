//! Truncated Taylor jets in the three variables (x, ξ, z).
//!
//! A jet of order `n` stores the normalized Taylor coefficients
//! `c[a,b,c] = ∂_x^a ∂_ξ^b ∂_z^c f / (a! b! c!)` for every monomial with
//! `a + b + c <= n`. Monomials are graded by total degree; inside a degree
//! they are ordered by descending `a`, then descending `b`.

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};
use std::sync::OnceLock;

use num_complex::Complex64;
use smallvec::SmallVec;

/// Highest supported jet order.
pub const MAX_ORDER: usize = 10;

/// Axis of differentiation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    X,
    Xi,
    Z,
}

pub trait Scalar:
    Copy
    + Debug
    + Send
    + Sync
    + PartialEq
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + 'static
{
    fn zero() -> Self;
    fn from_f64(v: f64) -> Self;
    fn scale(self, s: f64) -> Self;
    fn abs(self) -> f64;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn from_f64(v: f64) -> Self {
        v
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
    fn abs(self) -> f64 {
        f64::abs(self)
    }
}

impl Scalar for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn from_f64(v: f64) -> Self {
        Complex64::new(v, 0.0)
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
    fn abs(self) -> f64 {
        self.norm()
    }
}

/// Number of monomials of total degree <= n in three variables.
pub const fn n_coeffs(n: usize) -> usize {
    (n + 1) * (n + 2) * (n + 3) / 6
}

/// Position of the monomial x^a ξ^b z^c.
#[inline]
pub fn index(a: usize, b: usize, c: usize) -> usize {
    let d = a + b + c;
    let base = if d == 0 { 0 } else { n_coeffs(d - 1) };
    base + (d - a) * (d - a + 1) / 2 + c
}

struct Tables {
    monomials: Vec<[u8; 3]>,
    // (i, j, k): coefficient i times coefficient j lands at k
    mul: Vec<(u16, u16, u16)>,
}

fn tables(order: usize) -> &'static Tables {
    static CELL: OnceLock<Vec<Tables>> = OnceLock::new();
    &CELL.get_or_init(|| (0..=MAX_ORDER).map(build_tables).collect())[order]
}

fn build_tables(order: usize) -> Tables {
    let mut monomials = Vec::with_capacity(n_coeffs(order));
    for d in 0..=order {
        for a in (0..=d).rev() {
            for b in (0..=d - a).rev() {
                monomials.push([a as u8, b as u8, (d - a - b) as u8]);
            }
        }
    }
    let mut mul = Vec::new();
    for (i, p) in monomials.iter().enumerate() {
        for (j, q) in monomials.iter().enumerate() {
            let s = [p[0] + q[0], p[1] + q[1], p[2] + q[2]];
            if (s[0] + s[1] + s[2]) as usize <= order {
                let k = index(s[0] as usize, s[1] as usize, s[2] as usize);
                mul.push((i as u16, j as u16, k as u16));
            }
        }
    }
    Tables { monomials, mul }
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Jet<T: Scalar> {
    order: usize,
    c: SmallVec<[T; 20]>,
}

pub type RJet = Jet<f64>;
pub type CJet = Jet<Complex64>;

impl<T: Scalar> Jet<T> {
    pub fn constant(v: T, order: usize) -> Self {
        assert!(order <= MAX_ORDER, "jet order {order} above {MAX_ORDER}");
        let mut c: SmallVec<[T; 20]> = SmallVec::from_elem(T::zero(), n_coeffs(order));
        c[0] = v;
        Jet { order, c }
    }

    pub fn zero(order: usize) -> Self {
        Self::constant(T::zero(), order)
    }

    /// The coordinate function `axis` expanded about `v`.
    pub fn var(axis: Axis, v: T, order: usize) -> Self {
        let mut j = Self::constant(v, order);
        if order >= 1 {
            let k = match axis {
                Axis::X => index(1, 0, 0),
                Axis::Xi => index(0, 1, 0),
                Axis::Z => index(0, 0, 1),
            };
            j.c[k] = T::from_f64(1.0);
        }
        j
    }

    pub fn from_coeffs(order: usize, coeffs: &[T]) -> Self {
        assert_eq!(coeffs.len(), n_coeffs(order));
        Jet {
            order,
            c: SmallVec::from_slice(coeffs),
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn coeffs(&self) -> &[T] {
        &self.c
    }

    pub fn value(&self) -> T {
        self.c[0]
    }

    /// Normalized Taylor coefficient of x^a ξ^b z^c.
    pub fn coeff(&self, a: usize, b: usize, c: usize) -> T {
        if a + b + c > self.order {
            return T::zero();
        }
        self.c[index(a, b, c)]
    }

    /// The partial derivative ∂_x^a ∂_ξ^b ∂_z^c at the expansion point.
    pub fn derivative(&self, a: usize, b: usize, c: usize) -> Option<T> {
        if a + b + c > self.order {
            return None;
        }
        Some(
            self.c[index(a, b, c)].scale(factorial(a) * factorial(b) * factorial(c)),
        )
    }

    pub fn is_zero(&self) -> bool {
        self.c.iter().all(|v| *v == T::zero())
    }

    pub fn truncate(&self, order: usize) -> Self {
        let order = order.min(self.order);
        Jet {
            order,
            c: SmallVec::from_slice(&self.c[..n_coeffs(order)]),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        Jet {
            order: self.order,
            c: self.c.iter().map(|v| v.scale(s)).collect(),
        }
    }

    pub fn mul_scalar(&self, s: T) -> Self {
        Jet {
            order: self.order,
            c: self.c.iter().map(|v| *v * s).collect(),
        }
    }

    pub fn add_const(&self, v: T) -> Self {
        let mut out = self.clone();
        out.c[0] += v;
        out
    }

    /// Partial derivative as a jet of one lower order.
    pub fn diff(&self, axis: Axis) -> Self {
        assert!(self.order >= 1, "cannot differentiate an order-0 jet");
        let order = self.order - 1;
        let t = tables(order);
        let c = t
            .monomials
            .iter()
            .map(|m| {
                let (a, b, c) = (m[0] as usize, m[1] as usize, m[2] as usize);
                let (src, k) = match axis {
                    Axis::X => (index(a + 1, b, c), a + 1),
                    Axis::Xi => (index(a, b + 1, c), b + 1),
                    Axis::Z => (index(a, b, c + 1), c + 1),
                };
                self.c[src].scale(k as f64)
            })
            .collect();
        Jet { order, c }
    }

    /// Repeated partial derivative.
    pub fn diff_n(&self, axis: Axis, n: usize) -> Self {
        (0..n).fold(self.clone(), |j, _| j.diff(axis))
    }

    /// Antiderivative in z vanishing at z-offset zero; the order rises by one
    /// but is capped at `cap`.
    pub fn integrate_z(&self, cap: usize) -> Self {
        let order = (self.order + 1).min(cap);
        let t = tables(order);
        let c = t
            .monomials
            .iter()
            .map(|m| {
                let (a, b, c) = (m[0] as usize, m[1] as usize, m[2] as usize);
                if c == 0 || a + b + c - 1 > self.order {
                    T::zero()
                } else {
                    self.c[index(a, b, c - 1)].scale(1.0 / c as f64)
                }
            })
            .collect();
        Jet { order, c }
    }

    /// Evaluates `Σ g[k] δ^k` where δ is `self` minus its constant term.
    pub fn compose(&self, g: &[T]) -> Self {
        let mut delta = self.clone();
        delta.c[0] = T::zero();
        let n = g.len().min(self.order + 1);
        let mut r = Jet::constant(g[n - 1], self.order);
        for k in (0..n - 1).rev() {
            r = &r * &delta;
            r.c[0] += g[k];
        }
        r
    }

    /// Substitutes `self` (a polynomial in the offsets) with offset jets that
    /// have zero constant term: `Σ c[a,b,c] dx^a dξ^b dz^c`.
    pub fn substitute(&self, dx: &Self, dxi: &Self, dz: &Self) -> Self {
        let order = dx.order.min(dxi.order).min(dz.order);
        let pow = |j: &Self| {
            let mut p = vec![Jet::constant(T::from_f64(1.0), order)];
            for k in 1..=self.order {
                let next = &p[k - 1] * j;
                p.push(next);
            }
            p
        };
        let (px, pxi, pz) = (pow(dx), pow(dxi), pow(dz));
        let mut out = Jet::zero(order);
        for (i, m) in tables(self.order).monomials.iter().enumerate() {
            if self.c[i] == T::zero() {
                continue;
            }
            let (a, b, c) = (m[0] as usize, m[1] as usize, m[2] as usize);
            if a + b + c > order && (a + b + c) > 0 {
                // offsets have no constant term, so these monomials vanish
                continue;
            }
            let term = &(&px[a] * &pxi[b]) * &pz[c];
            out = &out + &term.mul_scalar(self.c[i]);
        }
        out
    }
}

impl RJet {
    pub fn to_complex(&self) -> CJet {
        Jet {
            order: self.order,
            c: self.c.iter().map(|v| Complex64::new(*v, 0.0)).collect(),
        }
    }

    pub fn exp(&self) -> Self {
        let e = self.c[0].exp();
        let g: Vec<f64> = (0..=self.order).map(|k| e / factorial(k)).collect();
        self.compose(&g)
    }

    /// `self^p` for a positive constant term.
    pub fn powf(&self, p: f64) -> Self {
        let f0 = self.c[0];
        assert!(f0 > 0.0, "powf needs a positive base, got {f0}");
        let mut g = Vec::with_capacity(self.order + 1);
        let mut binom = 1.0;
        for k in 0..=self.order {
            g.push(binom * f0.powf(p - k as f64));
            binom *= (p - k as f64) / (k + 1) as f64;
        }
        self.compose(&g)
    }

    pub fn sqrt(&self) -> Self {
        self.powf(0.5)
    }

    pub fn recip(&self) -> Self {
        self.powf(-1.0)
    }

    pub fn cos(&self) -> Self {
        let (s, c) = self.c[0].sin_cos();
        let cyc = [c, -s, -c, s];
        let g: Vec<f64> = (0..=self.order).map(|k| cyc[k % 4] / factorial(k)).collect();
        self.compose(&g)
    }

    pub fn sin(&self) -> Self {
        let (s, c) = self.c[0].sin_cos();
        let cyc = [s, c, -s, -c];
        let g: Vec<f64> = (0..=self.order).map(|k| cyc[k % 4] / factorial(k)).collect();
        self.compose(&g)
    }

    /// `h(self)` with `h(y) = exp(-1/y)` for y > 0 and 0 otherwise.
    pub fn exp_inv(&self) -> Self {
        let y = self.c[0];
        if y <= 0.0 {
            return Jet::zero(self.order);
        }
        let h = (-1.0 / y).exp();
        let t = 1.0 / y;
        let g: Vec<f64> = exp_inv_polys(self.order)
            .iter()
            .enumerate()
            .map(|(k, p)| h * eval_poly(p, t) / factorial(k))
            .collect();
        self.compose(&g)
    }
}

impl CJet {
    pub fn re(&self) -> RJet {
        Jet {
            order: self.order,
            c: self.c.iter().map(|v| v.re).collect(),
        }
    }

    pub fn mul_real(&self, r: &RJet) -> Self {
        self * &r.to_complex()
    }
}

/// Polynomials P_j with h^(j)(y) = h(y) P_j(1/y) for h(y) = exp(-1/y).
pub fn exp_inv_polys(j_max: usize) -> Vec<Vec<f64>> {
    let mut out = vec![vec![1.0]];
    for _ in 0..j_max {
        let p = out.last().unwrap();
        // P_{j+1}(t) = t^2 (P_j(t) - P_j'(t))
        let mut q = vec![0.0; p.len() + 2];
        for (i, &ci) in p.iter().enumerate() {
            q[i + 2] += ci;
            if i > 0 {
                q[i + 1] -= ci * i as f64;
            }
        }
        out.push(q);
    }
    out
}

pub fn eval_poly(p: &[f64], t: f64) -> f64 {
    p.iter().rev().fold(0.0, |acc, &c| acc * t + c)
}

impl<T: Scalar> Add for &Jet<T> {
    type Output = Jet<T>;
    fn add(self, rhs: Self) -> Jet<T> {
        let order = self.order.min(rhs.order);
        let n = n_coeffs(order);
        Jet {
            order,
            c: (0..n).map(|i| self.c[i] + rhs.c[i]).collect(),
        }
    }
}

impl<T: Scalar> Sub for &Jet<T> {
    type Output = Jet<T>;
    fn sub(self, rhs: Self) -> Jet<T> {
        let order = self.order.min(rhs.order);
        let n = n_coeffs(order);
        Jet {
            order,
            c: (0..n).map(|i| self.c[i] - rhs.c[i]).collect(),
        }
    }
}

impl<T: Scalar> Mul for &Jet<T> {
    type Output = Jet<T>;
    fn mul(self, rhs: Self) -> Jet<T> {
        let order = self.order.min(rhs.order);
        let mut c: SmallVec<[T; 20]> = SmallVec::from_elem(T::zero(), n_coeffs(order));
        for &(i, j, k) in &tables(order).mul {
            c[k as usize] += self.c[i as usize] * rhs.c[j as usize];
        }
        Jet { order, c }
    }
}

impl<T: Scalar> Neg for &Jet<T> {
    type Output = Jet<T>;
    fn neg(self) -> Jet<T> {
        Jet {
            order: self.order,
            c: self.c.iter().map(|v| -*v).collect(),
        }
    }
}
