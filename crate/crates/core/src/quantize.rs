//! Discrete Kohn–Nirenberg quantization on the periodic grid.
//!
//! û_k = (1/N) Σ_j u_j e^{−2πi jk/N},  u_j = Σ_k û_k e^{2πi jk/N},
//! k ∈ {−N/2, …, N/2 − 1}. Sums over k run in ascending k.

use std::f64::consts::PI;
use std::io::{self, Write};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::jet::{Axis, CJet};
use crate::symbol::SymbolModel;

type C64 = Complex64;

#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    n: usize,
    roots: Vec<C64>,
}

impl Grid {
    pub fn new(n: usize) -> Result<Self> {
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::InvalidParameter(format!("grid size {n} must be a power of two >= 8")));
        }
        let roots = (0..n)
            .map(|m| C64::from_polar(1.0, 2.0 * PI * m as f64 / n as f64))
            .collect();
        Ok(Grid { n, roots })
    }

    pub fn n_points(&self) -> usize {
        self.n
    }

    pub fn x(&self, j: usize) -> f64 {
        2.0 * PI * j as f64 / self.n as f64
    }

    pub fn x_nodes(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.x(j)).collect()
    }

    /// Frequency at table column `idx`.
    pub fn k(&self, idx: usize) -> i64 {
        idx as i64 - (self.n / 2) as i64
    }

    pub fn freqs(&self) -> Vec<i64> {
        (0..self.n).map(|i| self.k(i)).collect()
    }

    /// e^{i k x_j}
    #[inline]
    pub fn phase(&self, j: usize, k: i64) -> C64 {
        self.roots[((j as i64 * k).rem_euclid(self.n as i64)) as usize]
    }

    pub fn k_max(&self) -> usize {
        self.n / 2
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WaveField {
    pub grid: Grid,
    pub z: f64,
    pub values: Vec<C64>,
}

impl WaveField {
    pub fn zeros(grid: &Grid, z: f64) -> Self {
        WaveField {
            grid: grid.clone(),
            z,
            values: vec![C64::new(0.0, 0.0); grid.n],
        }
    }

    /// Continuous-scale L² norm on [0, 2π).
    pub fn norm(&self) -> f64 {
        let s: f64 = self.values.iter().map(|v| v.norm_sqr()).sum();
        (s * 2.0 * PI / self.grid.n as f64).sqrt()
    }

    pub fn coeffs(&self) -> Vec<C64> {
        dft(&self.grid, &self.values)
    }

    pub fn from_coeffs(grid: &Grid, z: f64, c: &[C64]) -> Self {
        WaveField {
            grid: grid.clone(),
            z,
            values: idft(grid, c),
        }
    }

    pub fn sub(&self, other: &WaveField) -> WaveField {
        WaveField {
            grid: self.grid.clone(),
            z: self.z,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }
}

/// Relative L² distance ‖u − v‖ / max(‖v‖, floor).
pub fn rel_error(u: &WaveField, reference: &WaveField, floor: f64) -> f64 {
    u.sub(reference).norm() / reference.norm().max(floor)
}

pub fn dft(grid: &Grid, u: &[C64]) -> Vec<C64> {
    let n = grid.n;
    let inv = 1.0 / n as f64;
    (0..n)
        .into_par_iter()
        .map(|idx| {
            let k = grid.k(idx);
            let mut s = C64::new(0.0, 0.0);
            for (j, v) in u.iter().enumerate() {
                s += v * grid.phase(j, -k);
            }
            s * inv
        })
        .collect()
}

pub fn idft(grid: &Grid, c: &[C64]) -> Vec<C64> {
    (0..grid.n)
        .into_par_iter()
        .map(|j| {
            let mut s = C64::new(0.0, 0.0);
            for (idx, v) in c.iter().enumerate() {
                s += v * grid.phase(j, grid.k(idx));
            }
            s
        })
        .collect()
}

/// Table of f(z, x_j, k), row-major in j, columns in ascending k.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSymbol {
    pub grid: Grid,
    pub z: f64,
    pub table: Vec<C64>,
}

impl GridSymbol {
    pub fn from_fn(grid: &Grid, z: f64, f: impl Fn(f64, f64) -> C64 + Sync) -> Self {
        let n = grid.n;
        let table = (0..n * n)
            .into_par_iter()
            .map(|i| f(grid.x(i / n), grid.k(i % n) as f64))
            .collect();
        GridSymbol {
            grid: grid.clone(),
            z,
            table,
        }
    }

    pub fn from_model(model: &dyn SymbolModel, grid: &Grid, z: f64) -> Self {
        Self::from_fn(grid, z, |x, xi| C64::new(model.value(z, x, xi), 0.0))
    }

    #[inline]
    pub fn at(&self, j: usize, idx: usize) -> C64 {
        self.table[j * self.grid.n + idx]
    }

    pub fn is_finite(&self) -> bool {
        self.table.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    /// CSV with columns j, k, re, im.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "j,k,re,im")?;
        let n = self.grid.n;
        for j in 0..n {
            for idx in 0..n {
                let v = self.at(j, idx);
                writeln!(w, "{},{},{},{}", j, self.grid.k(idx), fmt17(v.re), fmt17(v.im))?;
            }
        }
        Ok(())
    }
}

/// Round-trip exact float formatting (17 significant digits).
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

fn check_grid(a: &Grid, b: &Grid) -> Result<()> {
    if a.n != b.n {
        return Err(Error::GridMismatch(a.n, b.n));
    }
    Ok(())
}

/// v_j = Σ_k f(x_j, k) û_k e^{i k x_j}.
pub fn apply_op(sym: &GridSymbol, u: &WaveField) -> Result<WaveField> {
    check_grid(&sym.grid, &u.grid)?;
    Ok(apply_with_coeffs(sym, &u.coeffs(), u.z))
}

pub(crate) fn apply_with_coeffs(sym: &GridSymbol, uh: &[C64], z: f64) -> WaveField {
    let g = &sym.grid;
    let n = g.n;
    let values = (0..n)
        .into_par_iter()
        .map(|j| {
            let row = &sym.table[j * n..(j + 1) * n];
            let mut s = C64::new(0.0, 0.0);
            for idx in 0..n {
                s += row[idx] * uh[idx] * g.phase(j, g.k(idx));
            }
            s
        })
        .collect();
    WaveField {
        grid: g.clone(),
        z,
        values,
    }
}

/// The Hermitian adjoint Op(f)^H u.
pub fn apply_adjoint(sym: &GridSymbol, u: &WaveField) -> Result<WaveField> {
    check_grid(&sym.grid, &u.grid)?;
    let g = &sym.grid;
    let n = g.n;
    let inv = 1.0 / n as f64;
    let w: Vec<C64> = (0..n)
        .into_par_iter()
        .map(|idx| {
            let k = g.k(idx);
            let mut s = C64::new(0.0, 0.0);
            for j in 0..n {
                s += sym.at(j, idx).conj() * g.phase(j, -k) * u.values[j];
            }
            s * inv
        })
        .collect();
    Ok(WaveField::from_coeffs(g, u.z, &w))
}

/// ½ (Op(f) + Op(f)^H) u.
pub fn apply_symmetrized(sym: &GridSymbol, u: &WaveField) -> Result<WaveField> {
    let a = apply_op(sym, u)?;
    let b = apply_adjoint(sym, u)?;
    Ok(WaveField {
        grid: u.grid.clone(),
        z: u.z,
        values: a.values.iter().zip(&b.values).map(|(p, q)| (p + q) * 0.5).collect(),
    })
}

/// Fourier multiplier path: f indexed by table column.
pub fn apply_multiplier(f: &[C64], u: &WaveField) -> WaveField {
    let c: Vec<C64> = u.coeffs().iter().zip(f).map(|(a, b)| a * b).collect();
    WaveField::from_coeffs(&u.grid, u.z, &c)
}

/// 2/3-rule truncation: keep |k| ≤ N/3.
pub fn dealias(u: &WaveField) -> WaveField {
    let g = &u.grid;
    let cut = (g.n / 3) as i64;
    let c: Vec<C64> = u
        .coeffs()
        .iter()
        .enumerate()
        .map(|(idx, v)| if g.k(idx).abs() <= cut { *v } else { C64::new(0.0, 0.0) })
        .collect();
    WaveField::from_coeffs(g, u.z, &c)
}

/// Unit-norm Gaussian packet at wavenumber K with width K^{1/2}, centred at x_c.
pub fn wave_packet(grid: &Grid, z: f64, band_k: usize, x_c: f64) -> Result<WaveField> {
    let cut = grid.n / 3;
    if band_k == 0 || band_k > cut {
        return Err(Error::InvalidInput(format!("band K = {band_k} outside 1..={cut}")));
    }
    let kk = band_k as f64;
    let c: Vec<C64> = (0..grid.n)
        .map(|idx| {
            let k = grid.k(idx);
            if k.unsigned_abs() as usize > cut {
                return C64::new(0.0, 0.0);
            }
            let d = k as f64 - kk;
            C64::from_polar((-d * d / (2.0 * kk)).exp(), -(k as f64) * x_c)
        })
        .collect();
    let u = WaveField::from_coeffs(grid, z, &c);
    let s = 1.0 / u.norm();
    Ok(WaveField {
        values: u.values.iter().map(|v| v * s).collect(),
        ..u
    })
}

/// Seeded random field with modes |k| ≤ band, decaying like 1/(1+|k|).
pub fn random_field(grid: &Grid, z: f64, band: usize, seed: u64) -> WaveField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c: Vec<C64> = (0..grid.n)
        .map(|idx| {
            let k = grid.k(idx).unsigned_abs() as usize;
            let re: f64 = rng.gen_range(-1.0..1.0);
            let im: f64 = rng.gen_range(-1.0..1.0);
            if k <= band {
                C64::new(re, im) / (1.0 + k as f64)
            } else {
                C64::new(0.0, 0.0)
            }
        })
        .collect();
    WaveField::from_coeffs(grid, z, &c)
}

/// A complex symbol with jets in (x, ξ, z).
pub trait JetSymbol: Send + Sync {
    fn cjet(&self, z: f64, x: f64, xi: f64, order: usize) -> Result<CJet>;
}

impl<T: SymbolModel + ?Sized> JetSymbol for T {
    fn cjet(&self, z: f64, x: f64, xi: f64, order: usize) -> Result<CJet> {
        Ok(self.jet(z, x, xi, order)?.to_complex())
    }
}

/// Σ_{m < n_terms} ((−i)^m / m!) ∂_ξ^m f ∂_x^m g on the grid.
pub fn compose_symbols(f: &dyn JetSymbol, g: &dyn JetSymbol, n_terms: usize, grid: &Grid, z: f64) -> Result<GridSymbol> {
    if n_terms == 0 {
        return Err(Error::InvalidInput("n_terms must be positive".into()));
    }
    let n = grid.n;
    let order = n_terms - 1;
    let vals: Vec<Result<C64>> = (0..n * n)
        .into_par_iter()
        .map(|i| {
            let (x, xi) = (grid.x(i / n), grid.k(i % n) as f64);
            let fj = f.cjet(z, x, xi, order)?;
            let gj = g.cjet(z, x, xi, order)?;
            Ok(composition_value(&fj, &gj, n_terms))
        })
        .collect();
    let table = vals.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(GridSymbol {
        grid: grid.clone(),
        z,
        table,
    })
}

fn composition_value(f: &CJet, g: &CJet, n_terms: usize) -> C64 {
    let mut s = C64::new(0.0, 0.0);
    let mut c = C64::new(1.0, 0.0);
    for m in 0..n_terms {
        let df = f.derivative(0, m, 0).unwrap();
        let dg = g.derivative(m, 0, 0).unwrap();
        s += c * df * dg;
        c = c * C64::new(0.0, -1.0) / (m + 1) as f64;
    }
    s
}

/// Composition series as a jet, keeping `n_terms` terms.
pub fn compose_jets(f: &CJet, g: &CJet, n_terms: usize) -> CJet {
    let mut out = CJet::zero(f.order().min(g.order()).saturating_sub(n_terms - 1));
    let mut c = C64::new(1.0, 0.0);
    for m in 0..n_terms {
        let t = &f.diff_n(Axis::Xi, m) * &g.diff_n(Axis::X, m);
        out = &out + &t.mul_scalar(c);
        c = c * C64::new(0.0, -1.0) / (m + 1) as f64;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbol::{MultiplierB, SymbolInfo};
    use crate::jet::RJet;

    fn grid() -> Grid {
        Grid::new(32).unwrap()
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(Grid::new(12).is_err());
        assert!(Grid::new(4).is_err());
    }

    #[test]
    fn identity_round_trip() {
        let g = grid();
        let u = random_field(&g, 0.0, 10, 3);
        let one = GridSymbol::from_fn(&g, 0.0, |_, _| C64::new(1.0, 0.0));
        let v = apply_op(&one, &u).unwrap();
        assert!(rel_error(&v, &u, 1e-300) < 1e-12);
    }

    #[test]
    fn multiplier_and_multiplication() {
        let g = grid();
        let u = random_field(&g, 0.0, 10, 4);
        let sym = GridSymbol::from_fn(&g, 0.0, |_, xi| C64::new(1.0 + xi * xi, 0.0).sqrt());
        let f: Vec<C64> = (0..32).map(|i| C64::new(1.0 + (g.k(i) as f64).powi(2), 0.0).sqrt()).collect();
        assert!(rel_error(&apply_op(&sym, &u).unwrap(), &apply_multiplier(&f, &u), 1e-300) < 1e-12);

        let e = GridSymbol::from_fn(&g, 0.0, |x, _| C64::from_polar(1.0, x));
        let v = apply_op(&e, &u).unwrap();
        for j in 0..32 {
            assert!((v.values[j] - C64::from_polar(1.0, g.x(j)) * u.values[j]).norm() < 1e-12);
        }
    }

    #[test]
    fn adjoint_pairs() {
        let g = grid();
        let sym = GridSymbol::from_fn(&g, 0.0, |x, xi| C64::new(x.cos() * xi, x.sin()));
        let u = random_field(&g, 0.0, 15, 5);
        let w = random_field(&g, 0.0, 15, 6);
        let dot = |a: &WaveField, b: &WaveField| -> C64 { a.values.iter().zip(&b.values).map(|(p, q)| p.conj() * q).sum() };
        let lhs = dot(&w, &apply_op(&sym, &u).unwrap());
        let rhs = dot(&apply_adjoint(&sym, &w).unwrap(), &u);
        assert!((lhs - rhs).norm() < 1e-10 * lhs.norm().max(1.0));
    }

    #[test]
    fn dealias_is_idempotent() {
        let g = grid();
        let u = random_field(&g, 0.0, 16, 7);
        let once = dealias(&u);
        assert!(rel_error(&dealias(&once), &once, 1e-300) < 1e-13);
    }

    #[test]
    fn packet_is_unit_and_band_limited() {
        let g = Grid::new(64).unwrap();
        let u = wave_packet(&g, 0.0, 16, 1.0).unwrap();
        assert!((u.norm() - 1.0).abs() < 1e-12);
        let c = u.coeffs();
        for idx in 0..64 {
            if g.k(idx).abs() > 21 {
                assert!(c[idx].norm() < 1e-14);
            }
        }
        assert!(wave_packet(&g, 0.0, 22, 0.0).is_err());
    }

    struct Xi;
    impl SymbolModel for Xi {
        fn info(&self) -> SymbolInfo {
            MultiplierB { beta0: 1.0, gamma: 1.0 }.info()
        }
        fn eval_args(&self, _z: &RJet, _x: &RJet, xi: &RJet) -> Result<RJet> {
            Ok(xi.clone())
        }
    }
    struct Eix;
    impl JetSymbol for Eix {
        fn cjet(&self, _z: f64, x: f64, _xi: f64, order: usize) -> Result<CJet> {
            let xj = RJet::var(Axis::X, x, order);
            let c = xj.cos().to_complex();
            let s = xj.sin().to_complex().mul_scalar(C64::new(0.0, 1.0));
            Ok(&c + &s)
        }
    }

    #[test]
    fn composition_matches_operator_product_on_plane_waves() {
        let g = grid();
        let fg = compose_symbols(&Xi, &Eix, 2, &g, 0.0).unwrap();
        for idx in 0..g.n_points() {
            let xi = g.k(idx) as f64;
            for j in 0..g.n_points() {
                let want = C64::from_polar(1.0, g.x(j)) * (xi + 1.0);
                assert!((fg.at(j, idx) - want).norm() < 1e-12);
            }
        }
        // Op(ξ) Op(e^{ix}) e^{ikx} = (k + 1) e^{i(k+1)x}
        let k = 5;
        let u = WaveField {
            grid: g.clone(),
            z: 0.0,
            values: (0..32).map(|j| g.phase(j, k)).collect(),
        };
        let eix = GridSymbol::from_fn(&g, 0.0, |x, _| C64::from_polar(1.0, x));
        let xi = GridSymbol::from_fn(&g, 0.0, |_, xi| C64::new(xi, 0.0));
        let prod = apply_op(&xi, &apply_op(&eix, &u).unwrap()).unwrap();
        let direct = apply_op(&fg, &u).unwrap();
        assert!(rel_error(&direct, &prod, 1e-300) < 1e-12);
    }

    #[test]
    fn unit_factors() {
        let g = grid();
        let one = crate::symbol::ZeroSymbol(crate::symbol::SymbolKind::Generic);
        struct One;
        impl JetSymbol for One {
            fn cjet(&self, _z: f64, _x: f64, _xi: f64, order: usize) -> Result<CJet> {
                Ok(CJet::constant(C64::new(1.0, 0.0), order))
            }
        }
        let f = compose_symbols(&Eix, &One, 3, &g, 0.0).unwrap();
        let h = compose_symbols(&One, &Eix, 3, &g, 0.0).unwrap();
        for j in 0..32 {
            assert!((f.at(j, 3) - C64::from_polar(1.0, g.x(j))).norm() < 1e-13);
            assert!((h.at(j, 3) - C64::from_polar(1.0, g.x(j))).norm() < 1e-13);
        }
        let z = compose_symbols(&one, &Eix, 2, &g, 0.0).unwrap();
        assert!(z.table.iter().all(|v| v.norm() == 0.0));
    }
}
