//! Fixtures shared by the benchmarks.

use std::f64::consts::PI;
use std::sync::Arc;

use parametrix_core::{build_cutoff_b, AssumptionParams, CutoffFamily, Grid, HKind, HyperbolicA, IVPProblem, RhoFn, Symbol};

/// Shipped cutoff b on an N-point grid, with or without the shipped a.
pub fn shipped_problem(n: usize, with_a: bool) -> IVPProblem {
    let b = build_cutoff_b(CutoffFamily {
        gamma: 1.0,
        w0: 1.0,
        rho: RhoFn::Cosine { r0: 0.5, x_c: PI, s: 0.0, z0: 0.0 },
        h_kind: HKind::ExpInv,
        beta: 0.5,
        l: 4,
    })
    .unwrap();
    let a: Option<Symbol> = with_a.then(|| Arc::new(HyperbolicA { c0: 0.5, eps_a: 0.1 }) as Symbol);
    let params = AssumptionParams::new(1.0, 4, 0.0, 1.0).unwrap();
    IVPProblem::new(a, Arc::new(b), None, params, Grid::new(n).unwrap(), 1e-3).unwrap()
}
