use std::f64::consts::PI;
use std::sync::Arc;

use parametrix_core::quantize::{dealias, random_field};
use parametrix_core::rays::{damping_integral_i, trace_ray, trace_ray_damped};
use parametrix_core::{build_cutoff_b, CutoffFamily, Grid, HKind, HyperbolicA, RaySystem, RhoFn, Symbol};
use proptest::prelude::*;

fn shipped_a() -> Symbol {
    Arc::new(HyperbolicA { c0: 0.5, eps_a: 0.1 })
}

fn cutoff(s: f64) -> Symbol {
    Arc::new(
        build_cutoff_b(CutoffFamily {
            gamma: 1.0,
            w0: 1.0,
            rho: RhoFn::Cosine { r0: 0.5, x_c: PI, s, z0: 0.0 },
            h_kind: HKind::ExpInv,
            beta: 1.0,
            l: 4,
        })
        .unwrap(),
    )
}

fn xi_strategy() -> impl Strategy<Value = f64> {
    prop_oneof![-200.0..-0.5f64, 0.5..200.0f64]
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 100, ..ProptestConfig::default() })]

    #[test]
    fn flow_composes(x in 0.0..2.0 * PI, xi in xi_strategy()) {
        let sys = RaySystem::new(Some(shipped_a()), 0.0, 1e-3).unwrap();
        let full = trace_ray(&sys, 0.0, 1.0, x, xi).unwrap();
        let a = trace_ray(&sys, 0.0, 0.6, x, xi).unwrap();
        let b = trace_ray(&sys, 0.6, 1.0, *a.gamma_x.last().unwrap(), *a.gamma_xi.last().unwrap()).unwrap();
        let (fx, fxi) = (*full.gamma_x.last().unwrap(), *full.gamma_xi.last().unwrap());
        prop_assert!((fx - b.gamma_x.last().unwrap()).abs() < 1e-11);
        prop_assert!((fxi - b.gamma_xi.last().unwrap()).abs() < 1e-11 * fxi.abs());
    }

    #[test]
    fn flow_is_homogeneous(x in 0.0..2.0 * PI, xi in xi_strategy(), t in 0.1..10.0f64) {
        let sys = RaySystem::new(Some(shipped_a()), 0.0, 1e-3).unwrap();
        let r1 = trace_ray(&sys, 0.0, 1.0, x, xi).unwrap();
        let r2 = trace_ray(&sys, 0.0, 1.0, x, t * xi).unwrap();
        prop_assert!((r1.gamma_x.last().unwrap() - r2.gamma_x.last().unwrap()).abs() < 1e-12);
        let (p1, p2) = (r1.gamma_xi.last().unwrap(), r2.gamma_xi.last().unwrap());
        prop_assert!((t * p1 - p2).abs() < 1e-12 * p2.abs());
    }

    #[test]
    fn hamiltonian_is_conserved(x in 0.0..2.0 * PI, xi in xi_strategy()) {
        let a = shipped_a();
        let sys = RaySystem::new(Some(a.clone()), 0.0, 1e-3).unwrap();
        let r = trace_ray(&sys, 0.0, 1.0, x, xi).unwrap();
        let h0 = a.value(0.0, x, xi);
        for (gx, gxi) in r.gamma_x.iter().zip(&r.gamma_xi) {
            prop_assert!((a.value(0.0, *gx, *gxi) - h0).abs() <= 1e-8 * h0.abs());
        }
    }

    #[test]
    fn damping_is_nonnegative_and_nondecreasing(x in 0.0..2.0 * PI, xi in xi_strategy(), s in 0.0..0.5f64) {
        let b = cutoff(s);
        let sys = RaySystem::new(Some(shipped_a()), 0.0, 1e-3).unwrap();
        let r = trace_ray_damped(&sys, b.as_ref(), 1.0, x, xi, 0.02).unwrap();
        prop_assert_eq!(r.i_forward[0], 0.0);
        for w in r.i_forward.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-14);
        }
        let straight = RaySystem::new(None, 0.0, 1e-3).unwrap();
        prop_assert!(damping_integral_i(&straight, b.as_ref(), 0.7, x, xi, 0.02).unwrap() >= 0.0);
    }

    #[test]
    fn cutoff_is_nonnegative(z in 0.0..1.0f64, x in 0.0..2.0 * PI, xi in -1e4..1e4f64, s in -0.5..0.5f64) {
        prop_assert!(cutoff(s).value(z, x, xi) >= 0.0);
    }

    #[test]
    fn dealias_is_idempotent(seed in 0u64..1000, band in 1usize..64) {
        let g = Grid::new(64).unwrap();
        let u = random_field(&g, 0.0, band, seed);
        let d = dealias(&u);
        let dd = dealias(&d);
        prop_assert!(d.sub(&dd).norm() <= 1e-14 * d.norm().max(1.0));
        prop_assert!(d.norm() <= u.norm() + 1e-14);
    }
}
