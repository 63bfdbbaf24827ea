//! Invariants checked on random inputs.

use finslercomp::comparison::comparison_s;
use finslercomp::lorentz::{classify, legendre, legendre_inverse, CausalKind};
use finslercomp::tensor::{fundamental_tensor, raw_metric};
use finslercomp::weighted::{chain_violation, combine_ricci, epsilon_bound, epsilon_range_constant, NValue};
use finslercomp::zoo::{self, Warp};
use finslercomp::{Signature, Space};
use proptest::prelude::*;

fn spaces() -> Vec<Space> {
    vec![
        zoo::euclidean(3),
        zoo::sphere(2),
        zoo::poincare_ball(2),
        zoo::randers(2, 0.5).unwrap(),
        zoo::gaussian_weighted_euclidean(2, 1.0),
        zoo::minkowski(2),
        zoo::weighted_minkowski(2, 0.5),
        zoo::flrw(2, Warp::Cosh),
        zoo::beem(4).unwrap(),
    ]
}

fn vec3() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0..1.0f64, 3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lagrangian_is_two_homogeneous(k in 0usize..9, x in vec3(), v in vec3(), c in 0.1..10.0f64) {
        let s = &spaces()[k];
        let d = s.dim();
        let x: Vec<f64> = x[..d].iter().map(|a| 0.3 * a).collect();
        let v = &v[..d];
        prop_assume!(v.iter().any(|a| a.abs() > 1e-3));
        let cv: Vec<f64> = v.iter().map(|a| c * a).collect();
        let (l, lc) = (s.lagrangian_at(&x, v), s.lagrangian_at(&x, &cv));
        prop_assert!((lc - c * c * l).abs() <= 1e-10 * (c * c * l.abs()).max(1.0));
        let (g, gc) = (raw_metric(s, &x, v), raw_metric(s, &x, &cv));
        prop_assert!((&g - &gc).abs().max() <= 1e-8 * g.abs().max().max(1.0));
    }

    #[test]
    fn euler_identity(k in 0usize..9, x in vec3(), v in vec3()) {
        let s = &spaces()[k];
        let d = s.dim();
        let x: Vec<f64> = x[..d].iter().map(|a| 0.3 * a).collect();
        let v = &v[..d];
        if let Ok(g) = fundamental_tensor(s, &x, v) {
            let l = s.lagrangian_at(&x, v);
            prop_assert!((g.apply(v, v) - 2.0 * l).abs() <= 1e-9 * l.abs().max(1.0));
        }
    }

    #[test]
    fn causal_class_is_scale_invariant(k in 0usize..3, v in vec3(), c in 0.01..100.0f64) {
        let s = [zoo::minkowski(2), zoo::beem(4).unwrap(), zoo::flrw(2, Warp::Cosh)][k].clone();
        let d = s.dim();
        let x = vec![0.0; d];
        let v = &v[..d];
        prop_assume!(v.iter().any(|a| a.abs() > 1e-3));
        let cv: Vec<f64> = v.iter().map(|a| c * a).collect();
        let axis = s.time_orientation();
        prop_assert_eq!(classify(&s, &axis, &x, v), classify(&s, &axis, &x, &cv));
    }

    #[test]
    fn minkowski_legendre_roundtrip(v in vec3(), t in 0.0..2.0f64) {
        let s = zoo::minkowski(2);
        // future timelike: time component above the spatial norm
        let w = [v[0].hypot(v[1]) + 0.05 + t, v[0], v[1]];
        let x = [0.0; 3];
        let c = classify(&s, &s.time_orientation(), &x, &w);
        prop_assert!(c.kind == CausalKind::Timelike && c.future);
        let omega = legendre(&s, &x, &w).unwrap();
        let back = legendre_inverse(&s, &x, &omega).unwrap();
        for (a, b) in back.iter().zip(&w) {
            prop_assert!((a - b).abs() <= 1e-10 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn epsilon_range_gives_positive_constant(dim in 2usize..6, lorentz in any::<bool>(), n in -10.0..20.0f64, f in -0.99..0.99f64) {
        let sig = if lorentz { Signature::Lorentzian } else { Signature::Positive };
        let nv = NValue::Finite(n);
        match epsilon_bound(dim, sig, nv) {
            Ok(bound) => {
                let eps = if bound.is_infinite() { 10.0 * f } else { f * bound };
                let c = epsilon_range_constant(dim, sig, nv, eps).unwrap();
                prop_assert!(c > 0.0);
                if bound.is_finite() && bound > 0.0 {
                    prop_assert!(epsilon_range_constant(dim, sig, nv, 1.01 * bound).is_err());
                }
            }
            Err(_) => {
                // forbidden interval (N0, n)
                let (n0, nn) = if lorentz { (0.0, dim as f64 - 1.0) } else { (1.0, dim as f64) };
                prop_assert!(n > n0 && n < nn);
            }
        }
    }

    #[test]
    fn weighted_ricci_chain(ric in -5.0..5.0f64, d1 in -3.0..3.0f64, d2 in -3.0..3.0f64, n in 1usize..5) {
        let nf = n as f64;
        let ns = [NValue::Finite(nf + 0.5), NValue::Finite(nf + 3.0), NValue::PlusInfinity, NValue::Finite(-2.0), NValue::Finite(0.0)];
        let values: Vec<(NValue, f64)> = ns.iter().map(|&nv| (nv, combine_ricci(ric, d1, d2, nv, n))).collect();
        prop_assert!(chain_violation(&values, n) <= 1e-12);
    }

    #[test]
    fn comparison_function_solves_its_ode(kappa in -2.0..2.0f64, t in 0.01..1.0f64) {
        let t = if kappa > 0.0 { t * std::f64::consts::PI / kappa.sqrt() * 0.99 } else { 2.0 * t };
        let h = 1e-4;
        let (s, ds) = comparison_s(kappa, t).unwrap();
        let (sp, _) = comparison_s(kappa, t + h).unwrap();
        let (sm, _) = comparison_s(kappa, t - h).unwrap_or((0.0, 0.0));
        prop_assume!(t - h > 0.0);
        prop_assert!(((sp - 2.0 * s + sm) / (h * h) + kappa * s).abs() <= 1e-5 * (1.0 + s.abs()));
        prop_assert!(((sp - sm) / (2.0 * h) - ds).abs() <= 1e-6 * (1.0 + ds.abs()));
    }
}
