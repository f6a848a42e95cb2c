use proptest::prelude::*;

use excitable_core::analysis::{karma_manifold, layer_jacobian};
use excitable_core::blowup::{pushed_forward, rescaled_blowup, wrap_angle, PolarPoint};
use excitable_core::integrate::{integrate, FhnOde, IntegratorConfig};
use excitable_core::model::{dispersion, dispersion_clamped, rectifier};
use excitable_core::pde::laplacian;
use excitable_core::wave::{frozen_rhs, hamiltonian};
use excitable_core::{FhnParams, KarmaParams};

proptest! {
    #[test]
    fn rectifier_splits_identity(x in -1e6f64..1e6) {
        prop_assert!(rectifier(x) >= 0.0);
        prop_assert_eq!(rectifier(x) - rectifier(-x), x);
    }

    #[test]
    fn clamped_dispersion_never_goes_negative(n in -2.0f64..2.0, m in 1u32..40) {
        let (v, clamped) = dispersion_clamped(n, m);
        prop_assert_eq!(clamped, n < 0.0);
        if n >= 0.0 {
            prop_assert_eq!(v, dispersion(n, m));
        } else {
            prop_assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn manifold_points_are_fast_equilibria(e in 0.05f64..3.95) {
        let p = KarmaParams::default();
        if let Some(n) = karma_manifold(e, &p) {
            let r = p.fast_reaction(e, n.powi(p.m as i32));
            prop_assert!(r.abs() < 1e-9, "residual {r}");
            prop_assert!(layer_jacobian(e, n, &p).is_finite());
        }
    }

    #[test]
    fn blowup_matches_polar_pushforward(theta in 0.0f64..std::f64::consts::TAU, k in 0usize..3) {
        let r = [1e-3, 1e-2, 1e-1][k];
        let (a0, b0) = rescaled_blowup(theta, r);
        let (a1, b1) = pushed_forward(theta, r);
        prop_assert!((a0 - a1).abs() < 1e-8 && (b0 - b1).abs() < 1e-8);
    }

    #[test]
    fn polar_points_wrap(theta in -50.0f64..50.0, r in 0.0f64..10.0) {
        let p = PolarPoint::new(theta, r);
        prop_assert!((0.0..std::f64::consts::TAU).contains(&p.theta));
        let w = wrap_angle(theta);
        prop_assert!((w.sin() - theta.sin()).abs() < 1e-9 && (w.cos() - theta.cos()).abs() < 1e-9);
    }

    #[test]
    fn mirror_laplacian_has_zero_trapezoid_sum(u in prop::collection::vec(-5.0f64..5.0, 16..200)) {
        let lap = laplacian(&u, 0.2);
        let n = lap.len();
        let s: f64 = lap[1..n - 1].iter().sum::<f64>() + 0.5 * (lap[0] + lap[n - 1]);
        prop_assert!((s * 0.2).abs() < 1e-10);
    }

    #[test]
    fn fhn_flow_is_reversible(v in -2.0f64..2.0, w in -1.0f64..1.5, t in 0.1f64..1.0) {
        // backward error growth is about exp((v^2 - 1) t), so keep t short
        let sys = FhnOde(FhnParams::default());
        let cfg = IntegratorConfig::with_tol(1e-11, 1e-13);
        let fwd = integrate(&sys, [v, w], 0.0, t, &cfg).unwrap();
        let (_, y) = fwd.last();
        let back = integrate(&sys, y, t, 0.0, &cfg).unwrap();
        let (_, z) = back.last();
        prop_assert!((z[0] - v).abs() < 1e-6 && (z[1] - w).abs() < 1e-6);
    }

    #[test]
    fn hamiltonian_is_a_first_integral_at_zero_speed(e in -0.5f64..4.0, w in -2.0f64..2.0, nm in 0.0f64..1.4) {
        // H is conserved along the frozen field with c = 0: dH/dz = grad H . f = 0
        let p = KarmaParams::default();
        let f = frozen_rhs(e, w, nm, 0.0, &p);
        let h = 1e-6;
        let he = (hamiltonian(e + h, w, nm, &p) - hamiltonian(e - h, w, nm, &p)) / (2.0 * h);
        let hw = (hamiltonian(e, w + h, nm, &p) - hamiltonian(e, w - h, nm, &p)) / (2.0 * h);
        let dot = he * f[0] + hw * f[1];
        let scale = 1.0 + he.abs() * f[0].abs() + hw.abs() * f[1].abs();
        prop_assert!(dot.abs() < 1e-6 * scale, "{dot}");
    }
}
