mod common;

use common::{a2_polyquad_oracle, generic_base, polyquad_profile, x_grid};
use kq_core::curvature::{self, BaseGeometry};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn engine_matches_frozen_polyquad(d in 1usize..=2, d0 in 1usize..=3, a in -1.0f64..1.5, l in 0.2f64..2.5, u in 0.0f64..1.0) {
        let (p, _) = polyquad_profile(a, l);
        let xs = x_grid(a, l, 2);
        let x = xs[0] + u * (xs[1] - xs[0]);
        let base = generic_base(d);
        let r = curvature::curvature_report(&base, &p, d0, p.t_at_x(x).unwrap()).unwrap();
        let want = a2_polyquad_oracle(d, d0, a, l, base.a1(), base.a2(), r.x);
        prop_assert!((r.a2 - want).abs() <= 1e-9 * want.abs().max(1.0), "{} vs {want}", r.a2);
        prop_assert!((r.a2_from_invariants() - want).abs() <= 1e-9 * want.abs().max(1.0));
    }

    #[test]
    fn scaling_covariance(a in -0.9f64..1.5, l in 0.2f64..3.0, d in 1usize..=2, d0 in 1usize..=3, u in 0.0f64..1.0) {
        let (p, _) = polyquad_profile(a, l);
        let xs = x_grid(a, l, 2);
        let x = xs[0] + u * (xs[1] - xs[0]);
        let t = p.t_at_x(x).unwrap();
        let base = generic_base(d);
        let sb = BaseGeometry::custom(d, base.k / l, base.ric2 / (l * l), base.lapk / (l * l), base.riem2 / (l * l), None);
        let r = curvature::curvature_report(&base, &p, d0, t).unwrap();
        let s = curvature::curvature_report(&sb, &p.rescaled(l, 1.0).unwrap(), d0, t).unwrap();
        let close = |x: f64, y: f64| (x - y).abs() <= 1e-10 * x.abs().max(y.abs()).max(1e-300);
        prop_assert!(close(r.k, l * s.k));
        prop_assert!(close(r.ric2, l * l * s.ric2));
        prop_assert!(close(r.lapk, l * l * s.lapk));
        prop_assert!(close(r.riem2, l * l * s.riem2));
    }

    #[test]
    fn curvature_combination_identity(d0 in 1usize..=3, a in 0.2f64..1.2, l in 0.3f64..2.0, u in 0.0f64..1.0) {
        // Branch-(d=1) data: |R|² − 4|Ric|² relaxes to its constant part like 1/(1+λx)².
        let n = 1.0 + d0 as f64;
        let base = BaseGeometry::space_form(1, d0 as f64 * l - n * a);
        let (p, _) = polyquad_profile(a, l);
        let xs = x_grid(a, l, 2);
        let x = xs[0] + u * (xs[1] - xs[0]);
        let r = curvature::curvature_report(&base, &p, d0, p.t_at_x(x).unwrap()).unwrap();
        let c = d0 as f64 * l - n * a;
        let lhs = r.riem2 - 4.0 * r.ric2;
        let rhs = -2.0 * n * (n + 1.0) * (2.0 * n + 1.0) * a * a
            + (base.riem2 - 4.0 * base.ric2 + 12.0 * c * c) / (1.0 + l * r.x).powi(2);
        prop_assert!((lhs - rhs).abs() <= 1e-9 * rhs.abs().max(1.0), "{lhs} vs {rhs}");
    }
}
