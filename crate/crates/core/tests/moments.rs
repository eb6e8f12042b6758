mod common;

use kq_core::bergman::{
    self, bergman_series, bergman_series_grid, closed_target, fiber_moment, MomentTable, PsiMethod, QuantizationSetup,
    SeriesOptions,
};
use kq_core::curvature::{BaseGeometry, EpsBase};
use kq_core::oracle;
use kq_core::profiles::{DomainKind, RadialProfile};
use proptest::prelude::*;
use std::sync::Arc;

fn ball(d: usize, d0: usize, l: f64, a: f64, alpha: f64) -> QuantizationSetup {
    let n = (d + d0) as f64;
    let base = if d == 1 {
        BaseGeometry::space_form(1, d0 as f64 * l - n * a)
    } else {
        BaseGeometry::space_form(d, -l)
    };
    QuantizationSetup::new(
        d0,
        DomainKind::Ball,
        RadialProfile::log_ball(a, l).unwrap(),
        base,
        alpha,
    )
}

fn spread(v: &[f64]) -> (f64, f64) {
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (hi - lo, v.iter().sum::<f64>() / v.len() as f64)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn ball_moments_agree(d0 in 1usize..=3, a in 0.2f64..1.5, l in 0.3f64..2.5, excess in 0.2f64..8.0, k in 0usize..=12) {
        let s = ball(1, d0, l, a, a * (1.0 + d0 as f64 + excess));
        let q = bergman::psi_moment(&s, k, PsiMethod::Quadrature).unwrap();
        let c = bergman::psi_moment(&s, k, PsiMethod::Closed).unwrap();
        prop_assert!(((q - c) / c).abs() <= 1e-10, "{q} vs {c}");
    }

    #[test]
    fn projective_moments_agree(d in 1usize..=2, d0 in 1usize..=3, c in 0.3f64..3.0, alpha in 0u32..=10, k in 0usize..=10) {
        prop_assume!(k as u32 <= alpha);
        let p = RadialProfile::log_affine(-1.0, c, -1.0).unwrap();
        let s = QuantizationSetup::new(d0, DomainKind::FullSpace, p, BaseGeometry::fubini_study_cpd(d), alpha as f64);
        let q = bergman::psi_moment(&s, k, PsiMethod::Quadrature).unwrap();
        let cl = bergman::psi_moment(&s, k, PsiMethod::Closed).unwrap();
        prop_assert!(((q - cl) / cl).abs() <= 1e-10, "{q} vs {cl}");
    }

    #[test]
    fn series_is_constant_on_designated_tuples(d0 in 1usize..=3, a in 0.2f64..1.0, excess in 0.3f64..4.0) {
        let s = ball(1, d0, 1.0, a, a * (1.0 + d0 as f64 + excess));
        let rhos: Vec<f64> = (0..8).map(|i| 0.1 * i as f64).collect();
        let vals: Vec<f64> = bergman_series_grid(&s, &rhos, &SeriesOptions::default()).unwrap().iter().map(|v| v.value).collect();
        let (sp, mean) = spread(&vals);
        prop_assert!(sp <= 1e-8 * (1.0 + mean.abs()));
        let target = closed_target(&s).unwrap().value;
        prop_assert!((mean - target).abs() <= 1e-8 * (1.0 + target.abs()));
    }

    #[test]
    fn origin_identity(d0 in 1usize..=3, a in 0.2f64..1.0, excess in 0.3f64..4.0) {
        let s = ball(1, d0, 1.0, a, a * (1.0 + d0 as f64 + excess));
        let opts = SeriesOptions { method: PsiMethod::Closed, ..SeriesOptions::default() };
        let v = bergman_series(&s, 0.0, &opts).unwrap().value;
        let want = s.base.eps_base(s.alpha) / bergman::psi_moment(&s, 0, PsiMethod::Closed).unwrap();
        prop_assert!(((v - want) / want).abs() <= 1e-12);
    }
}

#[test]
fn perturbed_spectrum_law_is_not_constant() {
    let rhos: Vec<f64> = (0..8).map(|i| 0.1 * i as f64).collect();
    for s in [ball(1, 2, 1.0, 1.0 / 3.0, 2.0), ball(2, 1, 1.0, 1.0, 5.0)] {
        let law = s.base.clone();
        let bent = s.base.with_eps(EpsBase::Custom(Arc::new(move |a: f64| {
            law.eps_base(a) * (1.0 + 0.1 * a.sin())
        })));
        let s = QuantizationSetup { base: bent, ..s };
        let vals: Vec<f64> = bergman_series_grid(&s, &rhos, &SeriesOptions::default())
            .unwrap()
            .iter()
            .map(|v| v.value)
            .collect();
        assert!(spread(&vals).0 > 1e-3);
    }
}

#[test]
fn higher_dimensional_ball_target() {
    // d = 2, r = 1, m = 5 gives 4·3·2.
    let s = ball(2, 1, 1.0, 1.0, 5.0);
    assert_eq!(closed_target(&s).unwrap().value, 24.0);
    let v = bergman_series(&s, 0.6, &SeriesOptions::default()).unwrap();
    assert!((v.value - 24.0).abs() < 1e-9);
}

#[test]
fn moment_table_matches_pointwise_values() {
    let s = ball(1, 2, 1.0, 0.5, 4.0);
    let t = MomentTable::build(&s, 40, PsiMethod::Quadrature, 16).unwrap();
    assert_eq!(t.entries.len(), 41);
    for (k, v) in t.entries.iter().enumerate() {
        let c = bergman::psi_moment(&s, k, PsiMethod::Closed).unwrap();
        assert!(((v - c) / c).abs() < 1e-10);
    }
}

#[test]
fn fibre_moments_depend_on_total_degree_only() {
    let s = ball(1, 2, 1.0, 0.5, 4.6);
    for total in [0u32, 2, 5] {
        let psi = bergman::psi_moment(&s, total as usize, PsiMethod::Closed).unwrap();
        for j in 0..=total {
            let direct = oracle::fiber_moment_direct(&s, [j, total - j], 150).unwrap();
            let reduced = fiber_moment(&s, &[j, total - j], PsiMethod::Closed).unwrap();
            assert!(((direct - reduced) / reduced).abs() < 1e-6, "{direct} vs {reduced}");
            let ratio = reduced / psi;
            let g = |x: u32| libm::tgamma(x as f64 + 1.0);
            assert!((ratio - g(j) * g(total - j) / g(total)).abs() < 1e-13);
        }
    }
}

#[test]
fn ball_series_reaches_far_into_the_fibre() {
    // α/A = 12 at ρ = 0.9 needs several hundred degrees.
    let s = ball(1, 1, 1.0, 0.25, 3.0);
    let v = bergman_series(&s, 0.9, &SeriesOptions::default()).unwrap();
    let target = closed_target(&s).unwrap().value;
    assert!(v.terms > 200);
    assert!((v.value - target).abs() < 1e-9 * target);
}

#[test]
fn series_cap_is_reported() {
    let s = ball(1, 1, 1.0, 0.25, 3.0);
    let opts = SeriesOptions {
        max_k: 20,
        ..SeriesOptions::default()
    };
    assert!(matches!(
        bergman_series(&s, 0.9, &opts),
        Err(bergman::BergmanError::SeriesNonConvergent { .. })
    ));
}
