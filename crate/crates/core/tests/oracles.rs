use kq_core::bergman::{self, balanced_setup, BalancedPart, PsiMethod};
use kq_core::oracle::{cp1_bergman_oracle, gram_entry, hartogs_gram_oracle, GramOracleConfig, OracleError};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

#[test]
fn cp1_oracle_is_uniform() {
    let zs: Vec<f64> = (0..9).map(|i| 0.4 * i as f64).collect();
    for k in 1..=3 {
        for m in 1..=5 {
            let r = cp1_bergman_oracle(k, m, &zs).unwrap();
            assert!(r.max_deviation <= 1e-6, "k={k} m={m}: {}", r.max_deviation);
        }
    }
}

#[test]
fn ball_model_matches_product() {
    let s = balanced_setup(2, 1, 2.0, BalancedPart::BallBundle, 1.0).unwrap();
    let mut cfg = GramOracleConfig::new(2, 2, vec![(0.0, 0.0), (0.4, 0.3), (1.5, 0.7)]);
    cfg.q_cap = 100;
    let r = hartogs_gram_oracle(&cfg, &s).unwrap();
    assert_eq!(r.target, Some(2.625));
    assert!(r.max_deviation.unwrap() <= 1e-3);
    // z-only sections at ρ = 0 carry the series' first term.
    let first = s.base.eps_base(2.0) / bergman::psi_moment(&s, 0, PsiMethod::Closed).unwrap();
    assert!((r.points[0].value - first).abs() < 1e-9);
}

#[test]
fn default_cap_is_too_short_far_out() {
    let s = balanced_setup(2, 1, 3.0, BalancedPart::BallBundle, 1.0).unwrap();
    let cfg = GramOracleConfig::new(2, 3, vec![(1.0, 0.7)]);
    assert!(matches!(
        hartogs_gram_oracle(&cfg, &s),
        Err(OracleError::TruncationInsufficient { .. })
    ));
}

#[test]
fn random_off_diagonal_entries_vanish() {
    let mut rng = StdRng::seed_from_u64(11);
    for (part, k, m) in [(BalancedPart::BallBundle, 2, 2), (BalancedPart::TotalSpace, 1, 1)] {
        let s = balanced_setup(k, 1, m as f64, part, 1.0).unwrap();
        let mut cfg = GramOracleConfig::new(k, m, vec![]);
        cfg.s_nodes = 48;
        cfg.v_nodes = 48;
        for _ in 0..10 {
            let a = (rng.gen_range(0..4usize), rng.gen_range(0..4usize));
            let mut b = (rng.gen_range(0..4usize), rng.gen_range(0..4usize));
            if a == b {
                b.0 += 1;
            }
            let (na, _) = gram_entry(&cfg, &s, a, a, 24).unwrap();
            let (nb, _) = gram_entry(&cfg, &s, b, b, 24).unwrap();
            let (re, im) = gram_entry(&cfg, &s, a, b, 24).unwrap();
            assert!(re.hypot(im) <= 1e-13 * (na * nb).sqrt(), "{a:?} {b:?}: {re} {im}");
        }
    }
}

#[test]
fn oracle_rejects_mismatched_setups() {
    let s = balanced_setup(2, 1, 2.0, BalancedPart::BallBundle, 1.0).unwrap();
    let cfg = GramOracleConfig::new(2, 3, vec![(0.1, 0.1)]);
    assert!(matches!(
        hartogs_gram_oracle(&cfg, &s),
        Err(OracleError::InvalidConfig(_))
    ));
    let cfg = GramOracleConfig::new(2, 2, vec![(0.1, 1.2)]);
    assert!(matches!(
        hartogs_gram_oracle(&cfg, &s),
        Err(OracleError::InvalidConfig(_))
    ));
}
