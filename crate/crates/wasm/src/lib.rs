//! Browser bindings: the ε(ρ) curve, the a1/a2 profile over x, and the
//! balanced-metric certificate with its CP¹ oracle.
//!
//! Every export returns a JSON string, or an error message the page shows
//! as is. The same functions run natively, which is how they are tested.

use kq_core::bergman::{self, balanced_certify, BalancedPart, SeriesOptions};
use kq_core::curvature::classify_check;
use kq_core::oracle::cp1_bergman_oracle;
use kq_core::{BaseGeometry, DomainKind, QuantizationSetup, RadialProfile};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![a],
        _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
    }
}

fn finite(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

/// Profile and domain for a family name, with the space-form base that puts
/// `ϕ = x + Ax²` on its constant-coefficient branch.
fn setup(family: &str, a: f64, lambda: f64, d: usize, d0: usize, alpha: f64) -> Result<QuantizationSetup, String> {
    if d == 0 || d0 == 0 {
        return Err("dimensions must be positive".into());
    }
    let (profile, domain, a_eff) = match family {
        "logball" => (RadialProfile::log_ball(a, lambda), DomainKind::Ball, a),
        "linear" => (RadialProfile::linear(1.0, lambda), DomainKind::FullSpace, 0.0),
        "logaffine" => (RadialProfile::log_affine(a, 1.0, lambda), DomainKind::FullSpace, a),
        other => return Err(format!("unknown family '{other}'")),
    };
    let c = if d == 1 {
        d0 as f64 * lambda - (1 + d0) as f64 * a_eff
    } else {
        -lambda
    };
    let profile = profile.map_err(|e| e.to_string())?;
    Ok(QuantizationSetup::new(
        d0,
        domain,
        profile,
        BaseGeometry::space_form(d, c),
        alpha,
    ))
}

/// `ε` on `count` points of `[0, rho_max]`, with the closed target when the
/// setup lies on a branch.
#[wasm_bindgen]
pub fn epsilon_curve(
    family: &str,
    a: f64,
    lambda: f64,
    d: usize,
    d0: usize,
    alpha: f64,
    rho_max: f64,
    count: usize,
) -> Result<String, String> {
    let s = setup(family, a, lambda, d, d0, alpha)?;
    s.validate().map_err(|e| e.to_string())?;
    let rhos = linspace(0.0, rho_max, count.min(400));
    let opts = SeriesOptions {
        max_k: 4000,
        ..SeriesOptions::default()
    };
    let values = bergman::bergman_series_grid(&s, &rhos, &opts).map_err(|e| e.to_string())?;
    let target = bergman::closed_target(&s).ok().map(|t| t.value);
    Ok(json!({
        "rho": rhos,
        "epsilon": values.iter().map(|v| finite(v.value)).collect::<Vec<_>>(),
        "terms": values.iter().map(|v| v.terms).collect::<Vec<_>>(),
        "target": target,
    })
    .to_string())
}

/// `a1` and `a2` on `count` points of `[x_min, x_max]`, with the constancy
/// verdict and the branch that matched.
#[wasm_bindgen]
pub fn coefficient_curve(
    family: &str,
    a: f64,
    lambda: f64,
    d: usize,
    d0: usize,
    x_min: f64,
    x_max: f64,
    count: usize,
) -> Result<String, String> {
    let s = setup(family, a, lambda, d, d0, 1.0)?;
    let xs = linspace(x_min, x_max, count.clamp(8, 400));
    let ts = xs
        .iter()
        .map(|&x| s.profile.t_at_x(x))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let v = classify_check(&s.base, &s.profile, s.d0, s.domain, &ts).map_err(|e| e.to_string())?;
    Ok(json!({
        "x": xs,
        "a1": v.reports.iter().map(|r| finite(r.a1)).collect::<Vec<_>>(),
        "a2": v.reports.iter().map(|r| finite(r.a2)).collect::<Vec<_>>(),
        "constant": v.constant,
        "branch": v.matched_branch.map(|b| b.label()),
        "base_a1": s.base.a1(),
        "spread": finite(v.max_deviation),
    })
    .to_string())
}

/// Certifies the explicit balanced metric over `CP¹(k)` and, for the ball
/// part, runs the CP¹ Gram oracle at the same `k` for comparison.
#[wasm_bindgen]
pub fn balanced_check(k: u32, r: u32, m: u32, total_space: bool) -> Result<String, String> {
    let part = if total_space {
        BalancedPart::TotalSpace
    } else {
        BalancedPart::BallBundle
    };
    let rhos = linspace(0.0, if total_space { 2.0 } else { 0.9 }, 19);
    let v = balanced_certify(k, r, m, part, 1.0, &rhos, &SeriesOptions::default(), 1e-8).map_err(|e| e.to_string())?;
    let zs = linspace(0.0, 3.0, 13);
    let cp1 = cp1_bergman_oracle(k, m, &zs).map_err(|e| e.to_string())?;
    Ok(json!({
        "rho": rhos,
        "epsilon": v.values.iter().map(|x| finite(x.value)).collect::<Vec<_>>(),
        "target": v.target,
        "balanced": v.balanced,
        "max_deviation": v.max_deviation,
        "A": v.a,
        "oracle": {
            "z": zs,
            "epsilon": cp1.values.iter().map(|x| x.1).collect::<Vec<_>>(),
            "target": cp1.target,
            "max_deviation": cp1.max_deviation,
        },
    })
    .to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: Result<String, String>) -> Value {
        serde_json::from_str(&s.expect("call succeeds")).unwrap()
    }

    #[test]
    fn ball_curve_is_flat_at_target() {
        let v = parse(epsilon_curve("logball", 0.5, 1.0, 1, 2, 4.0, 0.9, 10));
        let target = v["target"].as_f64().unwrap();
        assert!((target - 26.25).abs() < 1e-12);
        for e in v["epsilon"].as_array().unwrap() {
            assert!((e.as_f64().unwrap() - target).abs() < 1e-8);
        }
    }

    #[test]
    fn coefficients_flag_the_off_diagonal_case() {
        let v = parse(coefficient_curve("logball", 1.0, 2.0, 2, 1, 0.01, 4.0, 32));
        assert_eq!(v["constant"], false);
        let w = parse(coefficient_curve("logball", 0.5, 1.0, 1, 2, 0.01, 4.0, 32));
        assert_eq!(w["constant"], true);
        assert_eq!(w["branch"], "ball-d1");
    }

    #[test]
    fn balanced_and_oracle_agree_with_targets() {
        let v = parse(balanced_check(2, 1, 2, false));
        assert_eq!(v["balanced"], true);
        assert!((v["target"].as_f64().unwrap() - 21.0 / 8.0).abs() < 1e-12);
        assert!((v["oracle"]["target"].as_f64().unwrap() - 2.5).abs() < 1e-12);
        assert!(balanced_check(1, 1, 2, false).unwrap_err().contains("kr>1"));
    }

    #[test]
    fn bad_family_is_reported() {
        assert!(epsilon_curve("cone", 1.0, 1.0, 1, 1, 2.0, 0.5, 3).is_err());
    }
}
