//! Shared fixtures for the integration and acceptance targets.
#![allow(dead_code)]

use kq_core::curvature::BaseGeometry;
use kq_core::profiles::{DomainKind, RadialProfile};

/// `a2` for `ϕ = x + Ax²`, expanded symbolically from the curvature lemma
/// and frozen as polynomials in `y = 1/(1+λx)`. Covers `d ≤ 2`, `d0 ≤ 3`.
pub fn a2_polyquad_oracle(d: usize, d0: usize, a: f64, l: f64, a1b: f64, a2b: f64, x: f64) -> f64 {
    let y = 1.0 / (1.0 + l * x);
    let (y2, y3, y4) = (y * y, y * y * y, y * y * y * y);
    let a2 = a * a;
    let l2 = l * l;
    match (d, d0) {
        (1, 1) => {
            2.0 * a2
                + a2b * y2
                + y3 * (2.0 * a2 + a * a1b - 3.0 * a * l - a1b * l + l2)
                + y * (-4.0 * a2 - 2.0 * a * a1b + 2.0 * a * l)
        }
        (1, 2) => {
            11.0 * a2
                + y3 * (3.0 * a2 + a * a1b - 5.0 * a * l - a1b * l + 2.0 * l2)
                + y2 * (3.0 * a2 + a * a1b - 5.0 * a * l - a1b * l + a2b + 2.0 * l2)
                + y * (-15.0 * a2 - 5.0 * a * a1b + 10.0 * a * l)
        }
        (1, 3) => {
            35.0 * a2
                + y3 * (4.0 * a2 + a * a1b - 7.0 * a * l - a1b * l + 3.0 * l2)
                + y2 * (8.0 * a2 + 2.0 * a * a1b - 14.0 * a * l - 2.0 * a1b * l + a2b + 6.0 * l2)
                + y * (-36.0 * a2 - 9.0 * a * a1b + 27.0 * a * l)
        }
        (2, 1) => {
            11.0 * a2
                + y4 * (-2.0 * a2 + 4.0 * a * l - 2.0 * l2)
                + y2 * (21.0 * a2 + 4.0 * a * a1b - 21.0 * a * l - 2.0 * a1b * l + a2b + 4.0 * l2)
                + y * (-30.0 * a2 - 5.0 * a * a1b + 15.0 * a * l)
        }
        (2, 2) => {
            35.0 * a2
                + y4 * (-2.0 * a2 + 4.0 * a * l - 2.0 * l2)
                + y3 * (-2.0 * a2 + 4.0 * a * l - 2.0 * l2)
                + y2 * (43.0 * a2 + 6.0 * a * a1b - 53.0 * a * l - 4.0 * a1b * l + a2b + 14.0 * l2)
                + y * (-72.0 * a2 - 9.0 * a * a1b + 45.0 * a * l)
        }
        (2, 3) => {
            85.0 * a2
                + y4 * (-2.0 * a2 + 4.0 * a * l - 2.0 * l2)
                + y3 * (-4.0 * a2 + 8.0 * a * l - 4.0 * l2)
                + y2 * (72.0 * a2 + 8.0 * a * a1b - 98.0 * a * l - 6.0 * a1b * l + a2b + 30.0 * l2)
                + y * (-140.0 * a2 - 14.0 * a * a1b + 98.0 * a * l)
        }
        _ => panic!("no frozen polynomial for d = {d}, d0 = {d0}"),
    }
}

/// The profile realizing `ϕ = x + Ax²`: LogBall for A > 0, Linear for
/// A = 0, LogAffine for A < 0.
pub fn polyquad_profile(a: f64, lambda: f64) -> (RadialProfile, DomainKind) {
    if a > 0.0 {
        (RadialProfile::log_ball(a, lambda).unwrap(), DomainKind::Ball)
    } else if a == 0.0 {
        (RadialProfile::linear(1.0, lambda).unwrap(), DomainKind::FullSpace)
    } else {
        (
            RadialProfile::log_affine(a, 1.0, lambda).unwrap(),
            DomainKind::FullSpace,
        )
    }
}

/// `count` points of the fibre range of `ϕ = x + Ax²` on which `1 + λx`
/// stays positive, kept away from both ends.
pub fn x_grid(a: f64, lambda: f64, count: usize) -> Vec<f64> {
    let mut top: f64 = 4.0;
    if a < 0.0 {
        top = top.min(-0.9 / a);
    }
    if lambda < 0.0 {
        top = top.min(-0.9 / lambda);
    }
    let lo = 0.01;
    (0..count)
        .map(|i| lo + (top - lo) * i as f64 / (count - 1) as f64)
        .collect()
}

/// A base with unrelated invariants in dimension d.
pub fn generic_base(d: usize) -> BaseGeometry {
    BaseGeometry::custom(d, 0.7, 0.9, 0.35, 1.3, None)
}

/// The t-grid matching an x-grid.
pub fn t_grid(p: &RadialProfile, xs: &[f64]) -> Vec<f64> {
    xs.iter().map(|&x| p.t_at_x(x).unwrap()).collect()
}
