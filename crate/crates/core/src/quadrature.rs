//! Fixed rules on `[0,1]` and `[0,∞)`, plus a globally adaptive
//! Gauss–Kronrod integrator for integrands without a known weight.

use std::collections::BinaryHeap;
use std::num::NonZeroUsize;

use gauss_quad::{FiniteAboveNegOneF64, GaussJacobi, GaussLaguerre, GaussLegendre};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum QuadError {
    #[error("quadrature did not converge: estimate {estimate}, error bound {error}")]
    NonConvergent { estimate: f64, error: f64 },
    #[error("weight exponent {0} must exceed -1")]
    BadExponent(f64),
    #[error("integrand produced a non-finite value at {0}")]
    NonFinite(f64),
}

/// Nodes and weights for `∫ w(u) f(u) du` over a fixed interval.
#[derive(Debug, Clone)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// Logarithms of the weights, accurate even where the weights underflow.
    pub ln_weights: Vec<f64>,
}

impl Rule {
    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&u, &w)| w * f(u)).sum()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

fn nonzero(n: usize) -> NonZeroUsize {
    NonZeroUsize::new(n.max(1)).unwrap()
}

fn exponent(a: f64) -> Result<FiniteAboveNegOneF64, QuadError> {
    FiniteAboveNegOneF64::new(a).ok_or(QuadError::BadExponent(a))
}

impl Rule {
    fn from_ln(nodes: Vec<f64>, ln_weights: Vec<f64>) -> Self {
        let weights = ln_weights.iter().map(|l| l.exp()).collect();
        Rule {
            nodes,
            weights,
            ln_weights,
        }
    }

    fn from_weights(nodes: Vec<f64>, weights: Vec<f64>) -> Self {
        let ln_weights = weights.iter().map(|w: &f64| w.ln()).collect();
        Rule {
            nodes,
            weights,
            ln_weights,
        }
    }
}

/// Gauss–Legendre on `[0,1]`.
pub fn legendre01(n: usize) -> Rule {
    let rule = GaussLegendre::new(nonzero(n));
    let (nodes, weights) = rule.iter().map(|&(x, w)| (0.5 * (x + 1.0), 0.5 * w)).unzip();
    Rule::from_weights(nodes, weights)
}

// The eigenvector weights of the Golub–Welsch construction carry an absolute
// error near machine epsilon, which swamps the tiny weights that high moments
// depend on. Nodes are therefore polished by Newton steps on the three-term
// recurrence and the weights recomputed in log form from the derivative.
const POLISH_STEPS: usize = 3;

// (P_n, P_{n-1}) of the Jacobi family at x.
fn jacobi_pair(n: usize, a: f64, b: f64, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, 0.5 * (a - b + (a + b + 2.0) * x));
    if n == 0 {
        return (p0, 0.0);
    }
    for k in 1..n {
        let k = k as f64;
        let s = 2.0 * k + a + b;
        let c1 = 2.0 * (k + 1.0) * (k + a + b + 1.0) * s;
        let c2 = (s + 1.0) * (s * (s + 2.0) * x + a * a - b * b);
        let c3 = 2.0 * (k + a) * (k + b) * (s + 2.0);
        let p2 = (c2 * p1 - c3 * p0) / c1;
        p0 = p1;
        p1 = p2;
    }
    (p1, p0)
}

fn jacobi_derivative(n: usize, a: f64, b: f64, x: f64, pn: f64, pm: f64) -> f64 {
    let nf = n as f64;
    let s = 2.0 * nf + a + b;
    (nf * (a - b - s * x) * pn + 2.0 * (nf + a) * (nf + b) * pm) / (s * (1.0 - x) * (1.0 + x))
}

fn polish_jacobi(n: usize, a: f64, b: f64, xs: &mut [f64]) -> Result<Vec<f64>, QuadError> {
    let nf = n as f64;
    let ln_const = (a + b + 1.0) * std::f64::consts::LN_2 + libm::lgamma(nf + a + 1.0) + libm::lgamma(nf + b + 1.0)
        - libm::lgamma(nf + a + b + 1.0)
        - libm::lgamma(nf + 1.0);
    let mut ln_w = Vec::with_capacity(xs.len());
    for x in xs.iter_mut() {
        for _ in 0..POLISH_STEPS {
            let (pn, pm) = jacobi_pair(n, a, b, *x);
            let dp = jacobi_derivative(n, a, b, *x, pn, pm);
            let next = *x - pn / dp;
            if next.is_finite() && next > -1.0 && next < 1.0 {
                *x = next;
            }
        }
        let (pn, pm) = jacobi_pair(n, a, b, *x);
        let dp = jacobi_derivative(n, a, b, *x, pn, pm);
        let l = ln_const - (1.0 - *x).ln() - (1.0 + *x).ln() - 2.0 * dp.abs().ln();
        if !l.is_finite() {
            return Err(QuadError::NonFinite(*x));
        }
        ln_w.push(l);
    }
    Ok(ln_w)
}

// (L_n, L_{n-1}) of the generalized Laguerre family at x, with a common
// scale factor e^{scale} divided out to keep the recurrence in range.
fn laguerre_pair(n: usize, a: f64, x: f64) -> (f64, f64, f64) {
    let (mut p0, mut p1, mut scale) = (1.0f64, 1.0 + a - x, 0.0f64);
    if n == 0 {
        return (p0, 0.0, 0.0);
    }
    for k in 1..n {
        let k = k as f64;
        let p2 = ((2.0 * k + 1.0 + a - x) * p1 - (k + a) * p0) / (k + 1.0);
        p0 = p1;
        p1 = p2;
        let m = p1.abs().max(p0.abs());
        if m > 1e150 {
            p0 /= m;
            p1 /= m;
            scale += m.ln();
        }
    }
    (p1, p0, scale)
}

fn polish_laguerre(n: usize, a: f64, xs: &mut [f64]) -> Result<Vec<f64>, QuadError> {
    let nf = n as f64;
    let ln_const = libm::lgamma(nf + a + 1.0) - libm::lgamma(nf + 1.0);
    let deriv = |x: f64, pn: f64, pm: f64| (nf * pn - (nf + a) * pm) / x;
    let mut ln_w = Vec::with_capacity(xs.len());
    for x in xs.iter_mut() {
        for _ in 0..POLISH_STEPS {
            let (pn, pm, _) = laguerre_pair(n, a, *x);
            let next = *x - pn / deriv(*x, pn, pm);
            if next.is_finite() && next > 0.0 {
                *x = next;
            }
        }
        let (pn, pm, scale) = laguerre_pair(n, a, *x);
        let l = ln_const - x.ln() - 2.0 * (deriv(*x, pn, pm).abs().ln() + scale);
        if !l.is_finite() {
            return Err(QuadError::NonFinite(*x));
        }
        ln_w.push(l);
    }
    Ok(ln_w)
}

/// Gauss–Jacobi for `∫₀¹ (1−u)^a u^b f(u) du`.
///
/// The node count is rounded up to an even number: the backing library pins
/// the middle node of odd-degree rules to the interval centre, which is only
/// right for symmetric weights.
pub fn jacobi01(n: usize, a: f64, b: f64) -> Result<Rule, QuadError> {
    let n = n.max(2).next_multiple_of(2);
    let rule = GaussJacobi::new(nonzero(n), exponent(a)?, exponent(b)?);
    let mut xs: Vec<f64> = rule.iter().map(|&(x, _)| x).collect();
    let ln_w = polish_jacobi(n, a, b, &mut xs)?;
    // (1-u) = (1-x)/2 and u = (1+x)/2, du = dx/2.
    let shift = -(a + b + 1.0) * std::f64::consts::LN_2;
    let nodes = xs.iter().map(|x| 0.5 * (x + 1.0)).collect();
    Ok(Rule::from_ln(nodes, ln_w.into_iter().map(|l| l + shift).collect()))
}

/// Gauss–Laguerre for `∫₀^∞ y^a e^{−y} f(y) dy`.
pub fn laguerre(n: usize, a: f64) -> Result<Rule, QuadError> {
    let rule = GaussLaguerre::new(nonzero(n), exponent(a)?);
    let mut nodes: Vec<f64> = rule.iter().map(|&(x, _)| x).collect();
    let ln_w = polish_laguerre(nodes.len(), a, &mut nodes)?;
    Ok(Rule::from_ln(nodes, ln_w))
}

// Kronrod 15-point abscissae and weights with the embedded 7-point Gauss
// weights (standard QUADPACK values).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

fn gk15(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> Result<(f64, f64), QuadError> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    // Nodes that round onto an endpoint are nudged inside, so integrable
    // endpoint singularities never get evaluated at the singular point.
    let mut eval = |x: f64| {
        let x = x.clamp(a.next_up(), b.next_down());
        let v = f(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(QuadError::NonFinite(x))
        }
    };
    let fc = eval(c)?;
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for (j, (&x, &w)) in XGK[..7].iter().zip(&WGK[..7]).enumerate() {
        let pair = eval(c - h * x)? + eval(c + h * x)?;
        kron += w * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    Ok((kron * h, ((kron - gauss) * h).abs()))
}

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive G7/K15 on a finite interval: the piece with the largest
/// error estimate is bisected until the total estimate is below
/// `max(abs_tol, rel_tol·|I|)`.
pub fn adaptive(
    mut f: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
    max_pieces: usize,
) -> Result<f64, QuadError> {
    let (value, error) = gk15(&mut f, a, b)?;
    let mut heap = BinaryHeap::new();
    heap.push(Piece { a, b, value, error });
    let (mut total, mut err) = (value, error);
    while err > abs_tol.max(rel_tol * total.abs()) {
        if heap.len() >= max_pieces {
            return Err(QuadError::NonConvergent {
                estimate: total,
                error: err,
            });
        }
        let worst = heap.pop().unwrap();
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Interval exhausted at machine resolution; accept what we have.
            heap.push(worst);
            break;
        }
        let (v1, e1) = gk15(&mut f, worst.a, mid)?;
        let (v2, e2) = gk15(&mut f, mid, worst.b)?;
        total += v1 + v2 - worst.value;
        err += e1 + e2 - worst.error;
        heap.push(Piece {
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Piece {
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
        });
    }
    // Re-sum to shed the drift of the running updates.
    let total: f64 = heap.iter().map(|p| p.value).sum();
    let err: f64 = heap.iter().map(|p| p.error).sum();
    if err > 10.0 * abs_tol.max(rel_tol * total.abs()) {
        return Err(QuadError::NonConvergent {
            estimate: total,
            error: err,
        });
    }
    Ok(total)
}

/// `∫₀^∞ f` through `u = y/(1−y)`, integrated adaptively in `y ∈ [0,1)`.
pub fn adaptive_half_line(
    mut f: impl FnMut(f64) -> f64,
    rel_tol: f64,
    abs_tol: f64,
    max_pieces: usize,
) -> Result<f64, QuadError> {
    adaptive(
        |y| {
            if y >= 1.0 {
                return 0.0;
            }
            let r = 1.0 / (1.0 - y);
            let v = f(y * r) * r * r;
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        0.0,
        1.0,
        rel_tol,
        abs_tol,
        max_pieces,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn kronrod_tables_are_consistent() {
        let k: f64 = WGK[7] + 2.0 * WGK[..7].iter().sum::<f64>();
        let g: f64 = WG[3] + 2.0 * WG[..3].iter().sum::<f64>();
        assert_relative_eq!(k, 2.0, epsilon = 1e-15);
        assert_relative_eq!(g, 2.0, epsilon = 1e-15);
        // K15 is exact through degree 22, G7 through degree 13.
        for deg in [2, 10, 22] {
            let (v, _) = gk15(&mut |x: f64| x.powi(deg), -1.0, 1.0).unwrap();
            assert_relative_eq!(v, 2.0 / (deg as f64 + 1.0), max_relative = 1e-14);
        }
        let (_, e) = gk15(&mut |x: f64| x.powi(12), -1.0, 1.0).unwrap();
        assert!(e < 1e-15);
    }

    #[test]
    fn jacobi_even_and_odd_requests_agree() {
        // ∫ (1-u)^{1.5} u^{0.25} u^2 du = B(3.25, 2.5)
        let want = crate::special::beta(3.25, 2.5).unwrap();
        for n in [5, 6, 11, 40] {
            let r = jacobi01(n, 1.5, 0.25).unwrap();
            assert_eq!(r.len() % 2, 0);
            assert_relative_eq!(r.integrate(|u| u * u), want, max_relative = 1e-13);
        }
        assert!(jacobi01(4, -1.0, 0.0).is_err());
    }

    #[test]
    fn high_moments_keep_relative_accuracy() {
        // ∫ y^k e^{-y} dy = k! for every k the rule integrates exactly.
        let l = laguerre(64, 0.0).unwrap();
        for k in [0usize, 10, 40, 100] {
            let s: f64 = l
                .nodes
                .iter()
                .zip(&l.ln_weights)
                .map(|(y, lw)| (lw + k as f64 * y.ln()).exp())
                .sum();
            let want = libm::lgamma(k as f64 + 1.0).exp();
            assert_relative_eq!(s, want, max_relative = 1e-12);
        }
        // ∫ (1-u)^3 u^{k} du = B(4, k+1)
        let j = jacobi01(200, 3.0, 0.0).unwrap();
        for k in [0usize, 50, 300] {
            let s: f64 = j
                .nodes
                .iter()
                .zip(&j.ln_weights)
                .map(|(u, lw)| (lw + k as f64 * u.ln()).exp())
                .sum();
            let want = crate::special::beta(4.0, k as f64 + 1.0).unwrap();
            assert_relative_eq!(s, want, max_relative = 1e-11);
        }
    }

    #[test]
    fn legendre_and_laguerre() {
        let r = legendre01(10);
        assert_relative_eq!(r.integrate(|u| u.powi(7)), 1.0 / 8.0, max_relative = 1e-14);
        let l = laguerre(30, 0.5).unwrap();
        // ∫ y^{1/2} e^{-y} y^3 dy = Γ(4.5)
        assert_relative_eq!(
            l.integrate(|y| y.powi(3)),
            crate::special::gamma(4.5).unwrap(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn adaptive_handles_endpoint_singularity() {
        // ∫₀¹ (1-u)^{-1/2} du = 2; the piece within machine resolution of
        // u = 1 is unreachable, which bounds the attainable accuracy.
        let v = adaptive(|u| (1.0 - u).powf(-0.5), 0.0, 1.0, 1e-12, 0.0, 4000).unwrap();
        assert_relative_eq!(v, 2.0, max_relative = 1e-7);
        let v = adaptive(|u| (1.0 - u).powf(0.5) * u.sqrt(), 0.0, 1.0, 1e-13, 0.0, 4000).unwrap();
        assert_relative_eq!(v, std::f64::consts::PI / 8.0, max_relative = 1e-12);
        let h = adaptive_half_line(|u| (-u).exp() * (1.0 + u), 1e-13, 0.0, 2000).unwrap();
        assert_relative_eq!(h, 2.0, max_relative = 1e-12);
        let slow = adaptive_half_line(|u| 1.0 / (1.0 + u).powi(3), 1e-12, 0.0, 2000).unwrap();
        assert_relative_eq!(slow, 0.5, max_relative = 1e-11);
    }

    #[test]
    fn adaptive_reports_failure() {
        let r = adaptive(|u| 1.0 / u, 0.0, 1.0, 1e-12, 0.0, 50);
        assert!(matches!(r, Err(QuadError::NonConvergent { .. })));
    }
}
