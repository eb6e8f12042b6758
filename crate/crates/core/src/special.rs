//! Gamma-family functions and the exact products the closed forms are built
//! from.

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum SpecialError {
    #[error("argument must be positive, got {0}")]
    NonPositiveArgument(f64),
    #[error("input must be non-negative (d >= 1, m >= 0), got d={d}, m={m}")]
    NegativeInput { d: i64, m: i64 },
}

fn positive(x: f64) -> Result<f64, SpecialError> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(SpecialError::NonPositiveArgument(x))
    }
}

pub fn ln_gamma(x: f64) -> Result<f64, SpecialError> {
    Ok(libm::lgamma(positive(x)?))
}

pub fn gamma(x: f64) -> Result<f64, SpecialError> {
    Ok(libm::tgamma(positive(x)?))
}

// Tail of Stirling's series for ln Γ(x) after (x-1/2)ln x - x + ln(2π)/2.
fn stirling_tail(x: f64) -> f64 {
    const C: [f64; 7] = [
        1.0 / 12.0,
        -1.0 / 360.0,
        1.0 / 1260.0,
        -1.0 / 1680.0,
        1.0 / 1188.0,
        -691.0 / 360360.0,
        1.0 / 156.0,
    ];
    let r = 1.0 / x;
    let r2 = r * r;
    let mut acc = 0.0;
    for c in C.iter().rev() {
        acc = acc * r2 + c;
    }
    acc * r
}

const SHIFT_TO: f64 = 10.0;

/// `ln Γ(a) − ln Γ(b)`, accurate as a difference even when both logs are
/// large.
///
/// Both arguments are shifted above 10 by the recurrence, then the Stirling
/// expansions are subtracted term by term so the leading parts cancel
/// analytically instead of numerically.
pub fn ln_gamma_ratio(a: f64, b: f64) -> Result<f64, SpecialError> {
    let (mut a, mut b) = (positive(a)?, positive(b)?);
    if a == b {
        return Ok(0.0);
    }
    let mut pa = 1.0;
    while a < SHIFT_TO {
        pa *= a;
        a += 1.0;
    }
    let mut pb = 1.0;
    while b < SHIFT_TO {
        pb *= b;
        b += 1.0;
    }
    let correction = if pa != 1.0 || pb != 1.0 { (pb / pa).ln() } else { 0.0 };
    let delta = a - b;
    let lead = (a - 0.5) * (delta / b).ln_1p() + delta * b.ln() - delta;
    Ok(lead + stirling_tail(a) - stirling_tail(b) + correction)
}

/// `Γ(a)/Γ(b)` computed in log space.
pub fn gamma_ratio(a: f64, b: f64) -> Result<f64, SpecialError> {
    Ok(ln_gamma_ratio(a, b)?.exp())
}

pub fn ln_beta(a: f64, b: f64) -> Result<f64, SpecialError> {
    Ok(ln_gamma_ratio(a, a + b)? + ln_gamma(b)?)
}

/// `B(a,b) = Γ(a)Γ(b)/Γ(a+b)`.
pub fn beta(a: f64, b: f64) -> Result<f64, SpecialError> {
    Ok(ln_beta(a, b)?.exp())
}

/// `∏_{j=1}^{n} (level − j·shift)`; the empty product is 1.
pub fn product_shifted(level: f64, shift: f64, n: usize) -> f64 {
    (1..=n).map(|j| level - j as f64 * shift).product()
}

/// A product `∏_{j=1}^{n}(level − j·shift)` kept with its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftedProduct {
    pub n: usize,
    pub shift: f64,
    pub level: f64,
}

impl ShiftedProduct {
    pub fn value(&self) -> f64 {
        product_shifted(self.level, self.shift, self.n)
    }

    /// `shiftⁿ·Γ(level/shift)/Γ(level/shift − n)` when `level/shift − n > 0`.
    pub fn gamma_form(&self) -> Option<f64> {
        if self.shift == 0.0 {
            return None;
        }
        let q = self.level / self.shift;
        let n = self.n as f64;
        if q - n <= 0.0 {
            return None;
        }
        let r = gamma_ratio(q, q - n).ok()?;
        Some(self.shift.powi(self.n as i32) * r)
    }
}

/// `(1/d!)∏_{j=1}^{d}(m+j) = C(m+d, d)`, exactly.
pub fn dim_h0_cpd(d: i64, m: i64) -> Result<u128, SpecialError> {
    if d < 1 || m < 0 {
        return Err(SpecialError::NegativeInput { d, m });
    }
    let (d, m) = (d as u128, m as u128);
    // C(m+j, j) is an integer at every step.
    let mut acc: u128 = 1;
    for j in 1..=d {
        acc = acc * (m + j) / j;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn factorial_values() {
        assert_relative_eq!(gamma(5.0).unwrap(), 24.0, max_relative = 1e-14);
        assert_relative_eq!(gamma_ratio(8.0, 5.0).unwrap(), 210.0, max_relative = 1e-13);
        assert_relative_eq!(beta(3.0, 2.0).unwrap(), 1.0 / 12.0, max_relative = 1e-13);
        assert_relative_eq!(gamma(0.5).unwrap(), std::f64::consts::PI.sqrt(), max_relative = 1e-14);
    }

    #[test]
    fn rejects_non_positive() {
        assert_eq!(ln_gamma(0.0), Err(SpecialError::NonPositiveArgument(0.0)));
        assert!(gamma_ratio(1.0, -2.0).is_err());
        assert!(beta(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn ratio_is_accurate_at_large_arguments() {
        // Γ(a+1)/Γ(a) = a exactly.
        for &a in &[10.5, 123.25, 999.0, 1000.0, 4321.0] {
            assert_relative_eq!(gamma_ratio(a + 1.0, a).unwrap(), a, max_relative = 1e-13);
        }
        // Γ(a+3)/Γ(a) = a(a+1)(a+2), one argument below the shift point.
        let a = 9.3;
        let want = a * (a + 1.0) * (a + 2.0);
        assert_relative_eq!(gamma_ratio(a + 3.0, a).unwrap(), want, max_relative = 1e-13);
        // Γ(1000.5)/Γ(1000) from a 40-digit reference.
        let r = gamma_ratio(1000.5, 1000.0).unwrap();
        assert_relative_eq!(r, 31.618_824_001_815_913, max_relative = 1e-12);
    }

    #[test]
    fn shifted_products() {
        assert_relative_eq!(product_shifted(2.0, 1.0 / 3.0, 3), 20.0 / 9.0, max_relative = 1e-15);
        assert_eq!(product_shifted(7.0, 0.0, 2), 49.0);
        assert_eq!(product_shifted(3.0, -1.0, 3), 120.0);
        assert_eq!(product_shifted(3.0, 1.0, 0), 1.0);
        let p = ShiftedProduct {
            n: 3,
            shift: 1.0 / 3.0,
            level: 2.0,
        };
        assert_relative_eq!(p.gamma_form().unwrap(), p.value(), max_relative = 1e-12);
        assert_eq!(
            ShiftedProduct {
                n: 3,
                shift: 1.0,
                level: 2.0
            }
            .gamma_form(),
            None
        );
    }

    #[test]
    fn dimension_counts() {
        for d in 1..6 {
            assert_eq!(dim_h0_cpd(d, 0).unwrap(), 1);
        }
        assert_eq!(dim_h0_cpd(1, 5).unwrap(), 6);
        assert_eq!(dim_h0_cpd(2, 3).unwrap(), 10);
        assert_eq!(dim_h0_cpd(0, 3), Err(SpecialError::NegativeInput { d: 0, m: 3 }));
        assert!(dim_h0_cpd(2, -1).is_err());
    }

    fn brute_count(d: usize, m: usize) -> u128 {
        // monomials of total degree <= m in d variables
        fn rec(vars: usize, left: usize) -> u128 {
            if vars == 0 {
                return 1;
            }
            (0..=left).map(|e| rec(vars - 1, left - e)).sum()
        }
        rec(d, m)
    }

    #[test]
    fn dimension_matches_enumeration() {
        for d in 1..=4 {
            for m in 0..=12 {
                assert_eq!(
                    dim_h0_cpd(d as i64, m as i64).unwrap(),
                    brute_count(d, m),
                    "d={d} m={m}"
                );
            }
        }
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn product_equals_gamma_form(level in 0.5f64..60.0, shift in 0.05f64..3.0, n in 1usize..8) {
                let p = ShiftedProduct { n, shift, level };
                if let Some(g) = p.gamma_form() {
                    let v = p.value();
                    prop_assert!((g - v).abs() <= 1e-10 * v.abs().max(1e-300), "{g} vs {v}");
                }
            }

            #[test]
            fn ratio_matches_lgamma_difference(a in 0.1f64..150.0, b in 0.1f64..150.0) {
                let direct = libm::lgamma(a) - libm::lgamma(b);
                let ours = ln_gamma_ratio(a, b).unwrap();
                prop_assert!((direct - ours).abs() <= 1e-11 * (1.0 + direct.abs()));
            }
        }
    }
}
