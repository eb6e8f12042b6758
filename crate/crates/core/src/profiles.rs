//! Radial profiles `F` and their fibre coordinates.
//!
//! A profile is stored once and can be expanded either in
//! `t = λφ + log‖w‖²` or in `ρ = e^t`. The three classified families all
//! satisfy `ϕ(x) = x + Ax²` with `x = F′(t)`, `ϕ = F″(t)`.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::jets::{JetError, TaylorJet, DEFAULT_ORDER};
use crate::quadrature;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProfileError {
    #[error("point {point} lies outside the domain of {profile}")]
    OutOfDomain { profile: String, point: f64 },
    #[error("F'' = {0} is not positive; fibre coordinates are degenerate")]
    DegenerateJet(f64),
    #[error("invalid profile parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Jet(#[from] JetError),
}

/// Which variable a jet is taken in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamForm {
    T,
    Rho,
}

/// Model domain in the fibre: `ρ < 1` or all of `ℂ^{d0}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DomainKind {
    Ball,
    FullSpace,
}

/// Produces the t-form jet of `F` at a point, to a given order.
pub type JetRule = Arc<dyn Fn(f64, usize) -> Result<TaylorJet, ProfileError> + Send + Sync>;

/// A user-supplied profile. The t-rule is mandatory; a ρ-rule is needed only
/// where `ρ = 0` must be reached (the t-form cannot see it).
#[derive(Clone)]
pub struct CustomProfile {
    pub label: String,
    pub t_rule: JetRule,
    pub rho_rule: Option<JetRule>,
    /// Supremum of the t-domain (`0` for ball-type profiles).
    pub t_sup: f64,
}

impl fmt::Debug for CustomProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomProfile")
            .field("label", &self.label)
            .field("has_rho_rule", &self.rho_rule.is_some())
            .field("t_sup", &self.t_sup)
            .finish()
    }
}

#[derive(Debug, Clone)]
pub enum Family {
    /// `F_t = −(1/A)log(1−e^t)`, `A > 0`.
    LogBall {
        a: f64,
    },
    /// `F_ρ = cρ`, `c > 0`.
    Linear {
        c: f64,
    },
    /// `F_t = −(1/A)log(1+ce^t)`, `c > 0`.
    LogAffine {
        a: f64,
        c: f64,
    },
    Custom(CustomProfile),
}

#[derive(Debug, Clone)]
pub struct RadialProfile {
    pub family: Family,
    /// The twist λ in `t = λφ + log‖w‖²`.
    pub twist: f64,
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), ProfileError> {
    if ok {
        Ok(())
    } else {
        Err(ProfileError::InvalidParameter(msg()))
    }
}

fn finite_nonzero_twist(twist: f64) -> Result<(), ProfileError> {
    check(twist != 0.0 && twist.is_finite(), || {
        format!("twist must be finite and nonzero, got {twist}")
    })
}

impl RadialProfile {
    pub fn log_ball(a: f64, twist: f64) -> Result<Self, ProfileError> {
        check(a > 0.0 && a.is_finite(), || format!("LogBall needs A > 0, got {a}"))?;
        finite_nonzero_twist(twist)?;
        Ok(Self {
            family: Family::LogBall { a },
            twist,
        })
    }

    pub fn linear(c: f64, twist: f64) -> Result<Self, ProfileError> {
        check(c > 0.0 && c.is_finite(), || format!("Linear needs c > 0, got {c}"))?;
        finite_nonzero_twist(twist)?;
        Ok(Self {
            family: Family::Linear { c },
            twist,
        })
    }

    pub fn log_affine(a: f64, c: f64, twist: f64) -> Result<Self, ProfileError> {
        check(a != 0.0 && a.is_finite(), || format!("LogAffine needs A != 0, got {a}"))?;
        check(c > 0.0 && c.is_finite(), || format!("LogAffine needs c > 0, got {c}"))?;
        finite_nonzero_twist(twist)?;
        Ok(Self {
            family: Family::LogAffine { a, c },
            twist,
        })
    }

    pub fn custom(profile: CustomProfile, twist: f64) -> Result<Self, ProfileError> {
        finite_nonzero_twist(twist)?;
        Ok(Self {
            family: Family::Custom(profile),
            twist,
        })
    }

    pub fn name(&self) -> String {
        match &self.family {
            Family::LogBall { a } => format!("LogBall(A={a})"),
            Family::Linear { c } => format!("Linear(c={c})"),
            Family::LogAffine { a, c } => format!("LogAffine(A={a}, c={c})"),
            Family::Custom(p) => format!("Custom({})", p.label),
        }
    }

    /// `A` in `ϕ(x) = x + Ax²` for the classified families.
    pub fn quadratic_coefficient(&self) -> Option<f64> {
        match self.family {
            Family::LogBall { a } | Family::LogAffine { a, .. } => Some(a),
            Family::Linear { .. } => Some(0.0),
            Family::Custom(_) => None,
        }
    }

    /// Supremum of the t-domain on which `F_t` is defined.
    pub fn t_sup(&self) -> f64 {
        match &self.family {
            Family::LogBall { .. } => 0.0,
            Family::Linear { .. } | Family::LogAffine { .. } => f64::INFINITY,
            Family::Custom(p) => p.t_sup,
        }
    }

    /// Same family for `s·F`, re-tagged with a new twist.
    pub fn rescaled(&self, s: f64, twist: f64) -> Result<Self, ProfileError> {
        check(s > 0.0, || format!("rescaling factor must be positive, got {s}"))?;
        match &self.family {
            Family::LogBall { a } => Self::log_ball(a / s, twist),
            Family::Linear { c } => Self::linear(c * s, twist),
            Family::LogAffine { a, c } => Self::log_affine(a / s, *c, twist),
            Family::Custom(p) => {
                let scale = |rule: JetRule| -> JetRule { Arc::new(move |pt, n| Ok(rule(pt, n)?.scale(s))) };
                let scaled = CustomProfile {
                    label: format!("{}*{s}", p.label),
                    t_rule: scale(p.t_rule.clone()),
                    rho_rule: p.rho_rule.clone().map(scale),
                    t_sup: p.t_sup,
                };
                Self::custom(scaled, twist)
            }
        }
    }

    fn out_of_domain(&self, point: f64) -> ProfileError {
        ProfileError::OutOfDomain {
            profile: self.name(),
            point,
        }
    }

    /// Jet of `F` at `point` in the requested variable.
    pub fn jet(&self, point: f64, order: usize, form: ParamForm) -> Result<TaylorJet, ProfileError> {
        if !point.is_finite() {
            return Err(self.out_of_domain(point));
        }
        match (&self.family, form) {
            (Family::LogBall { a }, ParamForm::T) => {
                if point >= 0.0 {
                    return Err(self.out_of_domain(point));
                }
                // 1 − e^{t}: value via expm1 keeps precision near the boundary.
                let mut g = TaylorJet::exp_variable(point, order).scale(-1.0);
                let value = -point.exp_m1();
                let mut c = g.coeffs().to_vec();
                c[0] = value;
                g = TaylorJet::from_coeffs(c);
                Ok(g.ln_with_value(value.ln()).scale(-1.0 / a))
            }
            (Family::LogBall { a }, ParamForm::Rho) => {
                if !(0.0..1.0).contains(&point) {
                    return Err(self.out_of_domain(point));
                }
                let g = TaylorJet::variable(point, order).scale(-1.0).add_scalar(1.0);
                Ok(g.ln_with_value((-point).ln_1p()).scale(-1.0 / a))
            }
            (Family::Linear { c }, ParamForm::T) => Ok(TaylorJet::exp_variable(point, order).scale(*c)),
            (Family::Linear { c }, ParamForm::Rho) => {
                if point < 0.0 {
                    return Err(self.out_of_domain(point));
                }
                Ok(TaylorJet::variable(point, order).scale(*c))
            }
            (Family::LogAffine { a, c }, ParamForm::T) => {
                let ce = c * point.exp();
                if ce <= 1.0 {
                    let g = TaylorJet::exp_variable(point, order).scale(*c).add_scalar(1.0);
                    return Ok(g.ln_with_value(ce.ln_1p()).scale(-1.0 / a));
                }
                // log(1+ce^t) = t + log c + log(1 + e^{−t}/c); the last term's
                // derivatives are small and come out without cancellation.
                let small = TaylorJet::variable(point, order)
                    .scale(-1.0)
                    .exp()
                    .scale(1.0 / c)
                    .add_scalar(1.0);
                let tail = small.ln_with_value((1.0 / ce).ln_1p());
                let lead = TaylorJet::variable(point, order).add_scalar(c.ln());
                Ok((&lead + &tail).scale(-1.0 / a))
            }
            (Family::LogAffine { a, c }, ParamForm::Rho) => {
                if point < 0.0 {
                    return Err(self.out_of_domain(point));
                }
                let g = TaylorJet::variable(point, order).scale(*c).add_scalar(1.0);
                Ok(g.ln_with_value((c * point).ln_1p()).scale(-1.0 / a))
            }
            (Family::Custom(p), ParamForm::T) => {
                if point >= p.t_sup {
                    return Err(self.out_of_domain(point));
                }
                (p.t_rule)(point, order)
            }
            (Family::Custom(p), ParamForm::Rho) => {
                if let Some(rule) = &p.rho_rule {
                    return rule(point, order);
                }
                if point <= 0.0 {
                    return Err(self.out_of_domain(point));
                }
                let t = point.ln();
                let outer = self.jet(t, order, ParamForm::T)?;
                let inner = TaylorJet::variable(point, order).ln()?;
                Ok(outer.compose(&inner)?)
            }
        }
    }

    /// Plain derivatives `[F, F′, ..., F^(n)]` at a point.
    pub fn derivatives(&self, point: f64, n: usize, form: ParamForm) -> Result<Vec<f64>, ProfileError> {
        Ok(self.jet(point, n, form)?.derivatives())
    }

    /// `x = F′(t)` and the derivatives of `ϕ(x) = F″(t(x))` through the fourth.
    pub fn fiber_coordinates(&self, t: f64) -> Result<FiberCoordinates, ProfileError> {
        let f = self.jet(t, DEFAULT_ORDER, ParamForm::T)?;
        let fp = f.differentiate();
        let x = fp.value();
        let fpp = fp.differentiate();
        let phi = fpp.value();
        if !(phi > 0.0) {
            return Err(ProfileError::DegenerateJet(phi));
        }
        let mut mom = [phi, 0.0, 0.0, 0.0, 0.0];
        let mut cur = fpp.clone();
        for slot in mom.iter_mut().skip(1) {
            // d/dx = (1/F″) d/dt
            let d = cur.differentiate();
            cur = d.try_div(&fpp.truncate(d.order()))?;
            *slot = cur.value();
        }
        Ok(FiberCoordinates { t, x, mom })
    }

    /// Inverse of `t ↦ F′(t)`.
    pub fn t_at_x(&self, x: f64) -> Result<f64, ProfileError> {
        let bad = || self.out_of_domain(x);
        match &self.family {
            Family::LogBall { a } => {
                if !(x > 0.0) {
                    return Err(bad());
                }
                // e^t = Ax/(1+Ax)
                Ok(-(1.0 / (a * x)).ln_1p())
            }
            Family::Linear { c } => {
                if !(x > 0.0) {
                    return Err(bad());
                }
                Ok((x / c).ln())
            }
            Family::LogAffine { a, c } => {
                // q = ce^t/(1+ce^t) = −Ax ∈ (0,1)
                let q = -a * x;
                if !(q > 0.0 && q < 1.0) {
                    return Err(bad());
                }
                Ok((q / (c * (1.0 - q))).ln())
            }
            Family::Custom(_) => self.t_at_x_numeric(x),
        }
    }

    // Safeguarded Newton on the increasing map t ↦ F′(t).
    fn t_at_x_numeric(&self, x: f64) -> Result<f64, ProfileError> {
        let fprime = |t: f64| -> Result<(f64, f64), ProfileError> {
            let d = self.derivatives(t, 2, ParamForm::T)?;
            Ok((d[1] - x, d[2]))
        };
        let sup = self.t_sup();
        let mut hi = if sup.is_finite() {
            sup - 1e-300_f64.max(sup.abs() * f64::EPSILON)
        } else {
            1.0
        };
        if !sup.is_finite() {
            while fprime(hi)?.0 < 0.0 {
                hi = 2.0 * hi + 1.0;
                if hi > 1e6 {
                    return Err(self.out_of_domain(x));
                }
            }
        }
        let mut lo = hi.min(0.0) - 1.0;
        while fprime(lo)?.0 > 0.0 {
            lo = 2.0 * lo - 1.0;
            if lo < -1e4 {
                return Err(self.out_of_domain(x));
            }
        }
        let mut t = 0.5 * (lo + hi);
        for _ in 0..200 {
            let (g, dg) = fprime(t)?;
            if g.abs() <= 1e-15 * x.abs().max(1e-300) {
                return Ok(t);
            }
            if g > 0.0 {
                hi = t;
            } else {
                lo = t;
            }
            let newton = t - g / dg;
            t = if dg > 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo <= 4.0 * f64::EPSILON * t.abs().max(1.0) {
                return Ok(t);
            }
        }
        Ok(t)
    }

    /// Pointwise positivity on a t-grid plus a completeness verdict for the
    /// fibre metric toward the domain's outer boundary.
    pub fn admissibility(&self, domain: DomainKind, grid: &[f64]) -> AdmissibilityReport {
        let points: Vec<PointCheck> = grid
            .iter()
            .map(|&t| {
                let in_domain = match domain {
                    DomainKind::Ball => t < 0.0,
                    DomainKind::FullSpace => true,
                };
                match (in_domain, self.fiber_coordinates(t)) {
                    (true, Ok(fc)) => PointCheck {
                        t,
                        x: Some(fc.x),
                        phi_positive: fc.mom[0] > 0.0,
                        twist_positive: 1.0 + self.twist * fc.x > 0.0,
                        x_positive: fc.x > 0.0,
                    },
                    _ => PointCheck {
                        t,
                        x: None,
                        phi_positive: false,
                        twist_positive: false,
                        x_positive: false,
                    },
                }
            })
            .collect();
        let admissible = !points.is_empty() && points.iter().all(PointCheck::ok);
        let completeness = self.completeness(domain);
        AdmissibilityReport {
            points,
            admissible,
            completeness,
        }
    }

    fn sqrt_fpp(&self, t: f64) -> f64 {
        match self.derivatives(t, 2, ParamForm::T) {
            Ok(d) if d[2] > 0.0 && d[2].is_finite() => d[2].sqrt(),
            _ => 0.0,
        }
    }

    /// Numerical test of `∫√F″ dt = ∞` toward the outer boundary.
    ///
    /// Segments are added over a geometric sequence of boundary gaps
    /// (`10^{−j}` below `t = 0` for the ball, `t = 2^j` for the full space).
    /// A cumulative integral past [`COMPLETENESS_THRESHOLD`] or increments that
    /// stay level over the final decades (logarithmic growth) mean complete;
    /// increments falling below `10⁻⁶` of the total mean incomplete.
    pub fn completeness(&self, domain: DomainKind) -> Completeness {
        let (start, ends): (f64, Vec<f64>) = match domain {
            DomainKind::Ball => (-1.0, (1..=15).map(|j| -(10f64).powi(-j)).collect()),
            DomainKind::FullSpace => (0.0, (0..=9).map(|j| (2f64).powi(j)).collect()),
        };
        if domain == DomainKind::Ball && self.t_sup() < 0.0 {
            return Completeness::Inconclusive;
        }
        let mut total = 0.0f64;
        let mut lo = start;
        let mut increments = Vec::new();
        for &hi in &ends {
            let abs_tol = 1e-12 * total.max(1e-3);
            let seg = quadrature::adaptive(|t| self.sqrt_fpp(t), lo, hi, 1e-10, abs_tol, 2000);
            let Ok(seg) = seg else {
                return Completeness::Inconclusive;
            };
            total += seg;
            increments.push(seg);
            lo = hi;
            if total > COMPLETENESS_THRESHOLD {
                return Completeness::Complete;
            }
        }
        let last = *increments.last().unwrap();
        if last <= 1e-6 * total.max(1e-300) {
            return Completeness::Incomplete;
        }
        let tail = &increments[increments.len() - 5..];
        let level = tail
            .windows(2)
            .all(|w| w[0] > 0.0 && (0.8..1.25).contains(&(w[1] / w[0])));
        if level {
            Completeness::Complete
        } else {
            Completeness::Inconclusive
        }
    }
}

/// Cumulative `∫√F″` beyond which the fibre metric is reported complete.
pub const COMPLETENESS_THRESHOLD: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiberCoordinates {
    pub t: f64,
    pub x: f64,
    /// `[ϕ, ϕ′, ϕ″, ϕ‴, ϕ⁗]` in the moment coordinate x.
    pub mom: [f64; 5],
}

impl FiberCoordinates {
    /// ϕ as an order-4 jet in x.
    pub fn phi_jet(&self) -> TaylorJet {
        TaylorJet::from_derivatives(&self.mom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Completeness {
    Complete,
    Incomplete,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointCheck {
    pub t: f64,
    pub x: Option<f64>,
    pub phi_positive: bool,
    pub twist_positive: bool,
    pub x_positive: bool,
}

impl PointCheck {
    pub fn ok(&self) -> bool {
        self.phi_positive && self.twist_positive && self.x_positive
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibilityReport {
    pub points: Vec<PointCheck>,
    pub admissible: bool,
    pub completeness: Completeness,
}
