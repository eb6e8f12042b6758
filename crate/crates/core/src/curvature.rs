//! Curvature invariants of the fibred metric and the constant-coefficient
//! classification.
//!
//! Everything is evaluated in the fibre moment coordinate `x = F′(t)` with
//! `ϕ(x) = F″(t)`. The auxiliary quantities
//!
//! ```text
//! W = (1+λx)^d x^{d0−1},   σ = (Wϕ)′/W,   χ = d0(d0−1)/x − (Wϕ)″/W
//! ```
//!
//! and their x-derivatives are obtained from an order-4 x-jet of ϕ, so every
//! derivative is exact up to round-off rather than differenced.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::jets::{JetError, TaylorJet};
use crate::profiles::{DomainKind, Family, FiberCoordinates, ProfileError, RadialProfile};

/// Smallest fibre coordinate accepted; the `1/x` terms are not continued to
/// the zero section.
pub const X_MIN: f64 = 1e-6;

/// Relative constancy tolerance: `max − min ≤ CONSTANCY_TOL·(1+|mean|)`.
pub const CONSTANCY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CurvatureError {
    #[error("point outside the evaluation domain: {0}")]
    OutOfDomain(String),
    #[error("grid needs at least {MIN_GRID} points, got {0}")]
    EmptyGrid(usize),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    Jet(#[from] JetError),
}

pub const MIN_GRID: usize = 8;

/// Level-α Bergman function of the base metric, `α ↦ ε_{αg_φ}`.
#[derive(Clone)]
pub enum EpsBase {
    /// Constant holomorphic sectional curvature `c`: `∏_{j=1}^{d}(α + jc)`.
    SpaceForm {
        c: f64,
    },
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for EpsBase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EpsBase::SpaceForm { c } => write!(f, "SpaceForm {{ c: {c} }}"),
            EpsBase::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

/// Base metric `g_φ`: dimension, the four curvature invariants, and its
/// Bergman function.
#[derive(Debug, Clone)]
pub struct BaseGeometry {
    pub label: String,
    pub d: usize,
    pub k: f64,
    pub ric2: f64,
    pub lapk: f64,
    pub riem2: f64,
    pub eps: EpsBase,
}

impl BaseGeometry {
    /// Constant holomorphic sectional curvature `c` in the normalization where
    /// `CP^d` with the Fubini–Study form has `c = 1`.
    pub fn space_form(d: usize, c: f64) -> Self {
        let (df, c2) = (d as f64, c * c);
        Self {
            label: format!("space_form(d={d}, c={c})"),
            d,
            k: c * df * (df + 1.0),
            ric2: c2 * df * (df + 1.0) * (df + 1.0),
            lapk: 0.0,
            riem2: 2.0 * c2 * df * (df + 1.0),
            eps: EpsBase::SpaceForm { c },
        }
    }

    /// `CP¹` with potential `k·log(1+|z|²)`.
    pub fn fubini_study_cp1(k: u32) -> Self {
        Self {
            label: format!("cp1(k={k})"),
            ..Self::space_form(1, 1.0 / k as f64)
        }
    }

    pub fn fubini_study_cpd(d: usize) -> Self {
        Self {
            label: format!("cpd(d={d})"),
            ..Self::space_form(d, 1.0)
        }
    }

    pub fn flat(d: usize) -> Self {
        Self {
            label: format!("flat(d={d})"),
            ..Self::space_form(d, 0.0)
        }
    }

    /// Arbitrary invariants with an optional Bergman function.
    pub fn custom(d: usize, k: f64, ric2: f64, lapk: f64, riem2: f64, eps: Option<EpsBase>) -> Self {
        let eps = eps.unwrap_or_else(|| EpsBase::Custom(Arc::new(|_| f64::NAN)));
        Self {
            label: "custom".into(),
            d,
            k,
            ric2,
            lapk,
            riem2,
            eps,
        }
    }

    pub fn a1(&self) -> f64 {
        0.5 * self.k
    }

    pub fn a2(&self) -> f64 {
        assemble_a2(self.k, self.ric2, self.lapk, self.riem2)
    }

    /// Shifts `a1` by `delta` (scalar curvature by `2·delta`), leaving the other
    /// invariants alone.
    pub fn with_a1_shift(&self, delta: f64) -> Self {
        Self {
            label: format!("{}+a1({delta})", self.label),
            k: self.k + 2.0 * delta,
            ..self.clone()
        }
    }

    pub fn with_eps(&self, eps: EpsBase) -> Self {
        Self { eps, ..self.clone() }
    }

    pub fn eps_base(&self, alpha: f64) -> f64 {
        match &self.eps {
            EpsBase::SpaceForm { c } => (1..=self.d).map(|j| alpha + j as f64 * c).product(),
            EpsBase::Custom(f) => f(alpha),
        }
    }
}

/// `a2 = Δk/3 + |R|²/24 − |Ric|²/6 + k²/8`.
pub fn assemble_a2(k: f64, ric2: f64, lapk: f64, riem2: f64) -> f64 {
    lapk / 3.0 + riem2 / 24.0 - ric2 / 6.0 + k * k / 8.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvatureReport {
    pub t: f64,
    pub x: f64,
    pub d0: usize,
    /// ϕ(x)
    pub mom: f64,
    pub sigma: f64,
    pub chi: f64,
    pub sigma_prime: f64,
    pub chi_prime: f64,
    pub k: f64,
    pub ric2: f64,
    pub lapk: f64,
    pub riem2: f64,
    pub a1: f64,
    /// From the direct formula in ϕ, σ, χ and the base coefficients.
    pub a2: f64,
}

impl CurvatureReport {
    /// `a2` rebuilt from the four invariants, an independent route to
    /// [`CurvatureReport::a2`].
    pub fn a2_from_invariants(&self) -> f64 {
        assemble_a2(self.k, self.ric2, self.lapk, self.riem2)
    }
}

/// Curvature of the fibred metric at a fibre point `t`.
pub fn curvature_report(
    base: &BaseGeometry,
    profile: &RadialProfile,
    d0: usize,
    t: f64,
) -> Result<CurvatureReport, CurvatureError> {
    let fc = profile.fiber_coordinates(t)?;
    curvature_at(base, profile.twist, d0, &fc)
}

/// Same as [`curvature_report`] with the fibre coordinates supplied.
pub fn curvature_at(
    base: &BaseGeometry,
    lambda: f64,
    d0: usize,
    fc: &FiberCoordinates,
) -> Result<CurvatureReport, CurvatureError> {
    if d0 == 0 {
        return Err(CurvatureError::OutOfDomain("fibre dimension must be at least 1".into()));
    }
    let x0 = fc.x;
    if !(x0 >= X_MIN) {
        return Err(CurvatureError::OutOfDomain(format!("x = {x0} below {X_MIN}")));
    }
    let l0 = 1.0 + lambda * x0;
    if !(l0 > 0.0) {
        return Err(CurvatureError::OutOfDomain(format!("1 + λx = {l0} is not positive")));
    }

    const ORD: usize = 4;
    let (d, d0f) = (base.d as i32, d0 as f64);
    let df = d as f64;
    let x = TaylorJet::variable(x0, ORD);
    let l = x.scale(lambda).add_scalar(1.0);
    let phi = fc.phi_jet();
    let fibre = d0 > 1;
    let xpow = x.powi(d0 as i32 - 1)?;
    let w = &l.powi(d)? * &xpow;
    let p = &w * &phi;
    let dp = p.differentiate();
    let sigma = dp.try_div(&w.truncate(dp.order()))?;
    let ddp = dp.differentiate();
    let mut chi = -&ddp.try_div(&w.truncate(ddp.order()))?;
    if fibre {
        chi = &chi + &x.truncate(chi.order()).recip()?.scale(d0f * (d0f - 1.0));
    }
    let s = sigma.value();
    let s1 = sigma.derivative(1)?;
    let c = chi.value();
    let dchi = chi.differentiate();
    let c1 = dchi.value();
    let ph = phi.value();
    let ph2 = phi.derivative(2)?;

    let (kb, a1b, a2b) = (base.k, base.a1(), base.a2());
    let lam2 = lambda * lambda;

    let k = kb / l0 + c;

    let mut ric2 = (base.ric2 - 2.0 * lambda * s * kb + df * lam2 * s * s) / (l0 * l0) + s1 * s1;
    if fibre {
        ric2 += (d0f - 1.0) * ((s - d0f) / x0).powi(2);
    }

    // (λ(1+λx)^{d−2}x^{d0−1}ϕ)′ / W
    let twist_term = (&(&l.powi(d - 2)? * &xpow) * &phi)
        .scale(lambda)
        .differentiate()
        .value()
        / w.value();
    // (Wϕχ′)′ / W
    let wpc = &(&w.truncate(1) * &phi.truncate(1)) * &dchi;
    let lapk = base.lapk / (l0 * l0) - twist_term * kb + wpc.differentiate().value() / w.value();

    let phi_over_l = phi.try_div(&l)?.derivative(1)?;
    let mut riem2 = base.riem2 / (l0 * l0) - 4.0 * lam2 * ph * kb / l0.powi(3)
        + 2.0 * df * (df + 1.0) * lam2 * lam2 * ph * ph / l0.powi(4)
        + 4.0 * df * lam2 * phi_over_l * phi_over_l
        + ph2 * ph2;
    let phi_over_x = if fibre { phi.try_div(&x)?.derivative(1)? } else { 0.0 };
    if fibre {
        riem2 += (d0f - 1.0)
            * (4.0 * df * lam2 * (ph / (x0 * l0)).powi(2)
                + 4.0 * phi_over_x * phi_over_x
                + 2.0 * d0f * ((ph - x0) / (x0 * x0)).powi(2));
    }

    // Direct expression for a2 in terms of the base coefficients.
    let phichi = (&phi.truncate(1) * &dchi).differentiate().value();
    let mut drift = df * lambda / l0;
    if fibre {
        drift += (d0f - 1.0) / x0;
    }
    let mut a2 = a2b / (l0 * l0)
        + (c / (2.0 * l0) + lam2 * ph / l0.powi(3)) * a1b
        + (8.0 * phichi + 8.0 * drift * ph * c1 + 3.0 * c * c - 4.0 * s1 * s1
            + ph2 * ph2
            + 4.0 * df * lam2 * phi_over_l * phi_over_l
            - 4.0 * df * lam2 * s * s / (l0 * l0)
            + 2.0 * df * (df + 1.0) * lam2 * lam2 * ph * ph / l0.powi(4))
            / 24.0;
    if fibre {
        a2 += (d0f - 1.0) / 6.0
            * (df * lam2 * ph * ph / (x0 * x0 * l0 * l0)
                + phi_over_x * phi_over_x
                + 0.5 * d0f * (ph - x0).powi(2) / x0.powi(4)
                - (s - d0f).powi(2) / (x0 * x0));
    }

    Ok(CurvatureReport {
        t: fc.t,
        x: x0,
        d0,
        mom: ph,
        sigma: s,
        chi: c,
        sigma_prime: s1,
        chi_prime: c1,
        k,
        ric2,
        lapk,
        riem2,
        a1: 0.5 * k,
        a2,
    })
}

/// Closed forms for `ϕ = x + Ax²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolyquadClosed {
    /// `a1` from the general-A formula (half of `two_a1_general`).
    pub a1: f64,
    pub two_a1_general: f64,
    /// Closed `a2`, available only on the line `A = λ`.
    pub a2: Option<f64>,
}

/// Closed-form `a1` (general A) and `a2` (when `A = λ`) at a fibre point.
///
/// The `a2` expression carries a minus sign on its `1/(1+λx)` term; this is
/// the sign the derivative formulas produce (see the test
/// `closed_a2_matches_engine_on_diagonal`).
pub fn polyquad_closed(base: &BaseGeometry, d0: usize, lambda: f64, a: f64, x: f64) -> PolyquadClosed {
    let (d, d0f) = (base.d as f64, d0 as f64);
    let n = d + d0f;
    let l = 1.0 + lambda * x;
    let a1b = base.a1();
    let two_a1 = -a * (n + 1.0) * n
        + (2.0 * a1b + d * (2.0 * a * d + 2.0 * a * d0f - d * lambda - 2.0 * d0f * lambda + lambda)) / l
        - d * (d - 1.0) * (a - lambda) / (l * l);
    let on_diagonal = (a - lambda).abs() <= 1e-14 * a.abs().max(lambda.abs());
    let a2 = on_diagonal.then(|| {
        let lam2 = lambda * lambda;
        (n - 1.0) * n * (n + 1.0) * (3.0 * n + 2.0) * lam2 / 24.0
            - (n - 1.0) * (n + 2.0) * lambda / 2.0 * (d * (d + 1.0) * lambda / 2.0 + a1b) / l
            + (base.a2()
                + (d - 1.0) * (d + 2.0) * lambda / 2.0 * a1b
                + (d - 1.0) * d * (d + 1.0) * (3.0 * d + 10.0) * lam2 / 24.0)
                / (l * l)
    });
    PolyquadClosed {
        a1: 0.5 * two_a1,
        two_a1_general: two_a1,
        a2,
    }
}

/// Rows of the constant-coefficient classification table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    /// Ball, d = 1, LogBall(A), λ > 0, a1 = d0λ − nA, a2 = 0.
    BallD1,
    /// Ball, d > 1, LogBall(λ), λ > 0, space-form base coefficients.
    BallHigher,
    /// Full space, d = 1, Linear(c), λ > 0, a1 = d0λ, a2 = 0.
    LinearFull,
    /// Full space, d = 1, LogAffine(A < 0), λ ≥ A, a1 = d0λ − nA, a2 = 0.
    AffineD1,
    /// Full space, d > 1, LogAffine(λ), λ < 0, space-form base coefficients.
    AffineHigher,
}

impl Branch {
    pub fn label(&self) -> &'static str {
        match self {
            Branch::BallD1 => "ball-d1",
            Branch::BallHigher => "ball-higher",
            Branch::LinearFull => "linear-full",
            Branch::AffineD1 => "affine-d1",
            Branch::AffineHigher => "affine-higher",
        }
    }
}

fn near(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()))
}

/// The table row whose conditions the given data satisfy, with the constant
/// `A` of `ϕ = x + Ax²` it prescribes.
pub fn match_branch(
    base: &BaseGeometry,
    profile: &RadialProfile,
    d0: usize,
    domain: DomainKind,
) -> Option<(Branch, f64)> {
    let lambda = profile.twist;
    let (d, d0f) = (base.d as f64, d0 as f64);
    let n = d + d0f;
    let (a1b, a2b) = (base.a1(), base.a2());
    let higher_a1 = -0.5 * d * (d + 1.0) * lambda;
    let higher_a2 = (d - 1.0) * d * (d + 1.0) * (3.0 * d + 2.0) * lambda * lambda / 24.0;
    match (&profile.family, domain, base.d) {
        (Family::LogBall { a }, DomainKind::Ball, 1) => {
            (lambda > 0.0 && near(a1b, d0f * lambda - n * a) && near(a2b, 0.0)).then_some((Branch::BallD1, *a))
        }
        (Family::LogBall { a }, DomainKind::Ball, _) => {
            (lambda > 0.0 && near(*a, lambda) && near(a1b, higher_a1) && near(a2b, higher_a2))
                .then_some((Branch::BallHigher, *a))
        }
        (Family::Linear { .. }, DomainKind::FullSpace, 1) => {
            (lambda > 0.0 && near(a1b, d0f * lambda) && near(a2b, 0.0)).then_some((Branch::LinearFull, 0.0))
        }
        (Family::LogAffine { a, .. }, DomainKind::FullSpace, 1) => {
            (*a < 0.0 && lambda >= *a && near(a1b, d0f * lambda - n * a) && near(a2b, 0.0))
                .then_some((Branch::AffineD1, *a))
        }
        (Family::LogAffine { a, .. }, DomainKind::FullSpace, _) => {
            (lambda < 0.0 && near(*a, lambda) && near(a1b, higher_a1) && near(a2b, higher_a2))
                .then_some((Branch::AffineHigher, *a))
        }
        _ => None,
    }
}

/// Constant values the classification predicts for `ϕ = x + Ax²` in
/// complex dimension `n`.
pub fn branch_constants(n: usize, a: f64) -> (f64, f64) {
    let n = n as f64;
    (
        -0.5 * n * (n + 1.0) * a,
        (n - 1.0) * n * (n + 1.0) * (3.0 * n + 2.0) * a * a / 24.0,
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct RicciCheck {
    /// Expected `k = n(n+1)` and `|Ric|² = n(n+1)²`.
    pub expected_k: f64,
    pub max_deviation: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifyVerdict {
    pub constant: bool,
    pub a1_value: f64,
    pub a2_value: f64,
    pub matched_branch: Option<Branch>,
    /// Largest grid spread of `a1` or `a2`.
    pub max_deviation: f64,
    /// Distance of the grid means from the branch constants, when a branch
    /// matched.
    pub branch_deviation: Option<f64>,
    /// Grid values of `|R|² − 4|Ric|²`.
    pub riem_minus_4ric: Vec<f64>,
    pub ricci: Option<RicciCheck>,
    pub reports: Vec<CurvatureReport>,
}

fn spread(v: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let (mut lo, mut hi, mut sum, mut n) = (f64::INFINITY, f64::NEG_INFINITY, 0.0, 0usize);
    for x in v {
        lo = lo.min(x);
        hi = hi.max(x);
        sum += x;
        n += 1;
    }
    (hi - lo, sum / n as f64)
}

/// Evaluates `a1`, `a2` over a t-grid, decides constancy and compares with
/// the classification table.
pub fn classify_check(
    base: &BaseGeometry,
    profile: &RadialProfile,
    d0: usize,
    domain: DomainKind,
    grid: &[f64],
) -> Result<ClassifyVerdict, CurvatureError> {
    if grid.len() < MIN_GRID {
        return Err(CurvatureError::EmptyGrid(grid.len()));
    }
    if domain == DomainKind::Ball && grid.iter().any(|&t| t >= 0.0) {
        return Err(CurvatureError::OutOfDomain("ball grid must satisfy t < 0".into()));
    }
    let reports = grid
        .iter()
        .map(|&t| curvature_report(base, profile, d0, t))
        .collect::<Result<Vec<_>, _>>()?;
    let (s1, m1) = spread(reports.iter().map(|r| r.a1));
    let (s2, m2) = spread(reports.iter().map(|r| r.a2));
    let constant = s1 <= CONSTANCY_TOL * (1.0 + m1.abs()) && s2 <= CONSTANCY_TOL * (1.0 + m2.abs());
    let n = base.d + d0;
    let matched = match_branch(base, profile, d0, domain);
    let branch_deviation = matched.map(|(_, a)| {
        let (e1, e2) = branch_constants(n, a);
        (m1 - e1).abs().max((m2 - e2).abs())
    });
    let ricci = match (matched, profile.twist, profile.quadratic_coefficient()) {
        (Some((Branch::AffineD1 | Branch::AffineHigher, _)), l, Some(a)) if near(l, -1.0) && near(a, -1.0) => {
            let nf = n as f64;
            let ek = nf * (nf + 1.0);
            let er = nf * (nf + 1.0) * (nf + 1.0);
            let dev = reports
                .iter()
                .map(|r| ((r.k - ek) / ek).abs().max(((r.ric2 - er) / er).abs()))
                .fold(0.0, f64::max);
            Some(RicciCheck {
                expected_k: ek,
                max_deviation: dev,
                holds: dev <= 1e-8,
            })
        }
        _ => None,
    };
    Ok(ClassifyVerdict {
        constant,
        a1_value: m1,
        a2_value: m2,
        matched_branch: matched.map(|(b, _)| b),
        max_deviation: s1.max(s2),
        branch_deviation,
        riem_minus_4ric: reports.iter().map(|r| r.riem2 - 4.0 * r.ric2).collect(),
        ricci,
        reports,
    })
}
