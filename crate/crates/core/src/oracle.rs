//! Brute-force Bergman functions assembled from monomial norms computed by
//! direct quadrature, with no use of the moment factorization.
//!
//! The base is the chart `ℂ ⊂ CP¹` with potential `φ = k·log(1+|z|²)`.
//! Monomials `z^p w^q` are orthogonal on the model domain and their norms are
//! integrated over the region in `(s, v) = (|z|², |w|²)` with the full
//! volume density `det ∂∂̄Φ`.

use thiserror::Error;

use crate::bergman::{self, BergmanError, QuantizationSetup};
use crate::profiles::{DomainKind, Family, ParamForm, ProfileError};
use crate::quadrature::{self, QuadError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("invalid oracle configuration: {0}")]
    InvalidConfig(String),
    #[error("basis truncation insufficient: tail estimate {tail:e} exceeds {tol:e}")]
    TruncationInsufficient { tail: f64, tol: f64 },
    #[error("quadrature did not converge: rules of {low} and {high} nodes differ by {gap:e}")]
    QuadratureNonConvergent { low: usize, high: usize, gap: f64 },
    #[error("volume density is not positive at s = {s}, v = {v}")]
    NotPositive { s: f64, v: f64 },
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error(transparent)]
    Bergman(#[from] BergmanError),
    #[error(transparent)]
    Profile(#[from] ProfileError),
}

fn bad(msg: impl Into<String>) -> OracleError {
    OracleError::InvalidConfig(msg.into())
}

fn log_sum_exp(it: impl Iterator<Item = f64> + Clone) -> f64 {
    let top = it.clone().fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return top;
    }
    top + it.map(|x| (x - top).exp()).sum::<f64>().ln()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cp1Report {
    pub k: u32,
    pub m: u32,
    /// `(|z|, ε)` pairs.
    pub values: Vec<(f64, f64)>,
    pub target: f64,
    pub max_deviation: f64,
    pub spread: f64,
    /// `‖z^j‖²` for `j = 0..=mk`.
    pub norms: Vec<f64>,
}

const CP1_NODES: usize = 48;
const CP1_RULE_GAP: f64 = 1e-12;

// ‖z^j‖² = k∫₀^∞ s^j (1+s)^{−mk−2} ds through s = u/(1−u).
fn cp1_norm(k: u32, m: u32, j: u32, rule: &quadrature::Rule) -> f64 {
    let kf = k as f64;
    let decay = (m * k) as i32 + 2;
    rule.integrate(|u| {
        let s = u / (1.0 - u);
        let jac = 1.0 / ((1.0 - u) * (1.0 - u));
        kf * s.powi(j as i32) * (1.0 + s).powi(-decay) * jac
    })
}

/// Bergman function of `m·k·ω_FS` on `CP¹` from quadrature norms.
pub fn cp1_bergman_oracle(k: u32, m: u32, z_grid: &[f64]) -> Result<Cp1Report, OracleError> {
    if k == 0 || m == 0 {
        return Err(bad("k and m must be at least 1"));
    }
    if z_grid.iter().any(|z| !z.is_finite()) {
        return Err(bad("z grid must be finite"));
    }
    // s^j (1+s)^{−mk−2} is integrable at infinity exactly for j ≤ mk.
    let top = m * k;
    let nodes = CP1_NODES.max(top as usize);
    let (lo, hi) = (quadrature::legendre01(nodes), quadrature::legendre01(2 * nodes));
    let mut norms = Vec::with_capacity(top as usize + 1);
    for j in 0..=top {
        let (a, b) = (cp1_norm(k, m, j, &lo), cp1_norm(k, m, j, &hi));
        let gap = ((a - b) / b).abs();
        if gap > CP1_RULE_GAP {
            return Err(OracleError::QuadratureNonConvergent {
                low: lo.len(),
                high: hi.len(),
                gap,
            });
        }
        norms.push(b);
    }
    let values: Vec<(f64, f64)> = z_grid
        .iter()
        .map(|&z| {
            let s = z * z;
            let kernel: f64 = norms.iter().enumerate().map(|(j, nj)| s.powi(j as i32) / nj).sum();
            (z, kernel * (1.0 + s).powi(-(top as i32)))
        })
        .collect();
    let target = m as f64 + 1.0 / k as f64;
    let max_deviation = values.iter().map(|(_, e)| (e - target).abs()).fold(0.0, f64::max);
    let spread = values.iter().map(|v| v.1).fold(f64::NEG_INFINITY, f64::max)
        - values.iter().map(|v| v.1).fold(f64::INFINITY, f64::min);
    let spread = if values.is_empty() { 0.0 } else { spread };
    Ok(Cp1Report {
        k,
        m,
        values,
        target,
        max_deviation,
        spread,
        norms,
    })
}

/// Caps and quadrature sizes for the Hartogs Gram oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct GramOracleConfig {
    /// Degree of the base line bundle, `φ = k·log(1+|z|²)`.
    pub k: u32,
    /// Tensor power; must equal the setup's level.
    pub m: u32,
    /// Largest z-exponent; defaults to `(m+Q)k + 8`.
    pub p_cap: Option<usize>,
    /// Largest w-exponent.
    pub q_cap: usize,
    pub s_nodes: usize,
    pub v_nodes: usize,
    /// `(|z|², ρ)` points.
    pub sample_points: Vec<(f64, f64)>,
    /// Relative tail estimate above which the run is rejected.
    pub tail_tol: f64,
}

impl GramOracleConfig {
    pub fn new(k: u32, m: u32, sample_points: Vec<(f64, f64)>) -> Self {
        Self {
            k,
            m,
            p_cap: None,
            q_cap: 40,
            s_nodes: 200,
            v_nodes: 200,
            sample_points,
            tail_tol: 1e-4,
        }
    }

    pub fn p_cap(&self) -> usize {
        self.p_cap
            .unwrap_or((self.m as usize + self.q_cap) * self.k as usize + 8)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HartogsPoint {
    pub s: f64,
    pub rho: f64,
    pub value: f64,
    /// Estimated relative contribution of the w-degrees beyond the cap.
    pub tail: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HartogsReport {
    pub points: Vec<HartogsPoint>,
    pub target: Option<f64>,
    /// Largest `|ε − target|` over the sample points.
    pub max_deviation: Option<f64>,
    pub max_tail: f64,
    pub basis_size: usize,
    /// `N_{p,q}` in log form, indexed `[q][p]`.
    pub ln_norms: Vec<Vec<f64>>,
}

/// Partial derivatives of `G(s,v) = k·log(1+s) + F((1+s)^κ v)` and the
/// resulting complex Hessian determinant in radial form.
#[derive(Debug, Clone, Copy)]
struct Potential {
    k: f64,
    kappa: f64,
}

impl Potential {
    fn det(&self, s: f64, rho: f64, f1: f64, f2: f64) -> f64 {
        let (k, kappa) = (self.k, self.kappa);
        let one = 1.0 + s;
        let v = rho * one.powf(-kappa);
        let rho_s = kappa * rho / one;
        let rho_v = one.powf(kappa);
        let rho_ss = kappa * (kappa - 1.0) * rho / (one * one);
        let rho_sv = kappa * one.powf(kappa - 1.0);
        let g_s = k / one + f1 * rho_s;
        let g_ss = -k / (one * one) + f2 * rho_s * rho_s + f1 * rho_ss;
        let g_v = f1 * rho_v;
        let g_vv = f2 * rho_v * rho_v;
        let g_sv = f2 * rho_s * rho_v + f1 * rho_sv;
        (g_s + s * g_ss) * (g_v + v * g_vv) - s * v * g_sv * g_sv
    }
}

struct Grid {
    // ln s_i, ln(1+s_i)
    ln_s: Vec<f64>,
    ln_one: Vec<f64>,
    ln_tau: Vec<f64>,
    // weight × e^{−mG} × det × Jacobians, in log form, row-major [i][j]
    ln_w: Vec<Vec<f64>>,
}

fn check_setup(cfg: &GramOracleConfig, s: &QuantizationSetup) -> Result<(), OracleError> {
    if s.d() != 1 || s.d0 != 1 {
        return Err(bad("the oracle covers d = d0 = 1 only"));
    }
    if (s.alpha - cfg.m as f64).abs() > 1e-12 {
        return Err(bad(format!("setup level {} differs from m = {}", s.alpha, cfg.m)));
    }
    if cfg.k == 0 || cfg.m == 0 || cfg.s_nodes < 2 || cfg.v_nodes < 2 {
        return Err(bad("k, m must be positive and node counts at least 2"));
    }
    for &(z, rho) in &cfg.sample_points {
        let inside = rho >= 0.0 && z >= 0.0 && (s.domain == DomainKind::FullSpace || rho < 1.0);
        if !inside || !z.is_finite() || !rho.is_finite() {
            return Err(bad(format!("sample point ({z}, {rho}) outside the domain")));
        }
    }
    Ok(())
}

fn build_grid(cfg: &GramOracleConfig, s: &QuantizationSetup) -> Result<Grid, OracleError> {
    let m = cfg.m as f64;
    let pot = Potential {
        k: cfg.k as f64,
        kappa: cfg.k as f64 * s.lambda(),
    };
    let rs = quadrature::legendre01(cfg.s_nodes);
    // τ = ρ is the fibre coordinate; on the full space a Laguerre rule in
    // y = βτ absorbs the exponential decay.
    let (taus, ln_wt): (Vec<f64>, Vec<f64>) = match s.domain {
        DomainKind::Ball => {
            let r = quadrature::legendre01(cfg.v_nodes);
            (r.nodes, r.ln_weights)
        }
        DomainKind::FullSpace => {
            let beta = match s.profile.family {
                Family::Linear { c } | Family::LogAffine { c, .. } => m * c,
                _ => 1.0,
            };
            let r = quadrature::laguerre(cfg.v_nodes, 0.0)?;
            let t = r.nodes.iter().map(|y| y / beta).collect();
            let w = r
                .nodes
                .iter()
                .zip(&r.ln_weights)
                .map(|(y, lw)| lw + y - beta.ln())
                .collect();
            (t, w)
        }
    };
    let mut fib = Vec::with_capacity(taus.len());
    for &t in &taus {
        let f = s.profile.derivatives(t, 2, ParamForm::Rho)?;
        fib.push((f[0], f[1], f[2]));
    }
    let (mut ln_s, mut ln_one, mut ln_w) = (Vec::new(), Vec::new(), Vec::new());
    for (&x, &lwx) in rs.nodes.iter().zip(&rs.ln_weights) {
        let sv = x / (1.0 - x);
        let lo = (1.0 + sv).ln();
        // ds = dx/(1−x)², dv = (1+s)^{−κ} dτ
        let base = lwx - 2.0 * (1.0 - x).ln() - m * pot.k * lo - pot.kappa * lo;
        let mut row = Vec::with_capacity(taus.len());
        for ((&t, &lwt), &(f0, f1, f2)) in taus.iter().zip(&ln_wt).zip(&fib) {
            let det = pot.det(sv, t, f1, f2);
            if !(det > 0.0) {
                return Err(OracleError::NotPositive {
                    s: sv,
                    v: t * (1.0 + sv).powf(-pot.kappa),
                });
            }
            row.push(base + lwt - m * f0 + det.ln());
        }
        ln_s.push(sv.ln());
        ln_one.push(lo);
        ln_w.push(row);
    }
    Ok(Grid {
        ln_s,
        ln_one,
        ln_tau: taus.iter().map(|t| t.ln()).collect(),
        ln_w,
    })
}

// z^p w^q has finite norm iff p ≤ km + κq.
fn p_limit(cfg: &GramOracleConfig, kappa: f64, q: usize) -> usize {
    let lim = (cfg.k as f64 * cfg.m as f64 + kappa * q as f64 + 1e-9).floor();
    (lim.max(0.0) as usize).min(cfg.p_cap())
}

/// `ln N_{p,q}` for `q ≤ Q` and the admissible `p` of each shell.
fn gram_diagonal(cfg: &GramOracleConfig, s: &QuantizationSetup, g: &Grid) -> Vec<Vec<f64>> {
    let kappa = cfg.k as f64 * s.lambda();
    // Inner sums over the fibre nodes: T[q][i] = ln Σ_j W_ij τ_j^q.
    let inner: Vec<Vec<f64>> = (0..=cfg.q_cap)
        .map(|q| {
            let qf = q as f64;
            g.ln_w
                .iter()
                .map(|row| log_sum_exp(row.iter().zip(&g.ln_tau).map(|(w, t)| w + qf * t)))
                .collect()
        })
        .collect();
    (0..=cfg.q_cap)
        .map(|q| {
            let qf = q as f64;
            (0..=p_limit(cfg, kappa, q))
                .map(|p| {
                    let pf = p as f64;
                    log_sum_exp((0..g.ln_s.len()).map(|i| inner[q][i] + pf * g.ln_s[i] - kappa * qf * g.ln_one[i]))
                })
                .collect()
        })
        .collect()
}

/// Bergman function of the model domain over the `CP¹` chart, assembled from
/// quadrature norms of `z^p w^q`.
pub fn hartogs_gram_oracle(cfg: &GramOracleConfig, s: &QuantizationSetup) -> Result<HartogsReport, OracleError> {
    check_setup(cfg, s)?;
    let g = build_grid(cfg, s)?;
    let ln_norms = gram_diagonal(cfg, s, &g);
    let basis_size = ln_norms.iter().map(Vec::len).sum();
    let kappa = cfg.k as f64 * s.lambda();
    let (kf, m) = (cfg.k as f64, cfg.m as f64);
    let mut points = Vec::with_capacity(cfg.sample_points.len());
    for &(z2, rho) in &cfg.sample_points {
        let f_rho = s.profile.jet(rho, 0, ParamForm::Rho)?.value();
        let lo = z2.ln_1p();
        let pre = -m * kf * lo - m * f_rho;
        let ln_v = rho.ln() - kappa * lo;
        let shells: Vec<f64> = ln_norms
            .iter()
            .enumerate()
            .map(|(q, row)| {
                if q > 0 && rho == 0.0 {
                    return 0.0;
                }
                let qv = if q == 0 { 0.0 } else { q as f64 * ln_v };
                row.iter()
                    .enumerate()
                    .map(|(p, ln_n)| {
                        let pz = if p == 0 { 0.0 } else { p as f64 * z2.ln() };
                        if p > 0 && z2 == 0.0 {
                            0.0
                        } else {
                            (pz + qv - ln_n + pre).exp()
                        }
                    })
                    .sum()
            })
            .collect();
        let value: f64 = shells.iter().sum();
        let tail = shell_tail(&shells) / value;
        points.push(HartogsPoint {
            s: z2,
            rho,
            value,
            tail,
        });
    }
    let max_tail = points.iter().map(|p| p.tail).fold(0.0, f64::max);
    if max_tail > cfg.tail_tol {
        return Err(OracleError::TruncationInsufficient {
            tail: max_tail,
            tol: cfg.tail_tol,
        });
    }
    let target = bergman::closed_target(s).ok().map(|t| t.value);
    let max_deviation = target.map(|t| points.iter().map(|p| (p.value - t).abs()).fold(0.0, f64::max));
    Ok(HartogsReport {
        points,
        target,
        max_deviation,
        max_tail,
        basis_size,
        ln_norms,
    })
}

// Geometric extrapolation from the last two shells; infinite if they are
// not yet decaying.
fn shell_tail(shells: &[f64]) -> f64 {
    match shells {
        [.., b] if *b == 0.0 => 0.0,
        [.., a, b] => {
            let r = b / a;
            if r >= 1.0 || !r.is_finite() {
                f64::INFINITY
            } else {
                b * r / (1.0 - r)
            }
        }
        _ => f64::INFINITY,
    }
}

/// Full complex Gram entry `⟨z^{p1}w^{q1}, z^{p2}w^{q2}⟩` with the angular
/// integrals done by `angles`-point trapezoid rules, as `(re, im)`.
pub fn gram_entry(
    cfg: &GramOracleConfig,
    s: &QuantizationSetup,
    (p1, q1): (usize, usize),
    (p2, q2): (usize, usize),
    angles: usize,
) -> Result<(f64, f64), OracleError> {
    check_setup(cfg, s)?;
    if angles == 0 {
        return Err(bad("need at least one angular node"));
    }
    let g = build_grid(cfg, s)?;
    let kappa = cfg.k as f64 * s.lambda();
    let (hp, hq) = (0.5 * (p1 + p2) as f64, 0.5 * (q1 + q2) as f64);
    let mut radial = 0.0;
    for i in 0..g.ln_s.len() {
        for j in 0..g.ln_tau.len() {
            let ln_v = g.ln_tau[j] - kappa * g.ln_one[i];
            radial += (g.ln_w[i][j] + hp * g.ln_s[i] + hq * ln_v).exp();
        }
    }
    let (dp, dq) = (p1 as f64 - p2 as f64, q1 as f64 - q2 as f64);
    let step = std::f64::consts::TAU / angles as f64;
    let (mut re, mut im) = (0.0, 0.0);
    for a in 0..angles {
        for b in 0..angles {
            let phase = dp * step * a as f64 + dq * step * b as f64;
            re += phase.cos();
            im += phase.sin();
        }
    }
    let norm = (angles * angles) as f64;
    Ok((radial * re / norm, radial * im / norm))
}

/// `I_m` for a two-dimensional ball fibre by direct quadrature over
/// `{|w₁|² + |w₂|² < 1}`, polar in each coordinate and a tensor rule on the
/// triangle in `(|w₁|², |w₂|²)`.
pub fn fiber_moment_direct(s: &QuantizationSetup, m: [u32; 2], nodes: usize) -> Result<f64, OracleError> {
    if s.d0 != 2 || s.domain != DomainKind::Ball {
        return Err(bad("direct fibre moments cover the two-dimensional ball fibre"));
    }
    let r = quadrature::legendre01(nodes.max(2));
    let mut total = 0.0;
    for (&a, &wa) in r.nodes.iter().zip(&r.weights) {
        for (&y, &wy) in r.nodes.iter().zip(&r.weights) {
            let b = (1.0 - a) * y;
            let h = bergman::density_h(s, a + b)?;
            total += wa * wy * (1.0 - a) * a.powi(m[0] as i32) * b.powi(m[1] as i32) * h;
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bergman::{balanced_setup, BalancedPart, PsiMethod};
    use approx::assert_relative_eq;

    #[test]
    fn cp1_examples() {
        let grid = [0.0, 0.3, 1.0, 2.5];
        assert!(cp1_bergman_oracle(1, 1, &grid).unwrap().max_deviation < 1e-12);
        let r = cp1_bergman_oracle(2, 3, &grid).unwrap();
        assert_eq!(r.target, 3.5);
        assert!(r.max_deviation < 1e-10);
        let r = cp1_bergman_oracle(3, 2, &grid).unwrap();
        for (j, nj) in r.norms.iter().enumerate() {
            let beta = 3.0 * crate::special::beta(j as f64 + 1.0, 7.0 - j as f64).unwrap();
            assert_relative_eq!(*nj, beta, max_relative = 1e-12);
        }
        assert!(cp1_bergman_oracle(0, 1, &grid).is_err());
    }

    #[test]
    fn hartogs_total_space() {
        let s = balanced_setup(1, 1, 2.0, BalancedPart::TotalSpace, 1.0).unwrap();
        let mut cfg = GramOracleConfig::new(1, 2, vec![(0.5, 0.3), (1.0, 0.7), (0.2, 0.0)]);
        cfg.s_nodes = 80;
        cfg.v_nodes = 80;
        let r = hartogs_gram_oracle(&cfg, &s).unwrap();
        assert!(r.max_deviation.unwrap() < 1e-6, "{r:?}");
        let origin = r.points[2].value;
        let series0 = s.base.eps_base(2.0) / bergman::psi_moment(&s, 0, PsiMethod::Closed).unwrap();
        assert_relative_eq!(origin, series0, max_relative = 1e-8);
    }

    #[test]
    fn hartogs_reports_short_basis() {
        let s = balanced_setup(2, 1, 3.0, BalancedPart::BallBundle, 1.0).unwrap();
        let mut cfg = GramOracleConfig::new(2, 3, vec![(0.5, 0.7)]);
        cfg.q_cap = 10;
        cfg.s_nodes = 60;
        cfg.v_nodes = 60;
        assert!(matches!(
            hartogs_gram_oracle(&cfg, &s),
            Err(OracleError::TruncationInsufficient { .. })
        ));
    }

    #[test]
    fn off_diagonal_entries_vanish() {
        let s = balanced_setup(2, 1, 2.0, BalancedPart::BallBundle, 1.0).unwrap();
        let mut cfg = GramOracleConfig::new(2, 2, vec![]);
        cfg.s_nodes = 40;
        cfg.v_nodes = 40;
        let (d, _) = gram_entry(&cfg, &s, (1, 1), (1, 1), 16).unwrap();
        let (re, im) = gram_entry(&cfg, &s, (1, 1), (2, 0), 16).unwrap();
        assert!(re.abs().max(im.abs()) < 1e-14 * d);
    }

    #[test]
    fn direct_fibre_moment_depends_on_total_degree() {
        let p = crate::profiles::RadialProfile::log_ball(0.5, 1.0).unwrap();
        let s = QuantizationSetup::new(
            2,
            DomainKind::Ball,
            p,
            crate::curvature::BaseGeometry::space_form(1, 0.5),
            4.3,
        );
        let psi = bergman::psi_moment(&s, 3, PsiMethod::Closed).unwrap();
        for j in 0..=3u32 {
            let direct = fiber_moment_direct(&s, [j, 3 - j], 120).unwrap();
            let g =
                crate::special::gamma(j as f64 + 1.0).unwrap() * crate::special::gamma(4.0 - j as f64).unwrap() / 6.0;
            assert_relative_eq!(direct / g, psi, max_relative = 1e-6);
        }
    }
}
