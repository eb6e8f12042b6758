//! One function per subcommand, each producing a [`RunReport`].

use clap::{Args, ValueEnum};
use kq_core::bergman::{
    self, balanced_certify, balanced_setup, closed_target, generating_identity_check, BalancedPart, ClosedBranch,
    PsiSource,
};
use kq_core::curvature::{classify_check, curvature_report, polyquad_closed, CurvatureReport};
use kq_core::oracle::{cp1_bergman_oracle, hartogs_gram_oracle, GramOracleConfig};
use kq_core::{BergmanError, Error, PsiMethod, QuantizationSetup, SeriesOptions};
use serde_json::{Map, Value};

use crate::report::{num, RunReport, Verdict};
use crate::setup::{SetupArgs, SetupDoc, SetupError};

/// Numerical flags every subcommand accepts.
#[derive(Debug, Clone, Args)]
pub struct Numerics {
    /// Verdict tolerance (default depends on the subcommand)
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Cap on series degrees
    #[arg(long, global = true)]
    pub max_k: Option<usize>,
    /// Quadrature nodes per axis
    #[arg(long, global = true)]
    pub quad_nodes: Option<usize>,
}

impl Numerics {
    fn series(&self, method: PsiMethod) -> SeriesOptions {
        let d = SeriesOptions::default();
        SeriesOptions {
            max_k: self.max_k.unwrap_or(d.max_k),
            quad_nodes: self.quad_nodes.unwrap_or(d.quad_nodes),
            method,
            ..d
        }
    }

    fn echo(&self, into: &mut Map<String, Value>, tol: f64) {
        into.insert("tol".into(), num(tol));
        into.insert("max_k".into(), self.max_k.map_or(Value::Null, Value::from));
        into.insert("quad_nodes".into(), self.quad_nodes.map_or(Value::Null, Value::from));
    }
}

/// `start:stop:count`, inclusive at both ends.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid(pub Vec<f64>);

impl std::str::FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let [a, b, n] = parts[..] else {
            return Err(format!("grid '{s}' is not start:stop:count"));
        };
        let (a, b): (f64, f64) = (
            a.trim().parse().map_err(|_| format!("bad grid start '{a}'"))?,
            b.trim().parse().map_err(|_| format!("bad grid stop '{b}'"))?,
        );
        let n: usize = n.trim().parse().map_err(|_| format!("bad grid count '{n}'"))?;
        if n == 0 || !a.is_finite() || !b.is_finite() {
            return Err(format!("grid '{s}' is empty or not finite"));
        }
        if n == 1 {
            return Ok(Grid(vec![a]));
        }
        let step = (b - a) / (n - 1) as f64;
        Ok(Grid(
            (0..n)
                .map(|i| if i == n - 1 { b } else { a + step * i as f64 })
                .collect(),
        ))
    }
}

fn grid_or(g: &Option<Grid>, a: f64, b: f64, n: usize) -> Vec<f64> {
    match g {
        Some(g) => g.0.clone(),
        None => format!("{a}:{b}:{n}").parse::<Grid>().expect("default grid").0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Quadrature,
    Closed,
}

impl MethodArg {
    fn method(self) -> PsiMethod {
        match self {
            MethodArg::Quadrature => PsiMethod::Quadrature,
            MethodArg::Closed => PsiMethod::Closed,
        }
    }

    fn label(self) -> &'static str {
        match self {
            MethodArg::Quadrature => "quadrature",
            MethodArg::Closed => "closed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PsiMethodArg {
    /// Quadrature values, checked against the closed forms
    Both,
    Quadrature,
    Closed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Quantity {
    A1,
    A2,
    K,
    Ric2,
    Lapk,
    Riem2,
}

impl Quantity {
    fn of(self, r: &CurvatureReport) -> f64 {
        match self {
            Quantity::A1 => r.a1,
            Quantity::A2 => r.a2,
            Quantity::K => r.k,
            Quantity::Ric2 => r.ric2,
            Quantity::Lapk => r.lapk,
            Quantity::Riem2 => r.riem2,
        }
    }

    fn label(self) -> &'static str {
        match self {
            Quantity::A1 => "a1",
            Quantity::A2 => "a2",
            Quantity::K => "k",
            Quantity::Ric2 => "ric2",
            Quantity::Lapk => "lapk",
            Quantity::Riem2 => "riem2",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PartArg {
    Ball,
    Total,
}

impl PartArg {
    fn part(self) -> BalancedPart {
        match self {
            PartArg::Ball => BalancedPart::BallBundle,
            PartArg::Total => BalancedPart::TotalSpace,
        }
    }

    fn label(self) -> &'static str {
        match self {
            PartArg::Ball => "ball",
            PartArg::Total => "total",
        }
    }
}

/// A failure before a verdict could be reached.
#[derive(Debug)]
pub enum Failure {
    Input(String),
    Numerical(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Input(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Failure::Input(_) => "invalid_input",
            Failure::Numerical(_) => "non_convergence",
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Input(m) | Failure::Numerical(m) => m,
        }
    }
}

impl<E: Into<Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        let e: Error = e.into();
        match e.class() {
            kq_core::ErrorClass::Input => Failure::Input(e.to_string()),
            kq_core::ErrorClass::Numerical => Failure::Numerical(e.to_string()),
        }
    }
}

impl From<SetupError> for Failure {
    fn from(e: SetupError) -> Self {
        match e {
            SetupError::Invalid(m) => Failure::Input(m),
            SetupError::Core(e) => e.into(),
        }
    }
}

/// The resolved setup: from `--setup` when given, otherwise from flags.
pub struct Resolved {
    pub doc: SetupDoc,
    pub setup: QuantizationSetup,
}

pub fn resolve(args: &SetupArgs, file: Option<&std::path::Path>) -> Result<Resolved, Failure> {
    let doc = match file {
        Some(p) => SetupDoc::load(p)?,
        None => args.resolve()?,
    };
    let setup = doc.build()?;
    Ok(Resolved { doc, setup })
}

fn echo(command: &str, r: Option<&Resolved>, nums: &Numerics, tol: f64) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("command".into(), command.into());
    if let Some(r) = r {
        m.insert(
            "quantization".into(),
            serde_json::to_value(&r.doc).expect("setup is plain data"),
        );
    }
    nums.echo(&mut m, tol);
    m
}

fn closed_label(b: ClosedBranch) -> &'static str {
    match b {
        ClosedBranch::BallD1 { .. } => "ball-d1",
        ClosedBranch::BallHigher => "ball-higher",
        ClosedBranch::Linear { .. } => "linear",
        ClosedBranch::Projective { .. } => "projective",
    }
}

fn rel(a: f64, reference: f64) -> f64 {
    (a - reference).abs() / reference.abs().max(1.0)
}

fn x_to_t(s: &QuantizationSetup, xs: &[f64]) -> Result<Vec<f64>, Failure> {
    xs.iter().map(|&x| s.profile.t_at_x(x).map_err(Failure::from)).collect()
}

#[derive(Debug, Clone, Args)]
pub struct CoeffsArgs {
    #[command(flatten)]
    pub setup: SetupArgs,
    /// Fibre moment-map grid x (default 0.01:4:32, clipped to the domain)
    #[arg(long, allow_hyphen_values = true)]
    pub grid: Option<Grid>,
    /// Quantity written to the rows
    #[arg(long, value_enum, default_value = "a2")]
    pub quantity: Quantity,
}

/// Curvature rows over x, with each point cross-checked against an
/// independent route: the closed `a1` (and `a2` on `A = λ`), otherwise the
/// invariant assembly of `a2`.
pub fn coeffs(a: &CoeffsArgs, file: Option<&std::path::Path>, nums: &Numerics) -> Result<RunReport, Failure> {
    let tol = nums.tol.unwrap_or(1e-9);
    let r = resolve(&a.setup, file)?;
    let s = &r.setup;
    let xs = grid_or(&a.grid, 0.01, r.doc.default_x_top(), 32);
    let ts = x_to_t(s, &xs)?;
    let a_coef = s.profile.quadratic_coefficient();
    let (mut rows, mut dev) = (Vec::with_capacity(xs.len()), 0.0f64);
    for (&x, &t) in xs.iter().zip(&ts) {
        let rep = curvature_report(&s.base, &s.profile, s.d0, t)?;
        let mut d = rel(rep.a2, rep.a2_from_invariants());
        if let Some(ac) = a_coef {
            let closed = polyquad_closed(&s.base, s.d0, s.lambda(), ac, x);
            d = d.max(rel(rep.a1, closed.a1));
            if let Some(a2) = closed.a2 {
                d = d.max(rel(rep.a2, a2));
            }
        }
        dev = dev.max(d);
        rows.push((x, a.quantity.of(&rep)));
    }
    let mut setup = echo("coeffs", Some(&r), nums, tol);
    setup.insert("quantity".into(), a.quantity.label().into());
    Ok(RunReport::new(setup, rows, Verdict::from_check(dev, tol)).deviation(dev))
}

#[derive(Debug, Clone, Args)]
pub struct ClassifyArgs {
    #[command(flatten)]
    pub setup: SetupArgs,
    /// Fibre moment-map grid x, at least 8 points (default 0.01:4:32)
    #[arg(long, allow_hyphen_values = true)]
    pub grid: Option<Grid>,
    /// Quantity written to the rows
    #[arg(long, value_enum, default_value = "a2")]
    pub quantity: Quantity,
}

/// Passes when `a1` and `a2` are constant on the grid and, if a branch
/// matched, equal its predicted constants.
pub fn classify(a: &ClassifyArgs, file: Option<&std::path::Path>, nums: &Numerics) -> Result<RunReport, Failure> {
    let tol = nums.tol.unwrap_or(1e-8);
    let r = resolve(&a.setup, file)?;
    let s = &r.setup;
    let xs = grid_or(&a.grid, 0.01, r.doc.default_x_top(), 32);
    let ts = x_to_t(s, &xs)?;
    let v = classify_check(&s.base, &s.profile, s.d0, s.domain, &ts)?;
    let rows = xs
        .iter()
        .zip(&v.reports)
        .map(|(&x, rep)| (x, a.quantity.of(rep)))
        .collect();
    let on_branch = v.branch_deviation.is_none_or(|d| d <= tol);
    let verdict = if v.constant && on_branch {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    let target = match (a.quantity, v.matched_branch, s.profile.quadratic_coefficient()) {
        (Quantity::A1 | Quantity::A2, Some(_), Some(ac)) => {
            let (e1, e2) = kq_core::curvature::branch_constants(s.n(), ac);
            Some(if a.quantity == Quantity::A1 { e1 } else { e2 })
        }
        _ => None,
    };
    let mut setup = echo("classify", Some(&r), nums, tol);
    setup.insert("quantity".into(), a.quantity.label().into());
    let riem = v.riem_minus_4ric.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    Ok(RunReport::new(setup, rows, verdict)
        .deviation(v.max_deviation)
        .target(target)
        .branch(v.matched_branch.map(|b| b.label()))
        .extra("constant", v.constant.into())
        .extra("a1_mean", num(v.a1_value))
        .extra("a2_mean", num(v.a2_value))
        .extra("branch_deviation", v.branch_deviation.map_or(Value::Null, num))
        .extra("max_abs_riem2_minus_4ric2", num(riem))
        .extra("ricci_form_holds", v.ricci.map_or(Value::Null, |c| c.holds.into())))
}

#[derive(Debug, Clone, Args)]
pub struct PsiArgs {
    #[command(flatten)]
    pub setup: SetupArgs,
    /// Largest fibre degree
    #[arg(long, default_value_t = 20)]
    pub k_max: usize,
    /// Moment route
    #[arg(long, value_enum, default_value = "both")]
    pub method: PsiMethodArg,
}

/// `ψ(α,k)` for `k ≤ k_max`; with `both`, quadrature rows checked against
/// the closed forms.
pub fn psi(a: &PsiArgs, file: Option<&std::path::Path>, nums: &Numerics) -> Result<RunReport, Failure> {
    let tol = nums.tol.unwrap_or(1e-10);
    let r = resolve(&a.setup, file)?;
    let s = &r.setup;
    s.validate()?;
    let nodes = nums.quad_nodes.unwrap_or(SeriesOptions::default().quad_nodes);
    let primary = match a.method {
        PsiMethodArg::Closed => PsiMethod::Closed,
        _ => PsiMethod::Quadrature,
    };
    let mut src = PsiSource::new(s, primary, nodes)?;
    let ks: Vec<usize> = (0..=a.k_max).filter(|&k| s.includes_degree(k)).collect();
    let rows = ks
        .iter()
        .map(|&k| Ok((k as f64, src.psi(k)?)))
        .collect::<Result<Vec<(f64, f64)>, BergmanError>>()?;
    let mut setup = echo("psi", Some(&r), nums, tol);
    setup.insert("k_max".into(), a.k_max.into());
    let method = match a.method {
        PsiMethodArg::Both => "both",
        PsiMethodArg::Quadrature => "quadrature",
        PsiMethodArg::Closed => "closed",
    };
    setup.insert("method".into(), method.into());
    let branch = bergman::closed_branch(s).ok().map(closed_label);
    if a.method != PsiMethodArg::Both {
        return Ok(RunReport::new(setup, rows, Verdict::Pass).branch(branch));
    }
    let mut closed = match PsiSource::new(s, PsiMethod::Closed, nodes) {
        Ok(c) => c,
        Err(BergmanError::BranchInvalid(why)) => {
            return Ok(RunReport::new(setup, rows, Verdict::Inconclusive).extra("closed_unavailable", why.into()));
        }
        Err(e) => return Err(e.into()),
    };
    let mut dev = 0.0f64;
    for &(k, q) in &rows {
        let c = closed.psi(k as usize)?;
        dev = dev.max((q - c).abs() / c.abs());
    }
    Ok(RunReport::new(setup, rows, Verdict::from_check(dev, tol))
        .deviation(dev)
        .branch(branch))
}

#[derive(Debug, Clone, Args)]
pub struct BergmanArgs {
    #[command(flatten)]
    pub setup: SetupArgs,
    /// Fibre grid ρ (default 0:0.9:10)
    #[arg(long, allow_hyphen_values = true)]
    pub grid: Option<Grid>,
    /// Moment route
    #[arg(long, value_enum, default_value = "quadrature")]
    pub method: MethodArg,
}

/// `ε(ρ)` on a grid. Against the closed target when the setup is on a
/// branch, otherwise the verdict tests constancy through the grid spread.
pub fn bergman(a: &BergmanArgs, file: Option<&std::path::Path>, nums: &Numerics) -> Result<RunReport, Failure> {
    let tol = nums.tol.unwrap_or(1e-8);
    let r = resolve(&a.setup, file)?;
    let s = &r.setup;
    s.validate()?;
    let rhos = grid_or(&a.grid, 0.0, 0.9, 10);
    let values = bergman::bergman_series_grid(s, &rhos, &nums.series(a.method.method()))?;
    let rows: Vec<(f64, f64)> = values.iter().map(|v| (v.rho, v.value)).collect();
    let (lo, hi) = rows
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(_, v)| {
            (lo.min(v), hi.max(v))
        });
    let spread = hi - lo;
    let target = closed_target(s).ok();
    let dev = match &target {
        Some(t) => rows.iter().map(|&(_, v)| (v - t.value).abs()).fold(0.0, f64::max),
        None => spread,
    };
    let mut setup = echo("bergman", Some(&r), nums, tol);
    setup.insert("method".into(), a.method.label().into());
    Ok(RunReport::new(setup, rows, Verdict::from_check(dev, tol))
        .deviation(dev)
        .target(target.map(|t| t.value))
        .branch(target.map(|t| closed_label(t.branch)))
        .extra("spread", num(spread))
        .extra("max_terms", values.iter().map(|v| v.terms).max().unwrap_or(0).into())
        .extra("max_tail", num(values.iter().map(|v| v.tail).fold(0.0, f64::max))))
}

#[derive(Debug, Clone, Args)]
pub struct IdentityArgs {
    #[command(flatten)]
    pub setup: SetupArgs,
    /// Fibre grid ρ (default 0:0.9:10)
    #[arg(long, allow_hyphen_values = true)]
    pub grid: Option<Grid>,
    /// Moment route
    #[arg(long, value_enum, default_value = "quadrature")]
    pub method: MethodArg,
}

/// The assembled generating series (rows) against its closed sum.
pub fn identity(a: &IdentityArgs, file: Option<&std::path::Path>, nums: &Numerics) -> Result<RunReport, Failure> {
    let tol = nums.tol.unwrap_or(1e-8);
    let r = resolve(&a.setup, file)?;
    let s = &r.setup;
    s.validate()?;
    let rhos = grid_or(&a.grid, 0.0, 0.9, 10);
    let rep = generating_identity_check(s, &rhos, &nums.series(a.method.method()))?;
    let rows = rep.rows.iter().map(|&(p, lhs, _)| (p, lhs)).collect();
    let dev = rep.max_deviation.max(rep.binomial_deviation.unwrap_or(0.0));
    let mut setup = echo("identity", Some(&r), nums, tol);
    setup.insert("method".into(), a.method.label().into());
    let closed: Vec<Value> = rep.rows.iter().map(|&(_, _, rhs)| num(rhs)).collect();
    Ok(RunReport::new(setup, rows, Verdict::from_check(dev, tol))
        .deviation(dev)
        .branch(bergman::closed_branch(s).ok().map(closed_label))
        .extra("closed_sum", Value::Array(closed))
        .extra("binomial_deviation", rep.binomial_deviation.map_or(Value::Null, num)))
}

#[derive(Debug, Clone, Args)]
pub struct BalancedArgs {
    /// Degree of the CP¹ base
    #[arg(long)]
    pub k: u32,
    /// Rank of the bundle
    #[arg(long)]
    pub r: u32,
    /// Quantization level
    #[arg(long, default_value_t = 1)]
    pub m: u32,
    /// Disc bundle or total space of O(−1)
    #[arg(long, value_enum, default_value = "ball")]
    pub part: PartArg,
    /// Scale of the linear profile (total space only)
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    /// Fibre grid ρ (default 0:0.9:10)
    #[arg(long, allow_hyphen_values = true)]
    pub grid: Option<Grid>,
    /// Moment route
    #[arg(long, value_enum, default_value = "quadrature")]
    pub method: MethodArg,
}

fn balanced_echo(
    command: &str,
    k: u32,
    r: u32,
    m: u32,
    part: PartArg,
    c: f64,
    nums: &Numerics,
    tol: f64,
) -> Map<String, Value> {
    let mut setup = echo(command, None, nums, tol);
    setup.insert("k".into(), k.into());
    setup.insert("r".into(), r.into());
    setup.insert("m".into(), m.into());
    setup.insert("part".into(), part.label().into());
    setup.insert("c".into(), num(c));
    setup
}

pub fn balanced(a: &BalancedArgs, nums: &Numerics) -> Result<RunReport, Failure> {
    let tol = nums.tol.unwrap_or(1e-8);
    let rhos = grid_or(&a.grid, 0.0, 0.9, 10);
    let v = balanced_certify(
        a.k,
        a.r,
        a.m,
        a.part.part(),
        a.c,
        &rhos,
        &nums.series(a.method.method()),
        tol,
    )?;
    let rows: Vec<(f64, f64)> = v.values.iter().map(|x| (x.rho, x.value)).collect();
    let mean = rows.iter().map(|r| r.1).sum::<f64>() / rows.len().max(1) as f64;
    let mut setup = balanced_echo("balanced", a.k, a.r, a.m, a.part, a.c, nums, tol);
    setup.insert("method".into(), a.method.label().into());
    let verdict = if v.balanced { Verdict::Pass } else { Verdict::Fail };
    let opt = |x: Option<f64>| x.map_or(Value::Null, num);
    Ok(RunReport::new(setup, rows, verdict)
        .deviation(v.max_deviation)
        .target(Some(v.target))
        .branch(Some(a.part.label()))
        .extra("value", num(mean))
        .extra("spread", num(v.spread))
        .extra("A", opt(v.a))
        .extra("mu", opt(v.mu))
        .extra("consistency_residual", opt(v.consistency_residual)))
}

#[derive(Debug, Clone, Args)]
pub struct Cp1Args {
    /// Degree of the Fubini–Study metric
    #[arg(long, default_value_t = 1)]
    pub k: u32,
    /// Quantization level
    #[arg(long, default_value_t = 1)]
    pub m: u32,
    /// Affine-chart grid |z| (default 0:3:7)
    #[arg(long, allow_hyphen_values = true)]
    pub grid: Option<Grid>,
}

pub fn oracle_cp1(a: &Cp1Args, nums: &Numerics) -> Result<RunReport, Failure> {
    let tol = nums.tol.unwrap_or(1e-6);
    let zs = grid_or(&a.grid, 0.0, 3.0, 7);
    let rep = cp1_bergman_oracle(a.k, a.m, &zs)?;
    let mut setup = echo("oracle-cp1", None, nums, tol);
    setup.insert("k".into(), a.k.into());
    setup.insert("m".into(), a.m.into());
    Ok(
        RunReport::new(setup, rep.values, Verdict::from_check(rep.max_deviation, tol))
            .deviation(rep.max_deviation)
            .target(Some(rep.target))
            .extra("spread", num(rep.spread)),
    )
}

#[derive(Debug, Clone, Args)]
pub struct HartogsArgs {
    /// Degree of the CP¹ base
    #[arg(long, default_value_t = 2)]
    pub k: u32,
    /// Quantization level
    #[arg(long, default_value_t = 1)]
    pub m: u32,
    /// Disc bundle or total space of O(−1)
    #[arg(long, value_enum, default_value = "ball")]
    pub part: PartArg,
    /// Scale of the linear profile (total space only)
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    /// Base coordinate s = |z|² shared by the sample points
    #[arg(long, default_value_t = 0.5)]
    pub s: f64,
    /// Fibre grid ρ (default 0.1:0.5:3)
    #[arg(long, allow_hyphen_values = true)]
    pub grid: Option<Grid>,
    /// Fibre-degree truncation Q
    #[arg(long, default_value_t = 40)]
    pub q_cap: usize,
    /// Base-degree truncation P (default (m+Q)k+8)
    #[arg(long)]
    pub p_cap: Option<usize>,
    /// Relative truncation tail allowed
    #[arg(long, default_value_t = 1e-4)]
    pub tail_tol: f64,
}

/// Brute-force Gram oracle on the two-dimensional Hartogs model.
pub fn oracle_hartogs(a: &HartogsArgs, nums: &Numerics) -> Result<RunReport, Failure> {
    let tol = nums.tol.unwrap_or(1e-3);
    let s = balanced_setup(a.k, 1, a.m as f64, a.part.part(), a.c)?;
    let rhos = grid_or(&a.grid, 0.1, 0.5, 3);
    let mut cfg = GramOracleConfig::new(a.k, a.m, rhos.iter().map(|&rho| (a.s, rho)).collect());
    cfg.q_cap = a.q_cap;
    cfg.p_cap = a.p_cap;
    cfg.tail_tol = a.tail_tol;
    if let Some(n) = nums.quad_nodes {
        cfg.s_nodes = n;
        cfg.v_nodes = n;
    }
    let rep = hartogs_gram_oracle(&cfg, &s)?;
    let rows = rep.points.iter().map(|p| (p.rho, p.value)).collect();
    let mut setup = balanced_echo("oracle-hartogs", a.k, 1, a.m, a.part, a.c, nums, tol);
    setup.insert("s".into(), num(a.s));
    setup.insert("q_cap".into(), a.q_cap.into());
    setup.insert("p_cap".into(), cfg.p_cap().into());
    setup.insert("tail_tol".into(), num(a.tail_tol));
    let verdict = rep
        .max_deviation
        .map_or(Verdict::Inconclusive, |d| Verdict::from_check(d, tol));
    Ok(RunReport::new(setup, rows, verdict)
        .deviation(rep.max_deviation.unwrap_or(f64::NAN))
        .target(rep.target)
        .branch(Some(a.part.label()))
        .extra("max_tail", num(rep.max_tail))
        .extra("basis_size", rep.basis_size.into()))
}
