//! `kq`: run quantization checks and write deterministic reports.

mod commands;
mod report;
mod setup;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};

use commands::{
    BalancedArgs, BergmanArgs, ClassifyArgs, CoeffsArgs, Cp1Args, Failure, HartogsArgs, IdentityArgs, Numerics, PsiArgs,
};
use report::RunReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Output {
    Json,
    Csv,
}

#[derive(Parser)]
#[command(name = "kq")]
#[command(about = "Verification runs for regular quantizations of radial Kähler metrics")]
#[command(version)]
struct Cli {
    #[command(flatten)]
    numerics: Numerics,

    /// Report format
    #[arg(long, global = true, value_enum, default_value = "json")]
    output: Output,

    /// Write the report here instead of stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Load the quantization setup from a JSON document (overrides setup flags)
    #[arg(long, global = true)]
    setup: Option<PathBuf>,

    /// Add wall time to the summary (makes reports run-dependent)
    #[arg(long, global = true)]
    timing: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Curvature coefficients over the moment-map grid
    Coeffs(CoeffsArgs),
    /// Constancy of a1, a2 and the matching classification branch
    Classify(ClassifyArgs),
    /// Fibre moments ψ(α,k)
    Psi(PsiArgs),
    /// Bergman function ε(ρ) from the moment series
    Bergman(BergmanArgs),
    /// Generating-series identity on a branch
    Identity(IdentityArgs),
    /// Certify the explicit balanced metrics over CP¹
    Balanced(BalancedArgs),
    /// Gram-matrix oracle on CP¹
    OracleCp1(Cp1Args),
    /// Gram-matrix oracle on the two-dimensional Hartogs model
    OracleHartogs(HartogsArgs),
}

fn run(cli: &Cli) -> Result<RunReport, Failure> {
    let (file, nums) = (cli.setup.as_deref(), &cli.numerics);
    match &cli.command {
        Command::Coeffs(a) => commands::coeffs(a, file, nums),
        Command::Classify(a) => commands::classify(a, file, nums),
        Command::Psi(a) => commands::psi(a, file, nums),
        Command::Bergman(a) => commands::bergman(a, file, nums),
        Command::Identity(a) => commands::identity(a, file, nums),
        Command::Balanced(a) => commands::balanced(a, nums),
        Command::OracleCp1(a) => commands::oracle_cp1(a, nums),
        Command::OracleHartogs(a) => commands::oracle_hartogs(a, nums),
    }
}

fn configure_threads() {
    let Ok(raw) = std::env::var("KQ_THREADS") else { return };
    match raw.trim().parse::<usize>() {
        Ok(n) if n > 0 => {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
        _ => eprintln!("kq: ignoring KQ_THREADS={raw:?}"),
    }
}

fn emit(cli: &Cli, text: &str) -> std::io::Result<()> {
    match &cli.out {
        Some(path) => std::fs::write(path, text),
        None => std::io::stdout().lock().write_all(text.as_bytes()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_threads();
    let start = Instant::now();
    let result = run(&cli);
    let wall = cli.timing.then(|| start.elapsed().as_secs_f64());
    let (text, code) = match &result {
        Ok(rep) => {
            let text = match cli.output {
                Output::Json => rep.to_json(wall),
                Output::Csv => rep.to_csv(),
            };
            (text, rep.verdict.exit_code())
        }
        Err(f) => {
            eprintln!("kq: {}", f.message());
            (report::error_json(f.kind(), f.message()), f.exit_code())
        }
    };
    if let Err(e) = emit(&cli, &text) {
        eprintln!("kq: cannot write report: {e}");
        return ExitCode::from(2);
    }
    ExitCode::from(code)
}
