use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use apcones::experiment::{
    cmd_concentrate, cmd_q_curve, cmd_selftest, cmd_solve, cmd_verify_inequality, ConeSource, VerifyOptions,
};
use apcones::inequality::Family;
use apcones::report::RunReport;
use apcones::solver::BoundarySpec;
use apcones::{Error, Result};

const USAGE_EXIT: u8 = 2;

/// Numerical checks of the Alt-Phillips cone classification.
#[derive(Debug, Parser)]
#[command(name = "apcones", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the built-in consistency checks.
    Selftest(OutArgs),
    /// Check the sphere inequality on random parabola cones.
    VerifyInequality(VerifyArgs),
    /// Tabulate q(t) and its second derivative along p_t.
    QCurve(QCurveArgs),
    /// Minimize the energy on the unit ball with cone boundary data.
    Solve(SolveArgs),
    /// Measure the distance to symmetric cones as gamma approaches 1.
    Concentrate(ConcentrateArgs),
}

#[derive(Debug, Args)]
struct OutArgs {
    /// CSV destination; stdout when absent. The summary is also written to PATH.summary.json.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// Sphere dimension d (2..=5).
    #[arg(long, default_value_t = 3)]
    dim: usize,
    /// Number of random cones.
    #[arg(long, default_value_t = 1000)]
    samples: u64,
    /// Coarse rule level; the error estimate pairs it with twice the level.
    #[arg(long, default_value_t = 32)]
    level: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// interior, boundary or near_symmetric.
    #[arg(long, default_value = "interior")]
    family: Family,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args)]
struct QCurveArgs {
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// Cone as parabola:l1,..,ld or symmetric:k; overrides --seed.
    #[arg(long)]
    boundary: Option<BoundarySpec>,
    /// Draw the cone at random from this seed instead.
    #[arg(long)]
    seed: Option<u64>,
    /// Family of the random cone.
    #[arg(long, default_value = "interior")]
    family: Family,
    #[arg(long, default_value_t = 32)]
    level: usize,
    /// Number of scan points in (0, t_bar).
    #[arg(long, default_value_t = 33)]
    t_points: usize,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args)]
struct SolveArgs {
    /// Grid dimension (1..=3).
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    /// Nodes per axis (odd).
    #[arg(long, default_value_t = 201)]
    n: usize,
    /// flat[:e], parabola:l1,..,ld or symmetric:k.
    #[arg(long, default_value = "flat")]
    boundary: BoundarySpec,
    /// Field dump destination; the diagnostics row goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ConcentrateArgs {
    /// Grid dimension (2 or 3).
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// Comma-separated exponents, none equal to 1.
    #[arg(long, value_delimiter = ',', default_value = "0.7,0.85,0.95")]
    gammas: Vec<f64>,
    #[arg(long, default_value_t = 201)]
    n: usize,
    #[arg(long, default_value = "parabola:0.75,0.25")]
    boundary: BoundarySpec,
    #[command(flatten)]
    out: OutArgs,
}

fn summary_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".summary.json");
    PathBuf::from(name)
}

fn emit(report: &RunReport, csv_out: Option<&Path>, summary_next_to: Option<&Path>) -> Result<()> {
    match csv_out {
        Some(path) => report.write_csv(File::create(path)?)?,
        None => report.write_csv(io::stdout().lock())?,
    }
    let summary = report.summary_json();
    if let Some(path) = summary_next_to {
        let mut f = File::create(summary_path(path))?;
        writeln!(f, "{summary}")?;
    }
    let mut err = io::stderr().lock();
    writeln!(err, "{summary}")?;
    for check in report.failed_checks() {
        writeln!(err, "FAILED {}: {}", check.name, check.detail)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<RunReport> {
    match cli.command {
        Command::Selftest(args) => {
            let report = cmd_selftest();
            emit(&report, args.out.as_deref(), args.out.as_deref())?;
            Ok(report)
        }
        Command::VerifyInequality(args) => {
            let report = cmd_verify_inequality(&VerifyOptions {
                dim: args.dim,
                samples: args.samples,
                level: args.level,
                seed: args.seed,
                family: args.family,
            })?;
            emit(&report, args.out.out.as_deref(), args.out.out.as_deref())?;
            Ok(report)
        }
        Command::QCurve(args) => {
            let source = match (args.boundary, args.seed) {
                (Some(spec), _) => ConeSource::Spec(spec),
                (None, Some(seed)) => ConeSource::Random {
                    seed,
                    family: args.family,
                },
                (None, None) => {
                    return Err(Error::InvalidConfig("q-curve needs --boundary or --seed".into()));
                }
            };
            let report = cmd_q_curve(args.dim, &source, args.level, args.t_points)?;
            emit(&report, args.out.out.as_deref(), args.out.out.as_deref())?;
            Ok(report)
        }
        Command::Solve(args) => {
            let (report, field) = cmd_solve(args.dim, args.gamma, args.n, &args.boundary)?;
            if let Some(path) = &args.out {
                field.save(path, args.gamma)?;
            }
            emit(&report, None, args.out.as_deref())?;
            Ok(report)
        }
        Command::Concentrate(args) => {
            let report = cmd_concentrate(args.dim, &args.gammas, args.n, &args.boundary)?;
            emit(&report, args.out.out.as_deref(), args.out.out.as_deref())?;
            Ok(report)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(report) => ExitCode::from(report.outcome().exit_code() as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { USAGE_EXIT } else { 1 })
        }
    }
}
