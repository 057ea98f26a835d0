//! Command-line driver: convergence runs, rate fits, and the
//! gradient-penalty sweep, all emitting the library's CSV schema.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cauchy_mfem::error::Result;
use cauchy_mfem::experiments::{self, Case, RunConfig, RunVariant, SweepConfig};
use cauchy_mfem::metrics;

#[derive(Parser)]
#[command(
    name = "cauchy-mfem",
    about = "Mixed finite element studies of the elliptic data-completion problem",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a benchmark over a refining mesh ladder and emit CSV.
    Run(RunArgs),
    /// Fit convergence rates from an existing results file.
    Rates(RatesArgs),
    /// Scan the gradient-penalty weight on one fixed mesh.
    SweepGamma(SweepArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Benchmark: hadamard1, hadamard2, or wellposed.
    #[arg(long, default_value = "hadamard1")]
    case: String,
    /// Mode number of the harmonic benchmark field.
    #[arg(long, default_value_t = 1)]
    n: usize,
    /// Polynomial order of the primal field (1 or 2).
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// infsup, wellbalanced, reduced, or defect.
    #[arg(long, default_value = "wellbalanced")]
    variant: String,
    /// Gradient-penalty weight.
    #[arg(long = "gamma-t", default_value_t = 1e-4)]
    gamma_t: f64,
    /// Relative noise amplitude on the flux datum.
    #[arg(long, default_value_t = 0.0)]
    delta: f64,
    /// Base grid and rung count, e.g. 12x4:5.
    #[arg(long, default_value = "12x4:5")]
    ladder: String,
    /// Noise seed.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// CSV destination; without it the CSV goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Rate-fit window for the printed summary.
    #[arg(long, default_value_t = 3)]
    window: usize,
}

#[derive(Args)]
struct RatesArgs {
    /// Results file written by `run`.
    csv: PathBuf,
    /// Number of finest meshes the fit uses.
    #[arg(long, default_value_t = 3)]
    window: usize,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, default_value = "hadamard1")]
    case: String,
    #[arg(long, default_value_t = 1)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long, default_value = "wellbalanced")]
    variant: String,
    #[arg(long, default_value_t = 0.0)]
    delta: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Fixed mesh, e.g. 240x80.
    #[arg(long, default_value = "240x80")]
    mesh: String,
    /// Comma-separated candidate weights (strictly increasing).
    #[arg(long)]
    gammas: Option<String>,
}

fn run(args: RunArgs) -> Result<()> {
    let config = RunConfig {
        case: Case::parse(&args.case)?,
        n: args.n,
        k: args.k,
        variant: RunVariant::parse(&args.variant)?,
        gamma_t: args.gamma_t,
        delta: args.delta,
        ladder: experiments::parse_ladder(&args.ladder)?,
        seed: args.seed,
        out: args.out.clone(),
    };
    let record = experiments::run_case(&config)?;
    match &args.out {
        Some(path) => {
            println!("wrote {} meshes to {}", record.reports.len(), path.display());
            if record.table.h.len() >= 2 {
                print!("rates over the last {} meshes:\n{}", args.window, record.rate_summary(args.window)?);
            }
        }
        None => {
            print!("{}", record.csv);
            if record.table.h.len() >= 2 {
                eprint!("rates over the last {} meshes:\n{}", args.window, record.rate_summary(args.window)?);
            }
        }
    }
    Ok(())
}

fn rates(args: RatesArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.csv)?;
    let table = experiments::read_csv_rates(&text)?;
    for (name, slope) in metrics::fit_rates(&table, args.window)? {
        println!("{name}: {slope:.3}");
    }
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<()> {
    let mesh = experiments::parse_ladder(&args.mesh)?[0];
    let mut cfg = SweepConfig::new(
        Case::parse(&args.case)?,
        args.n,
        args.k,
        RunVariant::parse(&args.variant)?,
    );
    cfg.delta = args.delta;
    cfg.seed = args.seed;
    cfg.nx = mesh.0;
    cfg.ny = mesh.1;
    if let Some(list) = &args.gammas {
        cfg.gammas = list
            .split(',')
            .map(|s| {
                s.trim().parse::<f64>().map_err(|_| {
                    cauchy_mfem::error::Error::Parse(format!("bad weight {s:?} in --gammas"))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
    }
    let report = experiments::sweep_gamma(&cfg)?;
    println!("gamma_T,rel_l2_global");
    for (g, e) in report.gammas.iter().zip(&report.errors) {
        println!("{g},{e}");
    }
    match report.first_increase {
        Some(g) => println!("# error first increases at gamma_T = {g}"),
        None => println!("# no error increase detected on this grid"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = e.print();
            return if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                ExitCode::SUCCESS
            } else {
                // Bad usage is a configuration problem.
                ExitCode::from(3)
            };
        }
    };
    let outcome = match cli.command {
        Command::Run(args) => run(args),
        Command::Rates(args) => rates(args),
        Command::SweepGamma(args) => sweep(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
