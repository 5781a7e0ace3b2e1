//! `frk`: evaluate resolvent kernels on p.c.f. fractals, export grids, run
//! verification suites and dump decimation sequences.

mod commands;
mod config;
mod output;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use config::{CliError, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "frk", version, about = "Resolvent kernels of the Laplacian on p.c.f. fractals")]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct CommonArgs {
    /// Preset (interval, sg, sg3) or path to a JSON spec file.
    #[arg(long, global = true, default_value = "interval")]
    pub fractal: String,
    /// Spectral parameter of (lambda - Laplacian)^{-1}.
    #[arg(long, global = true, default_value_t = 1.0, allow_hyphen_values = true)]
    pub lambda: f64,
    #[arg(long, global = true, value_enum, default_value_t = BcArg::Dirichlet)]
    pub bc: BcArg,
    /// Series depth M (longest word summed); chosen from --tol when absent.
    #[arg(long, global = true)]
    pub depth: Option<usize>,
    /// Quadrature / oracle level.
    #[arg(long, global = true)]
    pub quad: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Truncation tolerance for eval/grid; overrides check tolerances in verify.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Seed for sampled points and parameters.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum BcArg {
    Dirichlet,
    Neumann,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Symmetry,
    Boundary,
    Oracle,
    Crossscale,
    Tau,
    Detg,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Kernel value and truncation bound at one pair of points.
    Eval {
        /// `<word>:<k>` (1-based letters, 0-based k) or, on the interval, a real.
        #[arg(long)]
        x: String,
        #[arg(long)]
        y: String,
    },
    /// Kernel over a grid: interval points i/(N+1), or all of V_N on fractals.
    Grid {
        #[arg(long)]
        resolution: usize,
        /// Emit one row per partial sum S_0..S_M instead of the final value.
        #[arg(long)]
        partial_sums: bool,
    },
    /// Run invariant suites and print a JSON report.
    Verify {
        #[arg(long, value_enum, value_delimiter = ',', default_values_t = [Suite::Symmetry, Suite::Boundary, Suite::Crossscale])]
        suite: Vec<Suite>,
    },
    /// Spectral decimation tools.
    Spectrum {
        #[command(subcommand)]
        command: SpectrumCommand,
    },
    /// Validate or print a fractal spec.
    Spec {
        #[command(subcommand)]
        command: SpecCommand,
    },
}

#[derive(Subcommand, Debug)]
enum SpectrumCommand {
    /// Rows m, lambda_m, beta^m lambda_m realizing --lambda (decimation convention).
    Seq,
}

#[derive(Subcommand, Debug)]
enum SpecCommand {
    /// Validate; prints a one-line summary.
    Check {
        /// Preset or spec file; defaults to --fractal.
        fractal: Option<String>,
    },
    /// Print the fractal description as a JSON document.
    Show {
        fractal: Option<String>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = RunConfig::from_args(&cli.common)?;
    match cli.command {
        Command::Eval { x, y } => commands::eval(&cfg, &x, &y),
        Command::Grid { resolution, partial_sums } => commands::grid(&cfg, resolution, partial_sums),
        Command::Verify { suite } => verify::run(&cfg, &suite),
        Command::Spectrum { command: SpectrumCommand::Seq } => commands::spectrum_seq(&cfg),
        Command::Spec { command } => match command {
            SpecCommand::Check { fractal } => commands::spec_check(&cfg, fractal.as_deref()),
            SpecCommand::Show { fractal } => commands::spec_show(&cfg, fractal.as_deref()),
        },
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
