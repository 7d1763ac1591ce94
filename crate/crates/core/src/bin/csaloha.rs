use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Parser, ValueEnum};

use csaloha::cli::{self, ConfigSource, Mode, RunSpec};
use csaloha::density_evolution::{DEFAULT_MAX_ITER, DEFAULT_TOL};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    /// Run the and-or tree recursion on the configuration.
    Evolve,
    /// Optimize access constants over a range of M/N.
    Sweep,
    /// Monte Carlo SIC simulation at the configured parameters.
    Simulate,
    /// Optimize access constants at the configured M/N.
    Optimize,
    /// Print the configuration in config-file format.
    Dump,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Evolve => Mode::Evolve,
            ModeArg::Sweep => Mode::Sweep,
            ModeArg::Simulate => Mode::Simulate,
            ModeArg::Optimize => Mode::Optimize,
            ModeArg::Dump => Mode::Dump,
        }
    }
}

/// Coded slotted ALOHA analysis with per-class packet loss.
#[derive(Debug, Parser)]
#[command(name = "csaloha", version)]
#[command(group(ArgGroup::new("source").required(true).args(["config", "preset"])))]
struct Args {
    #[arg(long, value_enum)]
    mode: ModeArg,
    /// Configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in scenario: scenario1, scenario2 or scenario3.
    #[arg(long)]
    preset: Option<String>,
    /// Number of users in simulations.
    #[arg(long, default_value_t = 10_000)]
    n: usize,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = -0.5, allow_negative_numbers = true)]
    eps_min: f64,
    #[arg(long, default_value_t = 1.5, allow_negative_numbers = true)]
    eps_max: f64,
    #[arg(long, default_value_t = 41)]
    eps_steps: usize,
    #[arg(long, default_value_t = 8.0)]
    alpha_max: f64,
    #[arg(long, default_value_t = 0.1)]
    alpha_step: f64,
    /// Minimum probability of user resolution (optimize mode).
    #[arg(long)]
    target_pr: Option<f64>,
    /// Output file (CSV, or config text for dump).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
    max_iter: usize,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let source = match (args.config, args.preset) {
        (Some(path), _) => ConfigSource::File(path),
        (None, Some(name)) => ConfigSource::Preset(name),
        (None, None) => unreachable!("clap enforces the source group"),
    };
    let spec = RunSpec {
        n: args.n,
        trials: args.trials,
        seed: args.seed,
        eps_min: args.eps_min,
        eps_max: args.eps_max,
        eps_steps: args.eps_steps,
        alpha_max: args.alpha_max,
        alpha_step: args.alpha_step,
        target_pr: args.target_pr,
        out: args.out,
        max_iter: args.max_iter,
        tol: args.tol,
        ..RunSpec::new(args.mode.into(), source)
    };
    match cli::run(&spec) {
        Ok(summary) => {
            print!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
