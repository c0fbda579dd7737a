//! `randnet`: consensus verdicts, simulations and mode estimates for random linear
//! networks described by a JSON config.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use commands::Failure;

#[derive(Debug, Parser)]
#[command(
    name = "randnet",
    version,
    about = "Consensus analysis for random stochastic-matrix networks"
)]
pub struct Cli {
    /// JSON config with the matrix distribution and optional simulation defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Master seed; overrides `simulation.seed` in the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output directory for result files and the run manifest.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,

    /// Worker threads for path simulation. Results do not depend on this.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Spectral consensus verdict on the expected update matrix.
    Verdict(VerdictArgs),
    /// Simulate paths and write per-path and aggregate diameter series.
    Simulate(SimArgs),
    /// Classify the three convergence modes and cross-check the spectral verdict.
    Modes(ModesArgs),
    /// Verdict for a single fixed matrix.
    Deterministic(DeterministicArgs),
    /// Lift a second-order recursion to a first-order config of twice the dimension.
    Lift(LiftArgs),
    /// Run the built-in property batteries.
    Selfcheck(SelfcheckArgs),
}

#[derive(Debug, Args)]
pub struct VerdictArgs {
    /// Monte Carlo draws when the expectation cannot be enumerated.
    #[arg(long, default_value_t = randnet_core::analysis::DEFAULT_MC_SAMPLES)]
    pub mc_samples: usize,
}

#[derive(Debug, Args)]
pub struct SimArgs {
    #[arg(long)]
    pub paths: Option<usize>,
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long)]
    pub eps: Option<f64>,
    /// `uniform01` or a JSON array such as `[1,0,0]`.
    #[arg(long)]
    pub x0: Option<String>,
}

#[derive(Debug, Args)]
pub struct ModesArgs {
    #[command(flatten)]
    pub sim: SimArgs,
    /// Moment order for the L^p mode.
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long, default_value_t = randnet_core::analysis::DEFAULT_MC_SAMPLES)]
    pub mc_samples: usize,
}

#[derive(Debug, Args)]
pub struct DeterministicArgs {
    /// Row-major JSON matrix, e.g. `[[0.5,0.5],[0.5,0.5]]`; otherwise a dirac config.
    #[arg(long)]
    pub matrix: Option<String>,
    /// Half-width of the marginal band around 1.
    #[arg(long, default_value_t = randnet_core::spectral::DEFAULT_VERDICT_TOL)]
    pub tol: f64,
}

#[derive(Debug, Args)]
pub struct LiftArgs {
    /// Config for the law of the first-lag matrix.
    #[arg(long, required_unless_present = "inputs")]
    pub config_a: Option<PathBuf>,
    /// Config for the law of the second-lag matrix.
    #[arg(long, required_unless_present = "inputs")]
    pub config_b: Option<PathBuf>,
    /// Weight on the first lag; the second gets `1 - alpha`.
    #[arg(long)]
    pub alpha: f64,
    /// The two configs given positionally.
    #[arg(num_args = 2, conflicts_with_all = ["config_a", "config_b"])]
    pub inputs: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SelfcheckArgs {
    #[arg(long, default_value_t = 16)]
    pub n_max: usize,
    #[arg(long, default_value_t = 50)]
    pub trials: usize,
    #[arg(long, hide = true, value_enum)]
    pub inject_fault: Option<InjectedFault>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum InjectedFault {
    RowSum,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: cannot configure {threads} worker threads: {e}");
            return ExitCode::from(2);
        }
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure { code, message }) => {
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
    }
}
