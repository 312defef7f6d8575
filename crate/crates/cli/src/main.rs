//! `softmax-stability`: certify, simulate and reproduce experiments for
//! affine softmax feedback systems.
//!
//! Exit codes: 0 on success, 1 on bad input, 2 when a run does not converge.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use softmax_stability::instances::RandomKind;

#[derive(Debug, Parser)]
#[command(name = "softmax-stability", version, about = "Stability certificates for affine softmax feedback systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compute every certificate for a system file and emit a JSON report.
    Certify {
        #[arg(long)]
        system: PathBuf,
        /// Write the report here instead of stdout.
        #[arg(long)]
        json_out: Option<PathBuf>,
    },
    /// Run Picard iteration or the logit ODE and write the trajectory CSV.
    Simulate(SimulateArgs),
    /// Fixed points of the two-action model over a β grid.
    Pitchfork {
        #[arg(long, default_value_t = 0.1)]
        beta_min: f64,
        #[arg(long, default_value_t = 4.0)]
        beta_max: f64,
        /// Number of grid intervals (grid has steps + 1 points).
        #[arg(long, default_value_t = 78)]
        steps: usize,
        /// Bisection bracket width for the nonzero roots.
        #[arg(long, default_value_t = 1e-15)]
        tol: f64,
        #[arg(long)]
        csv_out: Option<PathBuf>,
    },
    /// Euclidean and Dobrushin certificates of the Hadamard block family.
    Separation {
        #[arg(long = "max-blocks", default_value_t = 32)]
        max_blocks: usize,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long)]
        csv_out: Option<PathBuf>,
    },
    /// Certified-range gain over seeded random draws.
    Gain {
        #[arg(long, default_value_t = 32)]
        n: usize,
        #[arg(long, default_value_t = 200)]
        draws: usize,
        /// Comma-separated subset of gaussian, gaussian_symmetric, shifted, shifted_symmetric.
        #[arg(long, value_delimiter = ',', value_parser = parse_kind, default_value = "gaussian,gaussian_symmetric,shifted,shifted_symmetric")]
        kinds: Vec<RandomKind>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        csv_out: Option<PathBuf>,
    },
    /// Multi-start Picard collapse at β strictly between the two thresholds.
    NewlyCertified(NewlyCertifiedArgs),
    /// Write a system JSON file for a named or random instance.
    Generate {
        #[command(subcommand)]
        instance: Instance,
        #[arg(long, global = true)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Picard,
    Ode,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    system: PathBuf,
    #[arg(long, value_enum, default_value_t = Mode::Picard)]
    mode: Mode,
    /// `uniform`, `dirichlet:<seed>`, an inline JSON array, or a JSON file.
    /// Arrays are either flat or nested per block.
    #[arg(long, default_value = "uniform")]
    start: String,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 10_000)]
    max_iter: usize,
    #[arg(long, default_value_t = 50.0)]
    t_end: f64,
    #[arg(long, default_value_t = 0.01)]
    dt: f64,
    #[arg(long)]
    csv_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct NewlyCertifiedArgs {
    #[arg(long, default_value_t = 12)]
    instances: usize,
    #[arg(long, default_value_t = 20)]
    n: usize,
    #[arg(long, default_value_t = 10)]
    starts: usize,
    #[arg(long, default_value_t = 0.72)]
    beta_frac: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 200)]
    max_iter: usize,
    /// Collapse stops once the diameter reaches this value.
    #[arg(long, default_value_t = 1e-14)]
    tol: f64,
    /// The run fails (exit 2) unless every diameter drops below this.
    #[arg(long, default_value_t = 1e-10)]
    target: f64,
    /// Shift standard deviation relative to the Gaussian scale.
    #[arg(long, default_value_t = 3.0)]
    shift_rel: f64,
    #[arg(long, default_value_t = 1.0)]
    bias_std: f64,
    /// Diameter series CSV (instance, step, diameter).
    #[arg(long)]
    csv_out: Option<PathBuf>,
    /// Defaults to `<csv-out stem>_thresholds.csv`.
    #[arg(long)]
    thresholds_out: Option<PathBuf>,
    /// Run metadata JSON; defaults to `<csv-out stem>_meta.json`.
    #[arg(long)]
    meta_out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Instance {
    /// Two-action model W = [[0, −1], [−1, 0]].
    Pitchfork {
        #[arg(long)]
        beta: f64,
    },
    /// m binary blocks coupled through a Sylvester–Hadamard sign pattern.
    Hadamard {
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
    },
    /// m binary blocks with rank-one couplings above the block diagonal.
    UpperTriangular {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        c: f64,
    },
    /// All-zero interaction and bias.
    Zero {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
    },
    /// Seeded random single-block instance.
    Random {
        #[arg(long, value_parser = parse_kind)]
        kind: RandomKind,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        stream: u64,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        #[arg(long, default_value_t = 0.0)]
        bias_std: f64,
        #[arg(long, default_value_t = 3.0)]
        shift_rel: f64,
    },
}

fn parse_kind(s: &str) -> Result<RandomKind, String> {
    s.parse().map_err(|e: softmax_stability::Error| e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(cli.command) {
        Ok(commands::Status::Done) => ExitCode::SUCCESS,
        Ok(commands::Status::NotConverged(msg)) => {
            eprintln!("not converged: {msg}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
