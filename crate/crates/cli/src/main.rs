//! `windtree`: experiment runner for the periodic wind-tree billiard.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "windtree", version, about = "Periodic wind-tree billiard experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "WINDTREE_WORKERS")]
    workers: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check parameters and report constraint violations.
    Validate(ModelArgs),
    /// List open corridors.
    Corridors(CorridorArgs),
    /// Follow one orbit and print every collision.
    Trace(TraceArgs),
    /// Free-flight length histogram and power-law fits.
    Tail(TailArgs),
    /// Truncated second moment of the flight length against ln R.
    Moment(TailArgs),
    /// Flight-vector correlations along one orbit.
    Corr(CorrArgs),
    /// Mean-square displacement and growth-law selection.
    Msd(MsdArgs),
    /// Continuous-time rescaling and the mean free path.
    Ctime(CtimeArgs),
    /// Run the numbered checks and emit one JSON document.
    Report(ReportArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    Windtree,
    Disk,
}

#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    /// Named configuration: tail, canonical, finite, lorentz.
    #[arg(long, conflicts_with_all = ["theta_tan", "theta_rad", "a", "kind", "disk_radius"])]
    pub preset: Option<String>,
    /// tan θ as a rational m/n.
    #[arg(long, conflicts_with = "theta_rad")]
    pub theta_tan: Option<String>,
    /// θ in radians.
    #[arg(long)]
    pub theta_rad: Option<f64>,
    /// Rhombus side length.
    #[arg(long)]
    pub a: Option<f64>,
    /// Particle radius.
    #[arg(long)]
    pub r: Option<f64>,
    #[arg(long, value_enum)]
    pub kind: Option<Kind>,
    /// Disk radius for `--kind disk`.
    #[arg(long)]
    pub disk_radius: Option<f64>,
    /// Accept overlapping scatterers (orbits are then confined to a pocket).
    #[arg(long)]
    pub allow_overlap: bool,
}

#[derive(Args, Debug, Clone)]
pub struct OutputArgs {
    /// Write CSV here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Print a JSON summary on standard output.
    #[arg(long)]
    pub json: bool,
}

#[derive(Args, Debug)]
pub struct CorridorArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Largest direction component scanned.
    #[arg(long, default_value_t = 64)]
    pub max_denom: u64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct TraceArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Number of collisions.
    #[arg(long, default_value_t = 100)]
    pub n: u64,
    /// Seed of the Liouville-distributed start (ignored with --s/--phi).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Start arclength; needs --phi.
    #[arg(long, requires = "phi", allow_negative_numbers = true)]
    pub s: Option<f64>,
    /// Start reflection angle; needs --s.
    #[arg(long, requires = "s", allow_negative_numbers = true)]
    pub phi: Option<f64>,
    #[arg(long, default_value_t = 1e4)]
    pub max_len: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct TailArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Liouville samples.
    #[arg(long, default_value_t = 1_000_000)]
    pub n: u64,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e4)]
    pub max_len: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct CorrArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Orbit length in collisions.
    #[arg(long, default_value_t = 10_000_000)]
    pub m: u64,
    /// Largest lag.
    #[arg(long, default_value_t = 100_000)]
    pub jmax: usize,
    #[arg(long)]
    pub seed: u64,
    /// Flights at least this long count as zero vectors.
    #[arg(long, default_value_t = 1e4)]
    pub truncation: f64,
    #[arg(long, default_value_t = 1e7)]
    pub max_len: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct MsdArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Ensemble size.
    #[arg(long, default_value_t = 1000)]
    pub k: u64,
    /// Collisions per trajectory.
    #[arg(long, default_value_t = 10_000)]
    pub n: u64,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e7)]
    pub max_len: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct CtimeArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Ensemble size.
    #[arg(long, default_value_t = 1000)]
    pub k: u64,
    /// Final time.
    #[arg(long, default_value_t = 1e5)]
    pub t_max: f64,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e7)]
    pub max_len: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    #[arg(long)]
    pub seed: u64,
    /// Small budgets for a smoke run.
    #[arg(long)]
    pub quick: bool,
    /// Only these criteria (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub criteria: Vec<u32>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(w) = cli.workers {
        if w == 0 {
            eprintln!("error: --workers must be positive");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(w).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let t0 = std::time::Instant::now();
    let result = match &cli.command {
        Command::Validate(a) => commands::validate(a),
        Command::Corridors(a) => commands::corridors(a),
        Command::Trace(a) => commands::trace(a),
        Command::Tail(a) => commands::tail(a),
        Command::Moment(a) => commands::moment(a),
        Command::Corr(a) => commands::corr(a),
        Command::Msd(a) => commands::msd(a),
        Command::Ctime(a) => commands::ctime(a),
        Command::Report(a) => commands::report(a),
    };
    eprintln!("runtime: {:.3} s", t0.elapsed().as_secs_f64());
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
