//! `proxkern` command-line front end.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use proxkern::experiments::AlphaSearch;
use proxkern::Boundary;

const FAMILY_HELP: &str = "\
Family grammar: name[:key=value[,key=value]]
  losses:  quadratic | tv[:eps=E] | huber:gamma=G | welsch:gamma=G | lorentzian:gamma=G
           clipped-quadratic:gamma=G | exponential:gamma=G | barron:beta=B,gamma=G
  kernels: boxcar:gamma=G | gaussian:gamma=G | cauchy:gamma=G | exponential:gamma=G | constant
  --gamma and --beta fill in parameters missing from the family string.
Examples: --loss huber:gamma=5   --loss barron:beta=0,gamma=1   --kernel gaussian:gamma=10
Inputs: a binary PGM path, or corpus:NAME (blocks|ramp|sinusoid|noise-texture).
Units: --sigma is in 8-bit intensity units; the MAP weight is sigma / --sigma-scale.
Exit codes: 0 success, 1 runtime failure, 2 usage error.";

#[derive(Parser, Debug)]
#[command(name = "proxkern", version, about = "Kernel filters, robust losses and MAP denoisers", after_help = FAMILY_HELP)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// key=value file with the same names as the flags; flags win.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Worker thread cap; outputs do not depend on it.
    #[arg(long, global = true, value_name = "N", value_parser = clap::value_parser!(u64).range(1..))]
    pub threads: Option<u64>,
    /// Human-readable progress on stderr.
    #[arg(long, global = true)]
    pub verbose: bool,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Add seeded Gaussian noise to an image.
    AddNoise(AddNoiseArgs),
    /// Filter or solve one image.
    Denoise(DenoiseArgs),
    /// Tabulate a loss/kernel pair as CSV.
    Translate(TranslateArgs),
    /// Dense graph residuals as CSV.
    GraphCheck(GraphCheckArgs),
    /// Run a sweep and write its CSV.
    Experiment(ExperimentArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::AddNoise(_) => "add-noise",
            Command::Denoise(_) => "denoise",
            Command::Translate(_) => "translate",
            Command::GraphCheck(_) => "graph-check",
            Command::Experiment(_) => "experiment",
        }
    }
}

#[derive(Args, Debug)]
pub struct InputArgs {
    /// Side length of corpus inputs.
    #[arg(long, default_value_t = 64)]
    pub size: usize,
    /// Seed for noise and corpus generation.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct AddNoiseArgs {
    /// Noise standard deviation in intensity units.
    #[arg(long)]
    pub sigma: f64,
    #[command(flatten)]
    pub input: InputArgs,
    pub image: String,
    pub output: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Nlm,
    BilateralDf,
    FirstOrder,
    SecondOrder,
    L2Shrink,
    DirichletExact,
    DirichletApprox,
    MapGd,
    MapHeavyBall,
}

#[derive(ValueEnum, Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum BoundaryArg {
    #[default]
    Reflect,
    Periodic,
}

impl From<BoundaryArg> for Boundary {
    fn from(b: BoundaryArg) -> Self {
        match b {
            BoundaryArg::Reflect => Boundary::Reflect,
            BoundaryArg::Periodic => Boundary::Periodic,
        }
    }
}

/// `--momentum`: a value in [0, 1) or `tuned`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Momentum(pub Option<f64>);

impl std::str::FromStr for Momentum {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "tuned" {
            return Ok(Momentum(None));
        }
        let v: f64 = s.parse().map_err(|_| format!("expected a number or 'tuned', got {s:?}"))?;
        Ok(Momentum(Some(v)))
    }
}

#[derive(Args, Debug, Clone)]
pub struct SolverArgs {
    #[arg(long, default_value_t = 5000)]
    pub max_iters: usize,
    /// Gradient step; default 1 / (1/s^2 + max degree * max rho'').
    #[arg(long)]
    pub step: Option<f64>,
    /// Heavy-ball momentum in [0, 1), or `tuned` for (1 - sqrt(step / s^2))^2.
    #[arg(long, default_value = "0.9")]
    pub momentum: Momentum,
    /// Stopping infinity-norm of the gradient; default 1e-6 * range / s^2.
    #[arg(long)]
    pub grad_tol: Option<f64>,
}

#[derive(Args, Debug)]
pub struct DenoiseArgs {
    #[arg(long, value_enum)]
    pub method: Method,
    /// Regularisation strength in intensity units.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Divisor turning --sigma into the MAP weight.
    #[arg(long, default_value_t = 255.0)]
    pub sigma_scale: f64,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// Bilateral strength; default (sigma / sigma-scale)^2.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Stencil radius.
    #[arg(long, default_value_t = 1)]
    pub radius: usize,
    /// Gaussian spatial weights with this sigma instead of a box stencil.
    #[arg(long)]
    pub spatial_sigma: Option<f64>,
    /// Patch radius of the nlm method.
    #[arg(long, default_value_t = 1)]
    pub patch_radius: usize,
    #[arg(long)]
    pub loss: Option<String>,
    #[arg(long, default_value = "gaussian")]
    pub kernel: String,
    #[arg(long, value_enum, default_value_t)]
    pub boundary: BoundaryArg,
    /// dirichlet-approx: use taps [s^2, 1-2s^2, s^2] instead of [2s^2, 1-4s^2, 2s^2].
    #[arg(long)]
    pub halved_taps: bool,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// map-* methods: write the iteration trace as CSV.
    #[arg(long, value_name = "PATH")]
    pub trace: Option<PathBuf>,
    #[command(flatten)]
    pub input: InputArgs,
    pub image: String,
    pub output: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    LossToKernel,
    KernelToLoss,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum OrderArg {
    #[value(name = "1")]
    First,
    #[value(name = "2")]
    Second,
    Both,
}

#[derive(Args, Debug)]
pub struct TranslateArgs {
    #[arg(long, value_enum)]
    pub direction: Direction,
    #[arg(long)]
    pub loss: Option<String>,
    #[arg(long)]
    pub kernel: Option<String>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// Bridge order; columns of the other order are `nan`.
    #[arg(long, value_enum, default_value = "both")]
    pub order: OrderArg,
    /// Translation factor 2 s^2 h / a; needs --alpha as well. Default factor 1.
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub h: f64,
    /// Grid end; default 10 * gamma.
    #[arg(long)]
    pub t_max: Option<f64>,
    #[arg(long, default_value_t = 101)]
    pub points: usize,
    /// CSV path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct GraphCheckArgs {
    #[arg(long, default_value = "gaussian:gamma=10")]
    pub kernel: String,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, default_value_t = 2)]
    pub radius: usize,
    #[arg(long, default_value_t = 0)]
    pub patch_radius: usize,
    /// MAP weight for the self-weight check, in intensity units.
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long, default_value_t = 255.0)]
    pub sigma_scale: f64,
    #[arg(long, default_value_t = 16)]
    pub size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(default_value = "corpus:noise-texture")]
    pub image: String,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExperimentKind {
    HuberTv,
    BilateralInversion,
    Dirichlet,
}

#[derive(Args, Debug)]
pub struct ExperimentArgs {
    #[arg(value_enum)]
    pub kind: ExperimentKind,
    #[arg(long)]
    pub out: PathBuf,
    /// Alpha-scan table of the bilateral experiment.
    #[arg(long, value_name = "PATH")]
    pub alpha_out: Option<PathBuf>,
    #[arg(long, default_value = "corpus:blocks")]
    pub image: String,
    /// Bilateral range kernel: gaussian, boxcar or exponential.
    #[arg(long, default_value = "gaussian")]
    pub family: String,
    #[arg(long, default_value_t = 64)]
    pub size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10.0)]
    pub noise_sigma: f64,
    /// Comma-separated sweep grid; default depends on the experiment.
    #[arg(long, value_delimiter = ',')]
    pub sigmas: Vec<f64>,
    #[arg(long, default_value_t = 20.0)]
    pub range_gamma: f64,
    #[arg(long, default_value_t = 32)]
    pub alpha_points: usize,
    #[arg(long, default_value = "unimodal")]
    pub alpha_search: AlphaSearch,
    #[arg(long, default_value_t = 256)]
    pub dirichlet_n: usize,
    #[arg(long, default_value_t = 5000)]
    pub max_iters: usize,
    /// Append runtime_ms_* columns (not byte-reproducible).
    #[arg(long)]
    pub timings: bool,
}

fn main() -> ExitCode {
    let args = match config::merge_config(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = if cli.verbose { log::LevelFilter::Info } else { log::LevelFilter::Off };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n as usize).build_global() {
            eprintln!("error subcommand={} stage=setup message={:?}", cli.command.name(), e.to_string());
            return ExitCode::from(1);
        }
    }
    match commands::dispatch(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(commands::Failure::Usage(msg)) => {
            eprintln!("error: {msg}\n\nFor more information, try '--help'.");
            ExitCode::from(2)
        }
        Err(commands::Failure::Runtime { stage, message }) => {
            eprintln!("error subcommand={} stage={stage} message={message:?}", cli.command.name());
            ExitCode::from(1)
        }
    }
}
