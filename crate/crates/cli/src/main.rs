//! `multilasso`: run one experiment from a JSON config and write its report.

mod commands;
mod config;
mod output;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};

use config::{parse, Versioned};
use output::{Manifest, Stage};

#[derive(Debug)]
pub enum CliError {
    /// Malformed or unsupported config.
    Schema(String),
    /// A library routine rejected its inputs or failed numerically.
    Numeric(String),
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Schema(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Schema(m) => write!(f, "config error: {m}"),
            CliError::Numeric(m) => write!(f, "numeric error: {m}"),
            CliError::Io(m) => write!(f, "I/O error: {m}"),
        }
    }
}

impl From<multilasso_core::Error> for CliError {
    fn from(e: multilasso_core::Error) -> Self {
        CliError::Numeric(e.to_string())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(
    name = "multilasso",
    version,
    about = "Sparse multi-index Lasso experiments and bound checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON config for the subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Run seed; overrides the config's `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output file; a manifest is written next to it as `<out>.manifest.json`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value = "json")]
    format: Format,

    /// Worker threads; results do not depend on this.
    #[arg(long, global = true, env = "MULTILASSO_THREADS")]
    threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Penalized fit of a model document.
    Solve {
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        max_iters: Option<usize>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        restarts: Option<usize>,
    },
    /// Closed-form constants, thresholds and bounds.
    Constants,
    /// Restricted eigenvalue search and sparse spectral norms.
    ReDiag {
        #[arg(long)]
        s: Option<usize>,
        #[arg(long = "K")]
        k_cone: Option<f64>,
        #[arg(long)]
        budget: Option<usize>,
    },
    /// Comparison inequalities by sign enumeration or sampling.
    VerifyComparison,
    /// Local and global tail bounds of the centered loss process.
    VerifyTail,
    /// Concentration of suprema of sums of independent functions.
    VerifyConcentration,
    /// Draw letters and emissions from a hidden-letter model.
    HiddenSample,
    /// Lasso fit of a hidden-letter model.
    HiddenFit,
    /// Tail bound of the hidden-model log-likelihood process.
    HiddenVerify,
    /// End-to-end Lasso pipeline over replicated responses.
    E2eLasso,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Solve { .. } => "solve",
            Command::Constants => "constants",
            Command::ReDiag { .. } => "re-diag",
            Command::VerifyComparison => "verify-comparison",
            Command::VerifyTail => "verify-tail",
            Command::VerifyConcentration => "verify-concentration",
            Command::HiddenSample => "hidden-sample",
            Command::HiddenFit => "hidden-fit",
            Command::HiddenVerify => "hidden-verify",
            Command::E2eLasso => "e2e-lasso",
        }
    }
}

fn load<T: for<'de> serde::Deserialize<'de> + Versioned>(
    bytes: &[u8],
    flag: Option<u64>,
) -> Result<(T, u64), CliError> {
    let cfg: T = parse(bytes)?;
    let seed = flag.or(cfg.seed()).unwrap_or(0);
    Ok((cfg, seed))
}

fn dispatch(
    command: &Command,
    bytes: &[u8],
    seed: Option<u64>,
    base: &Path,
) -> Result<(commands::Output, u64, f64), CliError> {
    let parse_start = Instant::now();
    macro_rules! run {
        ($ty:ty, |$cfg:ident, $seed:ident| $body:expr) => {{
            #[allow(unused_mut)]
            let (mut $cfg, $seed): ($ty, u64) = load(bytes, seed)?;
            let parse_ms = parse_start.elapsed().as_secs_f64() * 1e3;
            let out = $body?;
            Ok((out, $seed, parse_ms))
        }};
    }
    match command {
        Command::Solve {
            lambda,
            max_iters,
            tol,
            restarts,
        } => run!(config::SolveConfig, |cfg, s| {
            if lambda.is_some() {
                cfg.lambda = *lambda;
                cfg.tuning = None;
            }
            if let Some(v) = max_iters {
                cfg.solver.max_iters = *v;
            }
            if let Some(v) = tol {
                cfg.solver.tol_kkt = *v;
            }
            if let Some(v) = restarts {
                cfg.restarts = *v;
            }
            commands::solve(cfg, s, base)
        }),
        Command::Constants => run!(config::ConstantsConfig, |cfg, _s| commands::constants(cfg)),
        Command::ReDiag {
            s: sparsity,
            k_cone,
            budget,
        } => run!(config::ReDiagConfig, |cfg, s| {
            if let Some(v) = sparsity {
                cfg.s = *v;
            }
            if let Some(v) = k_cone {
                cfg.k_cone = *v;
            }
            if let Some(v) = budget {
                cfg.budget = *v;
            }
            commands::re_diag(cfg, s, base)
        }),
        Command::VerifyComparison => run!(config::ComparisonConfig, |cfg, s| {
            commands::verify_comparison(cfg, s)
        }),
        Command::VerifyTail => run!(config::TailConfig, |cfg, s| commands::verify_tail(
            cfg, s, base
        )),
        Command::VerifyConcentration => {
            run!(config::ConcentrationConfig, |cfg, s| {
                commands::verify_concentration(cfg, s)
            })
        }
        Command::HiddenSample => run!(
            config::HiddenSampleConfig,
            |cfg, s| commands::hidden_sample(cfg, s)
        ),
        Command::HiddenFit => run!(config::HiddenFitConfig, |cfg, s| commands::hidden_fit(
            cfg, s
        )),
        Command::HiddenVerify => run!(
            config::HiddenVerifyConfig,
            |cfg, s| commands::hidden_verify(cfg, s)
        ),
        Command::E2eLasso => run!(config::E2eConfig, |cfg, s| commands::e2e_lasso(cfg, s)),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let started = std::time::SystemTime::now();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Schema("--threads must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Io(format!("starting thread pool: {e}")))?;
    }
    let config_path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Schema("--config FILE is required".into()))?;
    let bytes = std::fs::read(config_path)
        .map_err(|e| CliError::Io(format!("reading {}: {e}", config_path.display())))?;
    let base = config_path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_default();

    let compute_start = Instant::now();
    let (out, seed, parse_ms) = dispatch(&cli.command, &bytes, cli.seed, &base)?;
    let compute_ms = compute_start.elapsed().as_secs_f64() * 1e3 - parse_ms;

    let body = output::render(cli.command.name(), seed, &out, cli.format)?;
    let write_start = Instant::now();
    match &cli.out {
        None => {
            print!("{body}");
            Ok(())
        }
        Some(path) => {
            output::write_atomic(path, body.as_bytes())?;
            let mut manifest = Manifest::new(cli.command.name(), seed, &bytes, started, out.report);
            manifest.timings.push(Stage {
                stage: "parse".into(),
                ms: parse_ms,
            });
            manifest.timings.push(Stage {
                stage: "compute".into(),
                ms: compute_ms,
            });
            manifest.timings.push(Stage {
                stage: "write".into(),
                ms: write_start.elapsed().as_secs_f64() * 1e3,
            });
            output::write_atomic(&output::manifest_path(path), manifest.to_json()?.as_bytes())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("multilasso: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
