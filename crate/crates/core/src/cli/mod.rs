//! Command-line front end.
//!
//! Exit codes: 0 success, 1 validation or runtime failure, 2 usage error.

mod commands;
mod validate;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::analytic::AnalyticError;
use crate::fock::pipeline::{EngineOptions, HeraldModel};
use crate::fock::EngineError;
use crate::output::{Artifact, Format, OutputError};
use crate::params::{load_params, parse_override, ExperimentParams, ParamsError, ValidationPolicy};
use crate::sim::{HeraldSampling, SimError, SweepAxis};

pub use commands::generate;
pub use validate::{run_suite, CheckResult};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Params(#[from] ParamsError),
    #[error(transparent)]
    Analytic(#[from] AnalyticError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Output(#[from] OutputError),
    #[error("thread pool: {0}")]
    Pool(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Params(_) => EXIT_USAGE,
            CliError::Sim(e) if !matches!(e, SimError::Engine(_)) => EXIT_USAGE,
            _ => EXIT_FAILURE,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "dlcz-swap", version, about = "Multiplexed DLCZ entanglement-swapping simulator")]
pub struct Cli {
    /// Parameter file of `key = value` lines.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Override one parameter; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
    /// Trials per measurement setting.
    #[arg(long, global = true)]
    pub trials: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = FormatArg::Both)]
    pub format: FormatArg,
    /// Worker threads; defaults to all cores. Results do not depend on it.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Accept more than three modes per interface.
    #[arg(long, global = true)]
    pub allow_many_modes: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Json,
    Both,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
            FormatArg::Both => Format::Both,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FigureId {
    Fig2,
    Fig3,
    Fig4,
    Fig1s,
    Fig2s,
}

impl FigureId {
    pub fn name(self) -> &'static str {
        match self {
            FigureId::Fig2 => "fig2",
            FigureId::Fig3 => "fig3",
            FigureId::Fig4 => "fig4",
            FigureId::Fig1s => "fig1s",
            FigureId::Fig2s => "fig2s",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SamplingArg {
    Full,
    Conditioned,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum HeraldArg {
    BellPairs,
    StokesConditioned,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AxisArg {
    T2,
    M,
    Chi,
    Theta,
}

impl From<AxisArg> for SweepAxis {
    fn from(a: AxisArg) -> Self {
        match a {
            AxisArg::T2 => SweepAxis::T2,
            AxisArg::M => SweepAxis::M,
            AxisArg::Chi => SweepAxis::Chi,
            AxisArg::Theta => SweepAxis::Theta,
        }
    }
}

fn value_name<T: ValueEnum>(v: T) -> String {
    v.to_possible_value()
        .map(|p| p.get_name().to_string())
        .unwrap_or_default()
}

#[derive(Debug, Clone, Args, PartialEq)]
pub struct SimArgs {
    /// Number of equally spaced verification phases.
    #[arg(long, default_value_t = 8)]
    pub thetas: usize,
    #[arg(long, value_enum, default_value_t = SamplingArg::Conditioned)]
    pub sampling: SamplingArg,
    #[arg(long, value_enum, default_value_t = HeraldArg::BellPairs)]
    pub herald: HeraldArg,
    /// Photon-number truncation of the engine.
    #[arg(long, default_value_t = 2)]
    pub n_max: usize,
}

impl SimArgs {
    pub fn options(&self) -> EngineOptions {
        EngineOptions {
            n_max: self.n_max,
            herald: match self.herald {
                HeraldArg::BellPairs => HeraldModel::BellPairs,
                HeraldArg::StokesConditioned => HeraldModel::StokesConditioned,
            },
            ..EngineOptions::default()
        }
    }

    pub fn sampling(&self) -> HeraldSampling {
        match self.sampling {
            SamplingArg::Full => HeraldSampling::Full,
            SamplingArg::Conditioned => HeraldSampling::Conditioned,
        }
    }

    fn to_args(&self) -> Vec<String> {
        vec![
            "--thetas".into(),
            self.thetas.to_string(),
            "--sampling".into(),
            value_name(self.sampling),
            "--herald".into(),
            value_name(self.herald),
            "--n-max".into(),
            self.n_max.to_string(),
        ]
    }
}

#[derive(Debug, Clone, Subcommand, PartialEq)]
pub enum Command {
    /// Closed-form figures at the configured operating point.
    Analytic,
    /// Regenerate the data behind one figure.
    Figures {
        #[arg(value_enum)]
        id: FigureId,
    },
    /// Cross-correlation threshold for positive concurrence.
    Threshold {
        /// Hold g_b fixed and solve for g_ac instead of the symmetric case.
        #[arg(long)]
        g_b: Option<f64>,
    },
    /// Monte Carlo batch at the configured operating point.
    Simulate(SimArgs),
    /// Monte Carlo batches along one parameter axis.
    Sweep {
        #[arg(long, value_enum)]
        axis: AxisArg,
        /// Comma-separated ascending values.
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        values: Vec<f64>,
        /// Storage cutoff in µs; pooled trade-off for t2 sweeps.
        #[arg(long)]
        cutoff: Option<f64>,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Cross-layer agreement suite and stored-output regression.
    Validate {
        /// Directory of stored reference outputs.
        #[arg(long, value_name = "DIR")]
        golden: Option<PathBuf>,
        /// Rewrite the reference outputs instead of comparing.
        #[arg(long)]
        bless: bool,
    },
}

impl Command {
    /// Canonical arguments that regenerate this command's outputs.
    pub fn to_args(&self) -> Vec<String> {
        match self {
            Command::Analytic => vec!["analytic".into()],
            Command::Figures { id } => vec!["figures".into(), id.name().into()],
            Command::Threshold { g_b } => {
                let mut v = vec!["threshold".to_string()];
                if let Some(g) = g_b {
                    v.extend(["--g-b".to_string(), g.to_string()]);
                }
                v
            }
            Command::Simulate(s) => {
                let mut v = vec!["simulate".to_string()];
                v.extend(s.to_args());
                v
            }
            Command::Sweep {
                axis,
                values,
                cutoff,
                sim,
            } => {
                let mut v = vec![
                    "sweep".to_string(),
                    "--axis".into(),
                    value_name(*axis),
                    "--values".into(),
                    values.iter().map(f64::to_string).collect::<Vec<_>>().join(","),
                ];
                if let Some(c) = cutoff {
                    v.extend(["--cutoff".to_string(), c.to_string()]);
                }
                v.extend(sim.to_args());
                v
            }
            Command::Validate { .. } => vec!["validate".into()],
        }
    }

    /// Re-parses arguments produced by [`Command::to_args`].
    pub fn from_args(args: &[String]) -> Result<Command, CliError> {
        let argv = std::iter::once("dlcz-swap".to_string()).chain(args.iter().cloned());
        Cli::try_parse_from(argv)
            .map(|c| c.command)
            .map_err(|e| CliError::Usage(e.to_string()))
    }

    fn default_trials(&self) -> u64 {
        match self {
            Command::Sweep { .. } => 50_000,
            Command::Validate { .. } => 200_000,
            _ => 100_000,
        }
    }
}

/// Inputs shared by every generator.
#[derive(Debug, Clone)]
pub struct RunContext {
    pub params: ExperimentParams,
    pub seed: u64,
    pub trials: u64,
}

fn load(cli: &Cli) -> Result<ExperimentParams, CliError> {
    let overrides = cli
        .set
        .iter()
        .map(|s| parse_override(s))
        .collect::<Result<Vec<_>, _>>()?;
    let policy = ValidationPolicy {
        allow_many_modes: cli.allow_many_modes,
    };
    Ok(load_params(cli.config.as_deref(), &overrides, &policy)?)
}

fn write_all(artifacts: &[Artifact], cli: &Cli, default_dir: Option<&str>) -> Result<(), CliError> {
    let dir = match (&cli.out, default_dir) {
        (Some(d), _) => d.clone(),
        (None, Some(d)) => PathBuf::from(d),
        (None, None) => return Ok(()),
    };
    for a in artifacts {
        for p in a.write(&dir, cli.format.into())? {
            eprintln!("wrote {}", p.display());
        }
    }
    Ok(())
}

fn execute(cli: &Cli) -> Result<i32, CliError> {
    let params = load(cli)?;
    for w in params.warnings() {
        eprintln!("warning: {w}");
    }
    let ctx = RunContext {
        params,
        seed: cli.seed,
        trials: cli.trials.unwrap_or_else(|| cli.command.default_trials()),
    };
    if ctx.trials == 0 {
        return Err(CliError::Usage("--trials must be at least 1".into()));
    }
    match &cli.command {
        Command::Validate { golden, bless } => {
            let dir = golden.clone().unwrap_or_else(validate::default_golden_dir);
            if *bless {
                validate::bless(&dir)?;
                return Ok(EXIT_OK);
            }
            let results = run_suite(&ctx, &dir);
            Ok(validate::report(&results))
        }
        cmd => {
            let out = generate(cmd, &ctx)?;
            for line in &out.lines {
                println!("{line}");
            }
            let default_dir = match cmd {
                Command::Analytic | Command::Threshold { .. } => None,
                _ => Some("results"),
            };
            write_all(&out.artifacts, cli, default_dir)?;
            Ok(EXIT_OK)
        }
    }
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.workers {
        Some(0) => Err(CliError::Usage("--workers must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Pool(e.to_string()))
            .and_then(|pool| pool.install(|| execute(&cli))),
        None => execute(&cli),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
