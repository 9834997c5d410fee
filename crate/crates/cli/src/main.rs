mod run;

use std::num::NonZeroUsize;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use uam_marl::{Algorithm, Error, ExperimentConfig, ObservationMode, Result};

/// Environment variable naming the default output root.
const OUT_ENV: &str = "UAM_MARL_OUT";
const DEFAULT_OUT: &str = "runs";

#[derive(Parser)]
#[command(
    name = "uam-marl",
    version,
    about = "Train and evaluate multi-agent UAM fleet policies"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one algorithm for every seed.
    Train(RunArgs),
    /// Greedy inference from the checkpoints written by `train`.
    Eval(RunArgs),
    /// Train and evaluate the algorithm × seed grid and write a summary.
    Sweep(RunArgs),
    /// Recompute the derived aircraft constants and report discrepancies.
    ValidateSpec(SpecArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML file with [world] [aircraft] [battery] [training] [algorithm] sections.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seeds to run, comma separated; replaces the configured list.
    #[arg(long, value_delimiter = ',')]
    seed: Vec<u64>,
    /// Output root; defaults to the configured one, then $UAM_MARL_OUT, then ./runs.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Runs executed in parallel.
    #[arg(long)]
    jobs: Option<NonZeroUsize>,
    #[arg(long, value_parser = parse_mode)]
    mode: Option<ObservationMode>,
    /// Algorithm(s), comma separated. `sweep` takes several, the others one.
    #[arg(long, value_delimiter = ',', value_parser = parse_algorithm)]
    algorithm: Vec<Algorithm>,
    #[arg(long)]
    epochs: Option<usize>,
}

#[derive(Args)]
struct SpecArgs {
    #[arg(long)]
    config: Option<PathBuf>,
}

fn parse_mode(s: &str) -> std::result::Result<ObservationMode, String> {
    s.parse()
}

fn parse_algorithm(s: &str) -> std::result::Result<Algorithm, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

impl RunArgs {
    /// Defaults, then the file, then the flags.
    fn effective_config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if !self.seed.is_empty() {
            cfg.seeds = self.seed.clone();
        }
        if let Some(mode) = self.mode {
            cfg.algorithm.mode = mode;
        }
        if let Some(epochs) = self.epochs {
            cfg.training.epochs = epochs;
        }
        if let Some(&first) = self.algorithm.first() {
            cfg.algorithm.algorithm = first;
            cfg.algorithm.sweep = self.algorithm.clone();
        }
        let out = self
            .out
            .clone()
            .or_else(|| cfg.output_dir.clone())
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
        cfg.output_dir = Some(out);
        cfg.validate()?;
        Ok(cfg)
    }

    fn jobs(&self) -> usize {
        self.jobs.map_or(1, NonZeroUsize::get)
    }

    fn single_algorithm(&self, command: &str) -> Result<()> {
        if self.algorithm.len() > 1 {
            return Err(Error::Usage(format!(
                "{command} takes one --algorithm; use sweep for several"
            )));
        }
        Ok(())
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Usage(_) => 2,
        Error::UnknownKey(_) => 3,
        Error::Config(_) | Error::InvalidSpec(_) | Error::Domain(_) => 4,
        Error::Io(_) => 5,
        Error::Checkpoint(_) => 6,
        Error::Parse { .. } => 7,
        _ => 70,
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(args) => {
            args.single_algorithm("train")?;
            run::train_all(&args.effective_config()?, args.jobs())
        }
        Command::Eval(args) => {
            args.single_algorithm("eval")?;
            run::eval_all(&args.effective_config()?, args.jobs())
        }
        Command::Sweep(args) => run::sweep(&args.effective_config()?, args.jobs()),
        Command::ValidateSpec(args) => {
            let cfg = match &args.config {
                Some(path) => ExperimentConfig::load(path)?,
                None => ExperimentConfig::default(),
            };
            run::validate_spec(&cfg)
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                Error::Io(_) => eprintln!("error: output not writable or input unreadable: {e}"),
                _ => eprintln!("error: {e}"),
            }
            ExitCode::from(exit_code(&e))
        }
    }
}
