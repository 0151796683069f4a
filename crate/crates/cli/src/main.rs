//! `adimt`: batch experiments for alpha-divergence minimization training
//! on synthetic sequence tasks. Subcommands compose through files only;
//! every run is deterministic given the seeds in its config.
//!
//! Exit codes: 0 success, 1 usage, 2 configuration, 3 data or I/O,
//! 4 verification failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use adimt_core::error::{Error, Result};

use config::RunConfig;

#[derive(Parser)]
#[command(
    name = "adimt",
    version,
    about = "Train sequence models by minimizing alpha-divergences to a reward-induced payoff distribution"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Config file of `key = value` lines (`#` starts a comment).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one config key; repeatable, applied after the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl ConfigArgs {
    fn build(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            cfg.load_file(path)?;
        }
        for assignment in &self.set {
            let (key, value) = assignment.split_once('=').ok_or_else(|| {
                Error::config(format!("--set expects KEY=VALUE, got {assignment:?}"))
            })?;
            cfg.set(key.trim(), value.trim())?;
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Parameter checkpoint to evaluate (overrides the config key).
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Decode strategy: greedy or beam (overrides the config key).
    #[arg(long)]
    search: Option<String>,
    /// Beam width for beam search (overrides the config key).
    #[arg(long)]
    beam_width: Option<usize>,
    /// Split to decode: train, dev, or test (overrides the config key).
    #[arg(long)]
    split: Option<String>,
}

#[derive(Args)]
struct InspectArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Parameter checkpoint to weigh samples under (overrides the config
    /// key).
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Training pair ids to dump, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pairs: Vec<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic task corpora and vocabulary.
    GenData(ConfigArgs),
    /// Draw and persist the augmented sample set for the training corpus.
    Augment(ConfigArgs),
    /// Train a model; writes the best checkpoint, report, and resolved
    /// config.
    Train(ConfigArgs),
    /// Decode a split with a checkpoint and print corpus BLEU to two
    /// decimals.
    Eval(EvalArgs),
    /// Run the self-check suites: math, grad, oracle, or all.
    Verify {
        #[arg(value_parser = ["math", "grad", "oracle", "all"])]
        suite: String,
    },
    /// Dump per-sample importance weights for chosen training pairs as TSV.
    InspectWeights(InspectArgs),
    /// Train and evaluate the whole objective grid; writes a summary TSV.
    Sweep(ConfigArgs),
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::Domain(_) | Error::NonFinite(_) => 2,
        Error::Data(_) | Error::Io(_) => 3,
    }
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::GenData(args) => commands::gen_data(&args.build()?)?,
        Command::Augment(args) => commands::augment(&args.build()?)?,
        Command::Train(args) => commands::train_cmd(&args.build()?)?,
        Command::Eval(args) => {
            let mut cfg = args.config.build()?;
            if let Some(path) = args.checkpoint {
                cfg.checkpoint = Some(path);
            }
            if let Some(search) = &args.search {
                cfg.set("search", search)?;
            }
            if let Some(width) = args.beam_width {
                cfg.beam_width = width;
            }
            if let Some(split) = &args.split {
                cfg.set("eval_split", split)?;
            }
            commands::eval_cmd(&cfg)?;
        }
        Command::Verify { suite } => {
            if !commands::verify_cmd(&suite)? {
                return Ok(4);
            }
        }
        Command::InspectWeights(args) => {
            let mut cfg = args.config.build()?;
            if let Some(path) = args.checkpoint {
                cfg.checkpoint = Some(path);
            }
            commands::inspect_weights(&cfg, &args.pairs)?;
        }
        Command::Sweep(args) => commands::sweep(&args.build()?)?,
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help and version requests land here too; only real usage
            // errors exit nonzero.
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("{err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
