use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fairgcl::commands::{
    cmd_augment, cmd_bench, cmd_eval, cmd_stats, cmd_train, cmd_verify_prop1, render_augment,
    render_bench, render_eval, render_stats, render_train, render_verify,
};
use fairgcl::config::ExperimentConfig;

/// Fairness-aware graph augmentation and contrastive node embedding.
///
/// Hyperparameters live in the TOML config; flags only select paths and the
/// seed. Set RUST_LOG (e.g. `RUST_LOG=info`) for progress logging.
#[derive(Parser)]
#[command(name = "fairgcl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(short, long)]
    config: PathBuf,
    /// Overrides the config's top-level seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Node, edge-group, degree and feature-correlation statistics.
    Stats(Common),
    /// Samples both augmented views and writes them with a provenance file.
    Augment(Common),
    /// Trains the encoder and writes a checkpoint and loss trace.
    Train(Common),
    /// Evaluates a checkpoint: accuracy, statistical parity, equal opportunity.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Defaults to the config's checkpoint path.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Compares expected total feature correlation under adaptive and
    /// uniform masking, analytically and by Monte Carlo.
    #[command(name = "verify-prop1")]
    VerifyProp1(Common),
    /// Trains and evaluates every setting listed in `bench.schemes`.
    Bench(Common),
}

fn load(common: &Common) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.set_seed(seed);
    }
    if let Some(out) = &common.out {
        cfg.output.dir = out.clone();
    }
    Ok(cfg)
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    let text = match &cli.command {
        Command::Stats(c) => render_stats(&cmd_stats(&load(c)?)?),
        Command::Augment(c) => render_augment(&cmd_augment(&load(c)?)?),
        Command::Train(c) => render_train(&cmd_train(&load(c)?)?),
        Command::Eval { common, checkpoint } => {
            render_eval(&cmd_eval(&load(common)?, checkpoint.as_deref())?)
        }
        Command::VerifyProp1(c) => {
            let report = cmd_verify_prop1(&load(c)?)?;
            print!("{}", render_verify(&report));
            return Ok(report.passed());
        }
        Command::Bench(c) => render_bench(&cmd_bench(&load(c)?)?),
    };
    print!("{text}");
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
