use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use cascade_iv::channel::HopConvention;
use cascade_iv::experiment::{self, resolve_threads, CommandOutput, ExperimentConfig};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "cascade-iv", version, about = "Information velocity of linear relaying over cascaded noisy channels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML); defaults apply to missing keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed of the Monte Carlo streams.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for the CSV files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Number of Monte Carlo trials.
    #[arg(long, global = true)]
    trials: Option<u64>,
    /// Hop convention: `inst` or `delayed`.
    #[arg(long, global = true)]
    convention: Option<HopConvention>,
    /// Upper bound on worker threads.
    #[arg(long, env = "CASCADE_IV_THREADS", global = true, hide_env_values = true)]
    max_threads: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Error-exponent curves versus velocity.
    Exponents,
    /// Streaming velocity bound versus rate.
    Iv,
    /// MSE lattice from the recursion and the closed form.
    Mse,
    /// Monte Carlo of the configured scheme against the lattice.
    Simulate,
    /// Single-packet error probabilities against their bounds.
    Packet,
    /// Packet-stream worst-bit error versus relay.
    Stream,
    /// Every invariant check.
    Verify,
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.monte_carlo.master_seed = seed;
    }
    if let Some(trials) = common.trials {
        cfg.monte_carlo.num_trials = trials;
    }
    if let Some(conv) = common.convention {
        cfg.experiment.convention = conv;
    }
    if let Some(out) = &common.out {
        cfg.experiment.output_dir = out.to_string_lossy().into_owned();
    }
    let mut threads = resolve_threads(cfg.monte_carlo.threads);
    if let Some(cap) = common.max_threads {
        threads = threads.min(cap.max(1));
    }
    cfg.monte_carlo.threads = threads;
    cfg.validate()?;
    Ok(cfg)
}

fn run(command: Command, cfg: &ExperimentConfig) -> Result<CommandOutput> {
    let out = match command {
        Command::Exponents => experiment::cmd_exponents(cfg),
        Command::Iv => experiment::cmd_iv(cfg),
        Command::Mse => experiment::cmd_mse(cfg),
        Command::Simulate => experiment::cmd_simulate(cfg),
        Command::Packet => experiment::cmd_packet(cfg),
        Command::Stream => experiment::cmd_stream(cfg),
        Command::Verify => experiment::cmd_verify(cfg),
    };
    Ok(out?)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = load_config(&cli.common).and_then(|cfg| {
        let out = run(cli.command, &cfg)?;
        let dir = PathBuf::from(&cfg.experiment.output_dir);
        out.write_to(&dir).with_context(|| format!("writing results to {}", dir.display()))?;
        Ok(out)
    });
    match result {
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Ok(out) => {
            for note in &out.notes {
                println!("note: {note}");
            }
            for v in &out.verdicts {
                println!("{}", v.summary());
            }
            let failures: Vec<&str> = out.failures().iter().map(|v| v.name.as_str()).collect();
            if failures.is_empty() {
                ExitCode::SUCCESS
            } else {
                eprintln!("failures: {}", failures.join(","));
                ExitCode::from(1)
            }
        }
    }
}
