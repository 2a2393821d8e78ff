use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use cgrl::guidance::GuidanceMode;
use cgrl::harness::{
    eval_command, sweep_command, train_with_progress, EnvKind, ExperimentConfig,
};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "cgrl", version, about = "Constraint-guided PPO experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one agent; writes config.txt, metrics.csv and checkpoint.bin to --out.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        guidance: Option<GuidanceMode>,
        #[arg(long)]
        seed: Option<u64>,
        /// Print one line per update to stderr.
        #[arg(long)]
        progress: bool,
    },
    /// Evaluate a checkpoint greedily.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        guidance: Option<GuidanceMode>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 100)]
        episodes: usize,
    },
    /// Train every (guidance, seed) pair and summarise final returns.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated guidance modes.
        #[arg(long, value_delimiter = ',', default_value = "none,obs-mask,action-replace,action-mask")]
        guidance: Vec<GuidanceMode>,
        /// Comma-separated seeds.
        #[arg(long = "seed", value_delimiter = ',', default_value = "0,1,2")]
        seeds: Vec<u64>,
        /// Run cells concurrently.
        #[arg(long)]
        parallel_cells: bool,
    },
}

#[derive(Args)]
struct Common {
    /// key=value config file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    env: Option<EnvKind>,
    /// Total environment frames.
    #[arg(long)]
    frames: Option<usize>,
    #[arg(long)]
    num_envs: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Extra `key=value` override, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::load(path)
                .with_context(|| format!("reading config {}", path.display()))?,
            None => ExperimentConfig::default(),
        };
        for item in &self.overrides {
            let (key, value) = item
                .split_once('=')
                .with_context(|| format!("--set expects KEY=VALUE, got `{item}`"))?;
            config.set(key, value)?;
        }
        if let Some(env) = self.env {
            config.env = env;
        }
        if let Some(frames) = self.frames {
            config.total_frames = frames;
        }
        if let Some(n) = self.num_envs {
            config.ppo.num_envs = n;
        }
        if let Some(out) = &self.out {
            config.out = out.clone();
        }
        Ok(config)
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train {
            common,
            guidance,
            seed,
            progress,
        } => {
            let mut config = common.load()?;
            if let Some(g) = guidance {
                config.guidance = g;
            }
            if let Some(s) = seed {
                config.seed = s;
            }
            let total = config.update_count();
            let outcome = train_with_progress(&config, |row| {
                if progress {
                    eprintln!(
                        "update {}/{} frames {} return_mean {:.4} return_max {:.4}",
                        row.updates, total, row.frames, row.return_mean, row.return_max
                    );
                }
            })?;
            println!("updates = {}", outcome.rows.len());
            println!("final_return_mean = {}", outcome.final_return());
            println!("metrics = {}", outcome.metrics_path.display());
            println!("checkpoint = {}", outcome.checkpoint_path.display());
        }
        Command::Eval {
            common,
            guidance,
            seed,
            checkpoint,
            episodes,
        } => {
            let mut config = common.load()?;
            if let Some(g) = guidance {
                config.guidance = g;
            }
            if let Some(s) = seed {
                config.seed = s;
            }
            let summary = eval_command(&checkpoint, &config, episodes)
                .with_context(|| format!("evaluating {}", checkpoint.display()))?;
            println!("{summary}");
        }
        Command::Sweep {
            common,
            guidance,
            seeds,
            parallel_cells,
        } => {
            let config = common.load()?;
            let outcome = sweep_command(&config, &guidance, &seeds, parallel_cells)?;
            for cell in &outcome.cells {
                match &cell.result {
                    Ok(r) => println!("{} seed {}: final_return_mean {r}", cell.guidance, cell.seed),
                    Err(e) => eprintln!("{} seed {}: FAILED {e}", cell.guidance, cell.seed),
                }
            }
            println!("summary = {}", outcome.summary_path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
