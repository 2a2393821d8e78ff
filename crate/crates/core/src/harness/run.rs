use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::card_game::CardGame;
use crate::env::{run_guided_episode, ActionSelection, GuidedEnv};
use crate::grid_world::GridWorld;
use crate::guidance::ConstraintModel;
use crate::neural::{checkpoint, ActorCritic, Adam, NetSpec};
use crate::ppo::{collect_rollout, compute_gae, ppo_update, VecEnv};

use super::{EnvKind, EpisodeWindow, ExperimentConfig, HarnessError, MetricsRow, MetricsWriter};

pub const METRICS_FILE: &str = "metrics.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const CONFIG_FILE: &str = "config.txt";

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub rows: Vec<MetricsRow>,
    pub net: ActorCritic,
    pub metrics_path: PathBuf,
    pub checkpoint_path: PathBuf,
}

impl TrainOutcome {
    /// `return_mean` of the last row, or 0 for an empty run.
    pub fn final_return(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.return_mean)
    }
}

pub fn train_command(config: &ExperimentConfig) -> Result<TrainOutcome, HarnessError> {
    train_with_progress(config, |_| {})
}

/// Trains as configured, calling `progress` after each update.
///
/// Writes `config.txt`, `metrics.csv` and `checkpoint.bin` into `config.out`.
pub fn train_with_progress<F>(config: &ExperimentConfig, progress: F) -> Result<TrainOutcome, HarnessError>
where
    F: FnMut(&MetricsRow),
{
    config.validate()?;
    match config.env {
        EnvKind::CardGame => train_env(config, CardGame::new, NetSpec::card_game(), progress),
        EnvKind::GridWorld => {
            let grid = config.grid_config();
            train_env(config, move || GridWorld::new(grid), NetSpec::grid_world(), progress)
        }
    }
}

fn train_env<E, M, F>(
    config: &ExperimentConfig,
    make: M,
    spec: NetSpec,
    mut progress: F,
) -> Result<TrainOutcome, HarnessError>
where
    E: ConstraintModel,
    M: Fn() -> E,
    F: FnMut(&MetricsRow),
{
    fs::create_dir_all(&config.out)?;
    fs::write(config.out.join(CONFIG_FILE), config.to_text())?;

    let ppo = &config.ppo;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let net_seed = rng.next_u64();
    let env_seed = rng.next_u64();

    let mut net = ActorCritic::new(spec, net_seed)?;
    let mut adam = Adam::new(net.parameter_count());
    let mut envs = VecEnv::new(ppo.num_envs, make, config.guidance, config.step_cap, env_seed)?;

    let metrics_path = config.out.join(METRICS_FILE);
    let mut writer = MetricsWriter::new(BufWriter::new(File::create(&metrics_path)?))?;
    let mut window = EpisodeWindow::default();
    let mut rows = Vec::with_capacity(config.update_count());

    for update in 1..=config.update_count() {
        let buffer = collect_rollout(&mut envs, &net, ppo.rollout_len, &mut rng)?;
        let advantages = compute_gae(&buffer, ppo.gamma, ppo.lambda);
        let stats = ppo_update(&mut net, &mut adam, &buffer, &advantages, ppo, &mut rng)?;
        for episode in &buffer.episodes {
            window.push(*episode);
        }
        let row = MetricsRow {
            frames: (update * ppo.batch_size()) as u64,
            updates: update as u64,
            return_mean: window.return_mean(),
            return_max: window.return_max(),
            episode_len_mean: window.length_mean(),
            invalid_action_count: buffer.invalid_action_count as u64,
            duplicate_pickup_count: buffer.duplicate_pickup_count as u64,
            policy_loss: stats.policy_loss,
            value_loss: stats.value_loss,
            entropy: stats.entropy,
        };
        writer.write(&row)?;
        progress(&row);
        rows.push(row);
    }
    writer.flush()?;

    let checkpoint_path = config.out.join(CHECKPOINT_FILE);
    checkpoint::save(&net, &checkpoint_path)?;
    Ok(TrainOutcome {
        rows,
        net,
        metrics_path,
        checkpoint_path,
    })
}

/// Greedy-evaluation statistics. All zero when no episode was run.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EvalSummary {
    pub episodes: usize,
    pub return_mean: f64,
    pub return_max: f64,
    /// Population standard deviation.
    pub return_std: f64,
    pub length_mean: f64,
    pub invalid_actions: usize,
    pub duplicate_pickups: usize,
}

impl std::fmt::Display for EvalSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "episodes = {}", self.episodes)?;
        writeln!(f, "return_mean = {}", self.return_mean)?;
        writeln!(f, "return_max = {}", self.return_max)?;
        writeln!(f, "return_std = {}", self.return_std)?;
        writeln!(f, "length_mean = {}", self.length_mean)?;
        writeln!(f, "invalid_actions = {}", self.invalid_actions)?;
        write!(f, "duplicate_pickups = {}", self.duplicate_pickups)
    }
}

/// Loads a checkpoint and evaluates it greedily on the configured environment.
pub fn eval_command(
    checkpoint_path: &Path,
    config: &ExperimentConfig,
    episodes: usize,
) -> Result<EvalSummary, HarnessError> {
    let net = checkpoint::load(checkpoint_path)?;
    evaluate(&net, config, episodes)
}

/// Runs `episodes` greedy episodes under `config.env`, `config.guidance`, `config.seed`.
pub fn evaluate(
    net: &ActorCritic,
    config: &ExperimentConfig,
    episodes: usize,
) -> Result<EvalSummary, HarnessError> {
    match config.env {
        EnvKind::CardGame => evaluate_env(net, config, CardGame::new(), episodes),
        EnvKind::GridWorld => evaluate_env(net, config, GridWorld::new(config.grid_config()), episodes),
    }
}

fn evaluate_env<E: ConstraintModel>(
    net: &ActorCritic,
    config: &ExperimentConfig,
    env: E,
    episodes: usize,
) -> Result<EvalSummary, HarnessError> {
    let spec = net.spec();
    if spec.input_size() != env.observation_size() || spec.action_count != env.action_count() {
        return Err(HarnessError::Mismatch(format!(
            "network takes {} inputs and {} actions, {} has {} and {}",
            spec.input_size(),
            spec.action_count,
            config.env,
            env.observation_size(),
            env.action_count()
        )));
    }
    let mut guided = match config.step_cap {
        Some(cap) => GuidedEnv::new(env, config.guidance, cap)?,
        None => GuidedEnv::with_default_cap(env, config.guidance),
    };
    let mut seeds = ChaCha8Rng::seed_from_u64(config.seed);
    // greedy selection never draws from this
    let mut unused = ChaCha8Rng::seed_from_u64(0);

    let mut summary = EvalSummary {
        episodes,
        ..EvalSummary::default()
    };
    if episodes == 0 {
        return Ok(summary);
    }
    let mut returns = Vec::with_capacity(episodes);
    let mut total_length = 0usize;
    for _ in 0..episodes {
        let trace = run_guided_episode(
            &mut guided,
            net,
            seeds.next_u64(),
            ActionSelection::Greedy,
            &mut unused,
        )?;
        summary.invalid_actions += trace.invalid_actions();
        summary.duplicate_pickups += trace.duplicate_pickups();
        total_length += trace.length;
        returns.push(trace.total_return);
    }
    let n = episodes as f64;
    summary.return_mean = returns.iter().sum::<f64>() / n;
    summary.return_max = returns.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    summary.return_std =
        (returns.iter().map(|r| (r - summary.return_mean).powi(2)).sum::<f64>() / n).sqrt();
    summary.length_mean = total_length as f64 / n;
    Ok(summary)
}
