use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::env::{select_action, ActionIndex, ActionSelection, AgentView, GuidedEnv};
use crate::guidance::{ActionMask, ConstraintModel, GuidanceMode};
use crate::neural::ActorCritic;

use super::PpoError;

/// Summary of one finished (terminated or truncated) episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeRecord {
    pub total_return: f64,
    pub length: usize,
    pub invalid_actions: usize,
    pub duplicate_pickups: usize,
}

/// A fixed set of guidance-wrapped environments that reset themselves.
///
/// Episode seeds come from a dedicated stream so the environment side is
/// reproducible independently of action sampling.
#[derive(Debug)]
pub struct VecEnv<E> {
    envs: Vec<GuidedEnv<E>>,
    views: Vec<AgentView>,
    seeds: ChaCha8Rng,
    running: Vec<EpisodeRecord>,
}

impl<E: ConstraintModel> VecEnv<E> {
    pub fn new<F>(
        num_envs: usize,
        make: F,
        mode: GuidanceMode,
        step_cap: Option<usize>,
        seed: u64,
    ) -> Result<Self, PpoError>
    where
        F: Fn() -> E,
    {
        let mut seeds = ChaCha8Rng::seed_from_u64(seed);
        let mut envs = Vec::with_capacity(num_envs);
        let mut views = Vec::with_capacity(num_envs);
        for _ in 0..num_envs {
            let env = make();
            let mut guided = match step_cap {
                Some(cap) => GuidedEnv::new(env, mode, cap)?,
                None => GuidedEnv::with_default_cap(env, mode),
            };
            views.push(guided.reset(seeds.next_u64()));
            envs.push(guided);
        }
        Ok(Self {
            envs,
            views,
            seeds,
            running: vec![EpisodeRecord::empty(); num_envs],
        })
    }

    pub fn len(&self) -> usize {
        self.envs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.envs.is_empty()
    }

    pub fn envs(&self) -> &[GuidedEnv<E>] {
        &self.envs
    }

    pub fn views(&self) -> &[AgentView] {
        &self.views
    }

    pub fn observation_size(&self) -> usize {
        self.views.first().map_or(0, |v| v.observation.len())
    }
}

impl EpisodeRecord {
    fn empty() -> Self {
        Self {
            total_return: 0.0,
            length: 0,
            invalid_actions: 0,
            duplicate_pickups: 0,
        }
    }
}

/// Transitions of one rollout, stored step-major: index `t * num_envs + env`.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutBuffer {
    pub num_envs: usize,
    pub rollout_len: usize,
    pub observation_size: usize,
    pub observations: Vec<f64>,
    pub actions: Vec<ActionIndex>,
    /// Log-probability of the action under the (possibly masked) behaviour policy.
    pub log_probs: Vec<f64>,
    pub rewards: Vec<f64>,
    /// Episode ended (terminated or truncated) with this transition.
    pub dones: Vec<bool>,
    pub values: Vec<f64>,
    /// Present when action masking was active during collection.
    pub masks: Option<Vec<ActionMask>>,
    /// Value of the observation following the last step, per environment.
    pub bootstrap_values: Vec<f64>,
    pub episodes: Vec<EpisodeRecord>,
    pub invalid_action_count: usize,
    pub duplicate_pickup_count: usize,
}

impl RolloutBuffer {
    pub fn new(num_envs: usize, rollout_len: usize, observation_size: usize, masked: bool) -> Self {
        let n = num_envs * rollout_len;
        Self {
            num_envs,
            rollout_len,
            observation_size,
            observations: Vec::with_capacity(n * observation_size),
            actions: Vec::with_capacity(n),
            log_probs: Vec::with_capacity(n),
            rewards: Vec::with_capacity(n),
            dones: Vec::with_capacity(n),
            values: Vec::with_capacity(n),
            masks: masked.then(|| Vec::with_capacity(n)),
            bootstrap_values: vec![0.0; num_envs],
            episodes: Vec::new(),
            invalid_action_count: 0,
            duplicate_pickup_count: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.num_envs * self.rollout_len
    }

    pub fn is_full(&self) -> bool {
        self.len() == self.capacity()
    }

    pub fn observation(&self, index: usize) -> &[f64] {
        &self.observations[index * self.observation_size..(index + 1) * self.observation_size]
    }

    pub fn mask(&self, index: usize) -> Option<&ActionMask> {
        self.masks.as_ref().map(|m| &m[index])
    }

    pub fn index(&self, step: usize, env: usize) -> usize {
        step * self.num_envs + env
    }
}

/// Steps every environment `rollout_len` times with actions sampled from `net`.
pub fn collect_rollout<E, R>(
    vec_env: &mut VecEnv<E>,
    net: &ActorCritic,
    rollout_len: usize,
    rng: &mut R,
) -> Result<RolloutBuffer, PpoError>
where
    E: ConstraintModel,
    R: Rng + ?Sized,
{
    let num_envs = vec_env.len();
    let masked = vec_env
        .envs
        .first()
        .is_some_and(|e| e.mode() == GuidanceMode::ActionMask);
    let mut buffer = RolloutBuffer::new(num_envs, rollout_len, vec_env.observation_size(), masked);

    for _ in 0..rollout_len {
        for e in 0..num_envs {
            let view = &vec_env.views[e];
            let out = net.forward(view.observation.values())?;
            let (action, probs) =
                select_action(&out.logits, view.mask.as_ref(), ActionSelection::Sample, rng)?;

            buffer
                .observations
                .extend_from_slice(view.observation.values());
            buffer.actions.push(action);
            buffer.log_probs.push(probs[action].ln());
            buffer.values.push(out.value);
            if let Some(masks) = buffer.masks.as_mut() {
                masks.push(view.mask.clone().expect("mask present under action masking"));
            }

            let step = vec_env.envs[e].act(action)?;
            let outcome = step.outcome;
            buffer.rewards.push(outcome.reward);
            buffer.dones.push(outcome.is_done());

            let record = &mut vec_env.running[e];
            record.total_return += outcome.reward;
            record.length += 1;
            if outcome.invalid_action {
                record.invalid_actions += 1;
                buffer.invalid_action_count += 1;
            }
            if outcome.duplicate_pickup {
                record.duplicate_pickups += 1;
                buffer.duplicate_pickup_count += 1;
            }

            vec_env.views[e] = if outcome.is_done() {
                buffer.episodes.push(std::mem::replace(record, EpisodeRecord::empty()));
                let seed = vec_env.seeds.next_u64();
                vec_env.envs[e].reset(seed)
            } else {
                vec_env.envs[e].view()
            };
        }
    }
    for (e, view) in vec_env.views.iter().enumerate() {
        buffer.bootstrap_values[e] = net.forward(view.observation.values())?.value;
    }
    Ok(buffer)
}
