//! Environment contract and the guidance-aware agent/environment loop.
//!
//! Environments never talk to a policy directly. [`GuidedEnv`] owns the
//! interaction: it hands the agent a (possibly masked) observation and an
//! optional action mask, then post-checks the chosen action before it reaches
//! the simulator.

use rand::Rng;
use thiserror::Error;

use crate::guidance::{apply_mask_to_policy, softmax, ActionMask, ConstraintModel, GuidanceMode};

pub type ActionIndex = usize;

/// Agent-visible state as a flat feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation(Vec<f64>);

impl Observation {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl From<Vec<f64>> for Observation {
    fn from(values: Vec<f64>) -> Self {
        Self(values)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub observation: Observation,
    pub reward: f64,
    pub terminated: bool,
    pub truncated: bool,
    pub invalid_action: bool,
    pub duplicate_pickup: bool,
}

impl StepOutcome {
    pub fn is_done(&self) -> bool {
        self.terminated || self.truncated
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EnvError {
    #[error("step called on a finished episode; reset is required first")]
    EpisodeFinished,
    #[error("action {action} is out of range for an environment with {action_count} actions")]
    ActionOutOfRange { action: usize, action_count: usize },
    #[error("step cap must be at least 1")]
    ZeroStepCap,
    #[error("invalid action distribution: {0}")]
    Distribution(String),
}

/// A discrete-action episodic simulator.
pub trait Environment {
    fn observation_size(&self) -> usize;

    fn action_count(&self) -> usize;

    /// Wrapper step cap used when the caller does not supply one.
    fn default_step_cap(&self) -> usize;

    /// Re-initializes the episode deterministically from `seed`.
    fn reset(&mut self, seed: u64) -> Observation;

    fn step(&mut self, action: ActionIndex) -> Result<StepOutcome, EnvError>;

    /// Encoding of the current ground-truth state.
    fn observe(&self) -> Observation;
}

/// Anything that maps an observation to action scores.
pub trait Policy {
    fn action_logits(&self, observation: &Observation) -> Vec<f64>;
}

/// Ignores the observation and scores every action equally.
#[derive(Debug, Clone, Copy)]
pub struct UniformPolicy {
    pub action_count: usize,
}

impl Policy for UniformPolicy {
    fn action_logits(&self, _observation: &Observation) -> Vec<f64> {
        vec![0.0; self.action_count]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionSelection {
    Greedy,
    Sample,
}

/// Turns logits (and an optional mask) into a distribution and picks an action.
///
/// Returns the action together with the distribution it was drawn from.
/// Masked actions have probability exactly zero and are never returned.
pub fn select_action<R: Rng + ?Sized>(
    logits: &[f64],
    mask: Option<&ActionMask>,
    selection: ActionSelection,
    rng: &mut R,
) -> Result<(ActionIndex, Vec<f64>), EnvError> {
    let probs = match mask {
        Some(mask) => {
            apply_mask_to_policy(logits, mask).map_err(|e| EnvError::Distribution(e.to_string()))?
        }
        None => softmax(logits),
    };
    let action = match selection {
        ActionSelection::Greedy => argmax_positive(&probs),
        ActionSelection::Sample => sample_index(&probs, rng.gen::<f64>()),
    };
    Ok((action, probs))
}

/// Highest-probability entry, lowest index on ties, never a zero entry.
fn argmax_positive(probs: &[f64]) -> usize {
    let mut best = None;
    for (i, &p) in probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        match best {
            Some((_, bp)) if p <= bp => {}
            _ => best = Some((i, p)),
        }
    }
    best.map(|(i, _)| i).unwrap_or(0)
}

/// Inverse-CDF sampling with `u` in `[0, 1)`; zero-probability entries are skipped.
pub(crate) fn sample_index(probs: &[f64], u: f64) -> usize {
    let mut cumulative = 0.0;
    let mut last_positive = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        cumulative += p;
        last_positive = i;
        if u < cumulative {
            return i;
        }
    }
    // rounding left u above the final cumulative sum
    last_positive
}

/// What the agent gets to see before choosing an action.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentView {
    pub observation: Observation,
    pub mask: Option<ActionMask>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GuidedStep {
    /// Action that actually reached the environment.
    pub executed_action: ActionIndex,
    pub outcome: StepOutcome,
}

/// Wraps an environment with one guidance model and a step cap.
#[derive(Debug, Clone)]
pub struct GuidedEnv<E> {
    env: E,
    mode: GuidanceMode,
    step_cap: usize,
    steps: usize,
    done: bool,
}

impl<E: ConstraintModel> GuidedEnv<E> {
    pub fn new(env: E, mode: GuidanceMode, step_cap: usize) -> Result<Self, EnvError> {
        if step_cap == 0 {
            return Err(EnvError::ZeroStepCap);
        }
        Ok(Self {
            env,
            mode,
            step_cap,
            steps: 0,
            done: true,
        })
    }

    pub fn with_default_cap(env: E, mode: GuidanceMode) -> Self {
        let cap = env.default_step_cap().max(1);
        Self {
            env,
            mode,
            step_cap: cap,
            steps: 0,
            done: true,
        }
    }

    pub fn inner(&self) -> &E {
        &self.env
    }

    pub fn mode(&self) -> GuidanceMode {
        self.mode
    }

    pub fn step_cap(&self) -> usize {
        self.step_cap
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn reset(&mut self, seed: u64) -> AgentView {
        self.env.reset(seed);
        self.steps = 0;
        self.done = false;
        self.view()
    }

    /// Observation (after any observation mask) and action mask for the current state.
    pub fn view(&self) -> AgentView {
        let truth = self.env.observe();
        let observation = match self.mode {
            GuidanceMode::ObservationMask => self.env.mask_observation(&truth),
            _ => truth,
        };
        let mask = match self.mode {
            GuidanceMode::ActionMask => Some(self.env.action_mask(&observation)),
            _ => None,
        };
        AgentView { observation, mask }
    }

    /// Applies action replacement (if active), steps the environment and
    /// enforces the step cap.
    pub fn act(&mut self, agent_action: ActionIndex) -> Result<GuidedStep, EnvError> {
        if self.done {
            return Err(EnvError::EpisodeFinished);
        }
        let action_count = self.env.action_count();
        if agent_action >= action_count {
            return Err(EnvError::ActionOutOfRange {
                action: agent_action,
                action_count,
            });
        }
        let executed_action = match self.mode {
            GuidanceMode::ActionReplacement => {
                let truth = self.env.observe();
                self.env.replace_action(&truth, agent_action)
            }
            _ => agent_action,
        };
        let mut outcome = self.env.step(executed_action)?;
        self.steps += 1;
        if !outcome.terminated && self.steps >= self.step_cap {
            outcome.truncated = true;
        }
        self.done = outcome.is_done();
        Ok(GuidedStep {
            executed_action,
            outcome,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    /// Observation as delivered to the policy.
    pub observation: Observation,
    /// Action chosen by the policy.
    pub agent_action: ActionIndex,
    /// Action executed by the environment.
    pub action: ActionIndex,
    pub reward: f64,
    pub terminated: bool,
    pub truncated: bool,
    pub invalid_action: bool,
    pub duplicate_pickup: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EpisodeTrace {
    pub transitions: Vec<Transition>,
    pub total_return: f64,
    pub length: usize,
}

impl EpisodeTrace {
    pub fn invalid_actions(&self) -> usize {
        self.transitions.iter().filter(|t| t.invalid_action).count()
    }

    pub fn duplicate_pickups(&self) -> usize {
        self.transitions.iter().filter(|t| t.duplicate_pickup).count()
    }
}

/// Runs one episode of `policy` on `env` under the given guidance model.
pub fn run_episode<E, P, R>(
    env: E,
    policy: &P,
    guidance: GuidanceMode,
    step_cap: usize,
    seed: u64,
    selection: ActionSelection,
    rng: &mut R,
) -> Result<EpisodeTrace, EnvError>
where
    E: ConstraintModel,
    P: Policy + ?Sized,
    R: Rng + ?Sized,
{
    let mut guided = GuidedEnv::new(env, guidance, step_cap)?;
    run_guided_episode(&mut guided, policy, seed, selection, rng)
}

/// Same as [`run_episode`] but reuses an existing wrapper.
pub fn run_guided_episode<E, P, R>(
    guided: &mut GuidedEnv<E>,
    policy: &P,
    seed: u64,
    selection: ActionSelection,
    rng: &mut R,
) -> Result<EpisodeTrace, EnvError>
where
    E: ConstraintModel,
    P: Policy + ?Sized,
    R: Rng + ?Sized,
{
    let mut view = guided.reset(seed);
    let mut trace = EpisodeTrace::default();
    loop {
        let logits = policy.action_logits(&view.observation);
        let (agent_action, _) = select_action(&logits, view.mask.as_ref(), selection, rng)?;
        let step = guided.act(agent_action)?;
        let outcome = step.outcome;
        trace.total_return += outcome.reward;
        trace.transitions.push(Transition {
            observation: view.observation,
            agent_action,
            action: step.executed_action,
            reward: outcome.reward,
            terminated: outcome.terminated,
            truncated: outcome.truncated,
            invalid_action: outcome.invalid_action,
            duplicate_pickup: outcome.duplicate_pickup,
        });
        if outcome.is_done() {
            break;
        }
        view = guided.view();
    }
    trace.length = trace.transitions.len();
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::card_game::CardGame;
    use crate::grid_world::{GridConfig, GridWorld};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sample_index_skips_zero_entries() {
        let probs = [0.0, 0.5, 0.0, 0.5];
        assert_eq!(sample_index(&probs, 0.0), 1);
        assert_eq!(sample_index(&probs, 0.49), 1);
        assert_eq!(sample_index(&probs, 0.5), 3);
        assert_eq!(sample_index(&probs, 0.999_999_999), 3);
        // above total mass due to rounding
        assert_eq!(sample_index(&[0.3, 0.3, 0.0], 0.7), 1);
    }

    #[test]
    fn greedy_prefers_lowest_index_on_ties() {
        assert_eq!(argmax_positive(&[0.25, 0.25, 0.25, 0.25]), 0);
        assert_eq!(argmax_positive(&[0.0, 0.5, 0.5]), 1);
    }

    #[test]
    fn zero_step_cap_is_rejected() {
        let err = GuidedEnv::new(CardGame::new(), GuidanceMode::None, 0).unwrap_err();
        assert_eq!(err, EnvError::ZeroStepCap);
    }

    #[test]
    fn stepping_a_finished_episode_is_an_error() {
        let mut guided = GuidedEnv::new(CardGame::new(), GuidanceMode::None, 1).unwrap();
        assert_eq!(guided.act(0).unwrap_err(), EnvError::EpisodeFinished);
        guided.reset(3);
        let step = guided.act(0).unwrap();
        assert!(step.outcome.truncated);
        assert_eq!(guided.act(0).unwrap_err(), EnvError::EpisodeFinished);
        guided.reset(4);
        assert!(guided.act(0).is_ok());
    }

    #[test]
    fn out_of_range_action_is_an_error() {
        let mut guided = GuidedEnv::with_default_cap(CardGame::new(), GuidanceMode::None);
        guided.reset(0);
        assert_eq!(
            guided.act(32).unwrap_err(),
            EnvError::ActionOutOfRange {
                action: 32,
                action_count: 32
            }
        );
    }

    #[test]
    fn trace_return_is_sum_of_rewards_and_respects_cap() {
        let policy = UniformPolicy { action_count: 32 };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for seed in 0..20 {
            let trace = run_episode(
                CardGame::new(),
                &policy,
                GuidanceMode::None,
                50,
                seed,
                ActionSelection::Sample,
                &mut rng,
            )
            .unwrap();
            let sum: f64 = trace.transitions.iter().map(|t| t.reward).sum();
            assert!((trace.total_return - sum).abs() <= 1e-12);
            assert!(trace.length <= 50);
            assert_eq!(trace.length, trace.transitions.len());
        }
    }

    #[test]
    fn unguided_wrapper_matches_plain_loop() {
        let policy = UniformPolicy { action_count: 4 };
        let config = GridConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let trace = run_episode(
            GridWorld::new(config),
            &policy,
            GuidanceMode::None,
            300,
            11,
            ActionSelection::Sample,
            &mut rng,
        )
        .unwrap();

        let mut env = GridWorld::new(config);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut obs = env.reset(11);
        for t in &trace.transitions {
            assert_eq!(t.observation, obs);
            let logits = policy.action_logits(&obs);
            let (a, _) = select_action(&logits, None, ActionSelection::Sample, &mut rng).unwrap();
            assert_eq!(a, t.action);
            assert_eq!(a, t.agent_action);
            let out = env.step(a).unwrap();
            assert_eq!(out.reward.to_bits(), t.reward.to_bits());
            obs = out.observation;
        }
    }

    #[test]
    fn greedy_traces_are_deterministic() {
        let policy = UniformPolicy { action_count: 32 };
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            run_episode(
                CardGame::new(),
                &policy,
                GuidanceMode::ActionMask,
                1000,
                77,
                ActionSelection::Greedy,
                &mut rng,
            )
            .unwrap()
        };
        assert_eq!(run(), run());
    }
}
