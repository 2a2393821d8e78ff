//! PPO with GAE over vectorised, guidance-wrapped environments.

mod bandit;
mod buffer;
mod gae;
mod update;

use thiserror::Error;

use crate::env::EnvError;
use crate::neural::NetError;

pub use bandit::TwoArmedBandit;
pub use buffer::{collect_rollout, EpisodeRecord, RolloutBuffer, VecEnv};
pub use gae::{compute_gae, gae_direct_sum, normalize_advantages, Advantages};
pub use update::{ppo_update, UpdateStats};

#[derive(Debug, Error)]
pub enum PpoError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error("invalid PPO config: {field} {reason}")]
    Config { field: &'static str, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PpoConfig {
    pub gamma: f64,
    pub lambda: f64,
    pub clip_eps: f64,
    pub epochs: usize,
    pub minibatches: usize,
    pub learning_rate: f64,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub rollout_len: usize,
    pub num_envs: usize,
    pub grad_clip_norm: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            lambda: 0.95,
            clip_eps: 0.2,
            epochs: 4,
            minibatches: 8,
            learning_rate: 2.5e-4,
            entropy_coef: 0.01,
            value_coef: 0.5,
            rollout_len: 128,
            num_envs: 16,
            grad_clip_norm: 0.5,
        }
    }
}

impl PpoConfig {
    pub fn batch_size(&self) -> usize {
        self.num_envs * self.rollout_len
    }

    pub fn validate(&self) -> Result<(), PpoError> {
        let bad = |field: &'static str, reason: &str| {
            Err(PpoError::Config {
                field,
                reason: reason.to_string(),
            })
        };
        if !(0.0..1.0).contains(&self.gamma) {
            return bad("gamma", "must lie in [0, 1)");
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return bad("lambda", "must lie in [0, 1]");
        }
        if !(self.clip_eps > 0.0 && self.clip_eps.is_finite()) {
            return bad("clip_eps", "must be positive");
        }
        if self.epochs == 0 {
            return bad("epochs", "must be at least 1");
        }
        if self.minibatches == 0 {
            return bad("minibatches", "must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate", "must be positive");
        }
        if !(self.entropy_coef >= 0.0 && self.entropy_coef.is_finite()) {
            return bad("entropy_coef", "must be non-negative");
        }
        if !(self.value_coef >= 0.0 && self.value_coef.is_finite()) {
            return bad("value_coef", "must be non-negative");
        }
        if self.rollout_len == 0 {
            return bad("rollout_len", "must be at least 1");
        }
        if self.num_envs == 0 {
            return bad("num_envs", "must be at least 1");
        }
        if !(self.grad_clip_norm > 0.0 && self.grad_clip_norm.is_finite()) {
            return bad("grad_clip_norm", "must be positive");
        }
        if self.minibatches > self.batch_size() {
            return bad("minibatches", "exceeds num_envs * rollout_len");
        }
        Ok(())
    }
}

/// Discounted return `sum_k gamma^k r_k` of a finite reward sequence.
pub fn compute_return(rewards: &[f64], gamma: f64) -> f64 {
    rewards.iter().rev().fold(0.0, |acc, &r| r + gamma * acc)
}
