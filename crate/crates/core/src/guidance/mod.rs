//! Constraint guidance at the three agent/environment interfaces.
//!
//! * observation mask: rewrites the observation before the agent sees it,
//!   changing as little as possible;
//! * action replacement: post-checks the chosen action and substitutes a safe
//!   one when it violates the environment's constraints;
//! * action mask: a per-action allow vector folded into the policy's
//!   distribution before selection.
//!
//! Each environment supplies its models by implementing [`ConstraintModel`].

mod card;
mod grid;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::env::{ActionIndex, Environment, Observation};

pub use card::{
    build_observation_mask_cop, card_action_mask, mask_card_observation, masked_hand_from_cop,
    replace_card_action,
};
pub use grid::{grid_action_mask, mask_grid_observation, replace_grid_action};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GuidanceError {
    #[error("mask has {mask} entries but there are {logits} logits")]
    LengthMismatch { mask: usize, logits: usize },
    #[error("action mask allows no action")]
    EmptyMask,
    #[error("unknown guidance mode `{0}` (expected none, obs-mask, action-replace or action-mask)")]
    UnknownMode(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum GuidanceMode {
    #[default]
    None,
    ObservationMask,
    ActionReplacement,
    ActionMask,
}

impl GuidanceMode {
    pub const ALL: [GuidanceMode; 4] = [
        GuidanceMode::None,
        GuidanceMode::ObservationMask,
        GuidanceMode::ActionReplacement,
        GuidanceMode::ActionMask,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            GuidanceMode::None => "none",
            GuidanceMode::ObservationMask => "obs-mask",
            GuidanceMode::ActionReplacement => "action-replace",
            GuidanceMode::ActionMask => "action-mask",
        }
    }
}

impl fmt::Display for GuidanceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GuidanceMode {
    type Err = GuidanceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        GuidanceMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| GuidanceError::UnknownMode(s.to_string()))
    }
}

/// Which actions are available in the current state.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ActionMask(Vec<bool>);

impl ActionMask {
    pub fn all(action_count: usize) -> Self {
        Self(vec![true; action_count])
    }

    pub fn from_allowed(allowed: Vec<bool>) -> Self {
        Self(allowed)
    }

    pub fn allows(&self, action: ActionIndex) -> bool {
        self.0.get(action).copied().unwrap_or(false)
    }

    pub fn allowed_count(&self) -> usize {
        self.0.iter().filter(|&&a| a).count()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn entries(&self) -> &[bool] {
        &self.0
    }

    /// The mask as `0.0` / `1.0` scores.
    pub fn scores(&self) -> Vec<f64> {
        self.0.iter().map(|&a| if a { 1.0 } else { 0.0 }).collect()
    }
}

/// Guidance models for an environment. The defaults are the identity models.
pub trait ConstraintModel: Environment {
    fn mask_observation(&self, observation: &Observation) -> Observation {
        observation.clone()
    }

    fn replace_action(&self, _observation: &Observation, action: ActionIndex) -> ActionIndex {
        action
    }

    fn action_mask(&self, _observation: &Observation) -> ActionMask {
        ActionMask::all(self.action_count())
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Softmax of `logits`, multiplied by `mask` and renormalised.
///
/// Computed as a softmax restricted to the allowed entries, which is the same
/// distribution but cannot underflow to all zeros. Masked entries are exactly 0.
pub fn apply_mask_to_policy(logits: &[f64], mask: &ActionMask) -> Result<Vec<f64>, GuidanceError> {
    if mask.len() != logits.len() {
        return Err(GuidanceError::LengthMismatch {
            mask: mask.len(),
            logits: logits.len(),
        });
    }
    let max = logits
        .iter()
        .zip(mask.entries())
        .filter(|(_, &allowed)| allowed)
        .map(|(&z, _)| z)
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(GuidanceError::EmptyMask);
    }
    let exps: Vec<f64> = logits
        .iter()
        .zip(mask.entries())
        .map(|(&z, &allowed)| if allowed { (z - max).exp() } else { 0.0 })
        .collect();
    let total: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}
