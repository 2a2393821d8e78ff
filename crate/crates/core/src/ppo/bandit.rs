use crate::env::{ActionIndex, EnvError, Environment, Observation, StepOutcome};
use crate::guidance::ConstraintModel;

/// One-step episodes with two arms; the better arm pays 1, the other 0.
#[derive(Debug, Clone)]
pub struct TwoArmedBandit {
    better_arm: ActionIndex,
    done: bool,
}

impl TwoArmedBandit {
    pub fn new(better_arm: ActionIndex) -> Self {
        assert!(better_arm < 2);
        Self {
            better_arm,
            done: true,
        }
    }

    pub fn better_arm(&self) -> ActionIndex {
        self.better_arm
    }
}

impl Environment for TwoArmedBandit {
    fn observation_size(&self) -> usize {
        1
    }

    fn action_count(&self) -> usize {
        2
    }

    fn default_step_cap(&self) -> usize {
        1
    }

    fn reset(&mut self, _seed: u64) -> Observation {
        self.done = false;
        self.observe()
    }

    fn step(&mut self, action: ActionIndex) -> Result<StepOutcome, EnvError> {
        if self.done {
            return Err(EnvError::EpisodeFinished);
        }
        if action >= 2 {
            return Err(EnvError::ActionOutOfRange {
                action,
                action_count: 2,
            });
        }
        self.done = true;
        Ok(StepOutcome {
            observation: self.observe(),
            reward: if action == self.better_arm { 1.0 } else { 0.0 },
            terminated: true,
            truncated: false,
            invalid_action: false,
            duplicate_pickup: false,
        })
    }

    fn observe(&self) -> Observation {
        Observation::new(vec![1.0])
    }
}

impl ConstraintModel for TwoArmedBandit {}
