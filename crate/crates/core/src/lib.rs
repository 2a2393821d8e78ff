//! Constraint-guided reinforcement learning: environments, guidance wrappers,
//! a small actor-critic network library, PPO, and an experiment harness.

pub mod card_game;
pub mod constraint;
pub mod env;
pub mod grid_world;
pub mod guidance;
pub mod neural;
pub mod ppo;
pub mod harness;
