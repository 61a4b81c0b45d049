//! Core library: toy physics, reward language, PPO, reward search,
//! physics-prior sweeps, domain-randomization synthesis, black-box baselines
//! and the experiment pipeline.

pub mod dr;
pub mod llm;
pub mod opt;
pub mod pipeline;
pub mod rapp;
pub mod reward;
pub mod rl;
pub mod search;
pub mod seed;
pub mod sim;

pub use dr::{DomainRandomizationConfig, Interval, Provenance};
pub use reward::{parse_reward, RewardProgram};
pub use rl::{PolicyCheckpoint, TrainConfig};
pub use sim::{EnvId, EnvironmentSpec, PhysicsAssignment, TargetWorldSpec};
