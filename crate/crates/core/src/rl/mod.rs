//! Compact PPO with GAE over small feed-forward actor-critics.

mod fitness;
pub mod network;
mod policy;
mod ppo;
mod train;

use thiserror::Error;

pub use fitness::{
    evaluate_policy, fitness, mean_fitness_fixed, AssignmentSource, FitnessMeter, FitnessReport, DISTANCE_CAP,
};
pub use policy::{ObsNormalizer, PolicyCheckpoint, HIDDEN, LOG_STD_MAX, LOG_STD_MIN};
pub use ppo::{gae, gaussian_log_prob, loss_and_grad, normalize_advantages, ppo_update, Batch, LossParts, PpoLearner, UpdateStats};
pub use train::{train_policy, TrainConfig, TrainingLog, TrainingLogRow};

use crate::reward::RewardError;
use crate::sim::{EnvId, SimError};

#[derive(Debug, Error)]
pub enum RlError {
    #[error("length mismatch: {rewards} rewards, {values} values, {dones} done flags")]
    LengthMismatch { rewards: usize, values: usize, dones: usize },
    #[error("non-finite gradient")]
    NonFiniteGradient,
    #[error("training diverged at update {update}")]
    DivergedTraining { update: usize, log: Box<TrainingLog> },
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("trace is from {got}, expected {expected}")]
    EnvMismatch { expected: EnvId, got: EnvId },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Reward(#[from] RewardError),
}
