use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::SearchError;
use crate::sim::{EnvId, EnvironmentSpec};

pub const REWARD_SYSTEM_PROMPT: &str = "You are a reward engineer. You write reward functions for reinforcement \
learning tasks in a small expression language. Reply with exactly one fenced block tagged reward.";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskPrompt {
    pub l_task: String,
    pub l_safety: String,
    pub environment_summary: String,
}

fn description(env: EnvId) -> &'static str {
    match env {
        EnvId::SprintCart => {
            "A 1-D cart driven by a single actuator with first-order lag. The body has a sprung pitch mode \
             excited by acceleration. Observations: forward velocity, pitch, pitch rate, actuator state, \
             episode phase. Action: motor command in [-1, 1]."
        }
        EnvId::SpinDisk => {
            "A disk held by a two-finger grip and spun by a torque motor. Grip friction couples motor torque \
             into the disk; slipping lets the disk drift off center and eventually drop. Observations: disk \
             angular velocity, offset, offset velocity, finger state, episode phase. Action: torque command in [-1, 1]."
        }
        EnvId::GlobeBalance => {
            "A planar inverted pendulum standing on a rolling ball. The actuator pushes the pendulum base \
             along the ball; the episode ends when the pendulum tilts too far. Observations: ball position, \
             ball velocity, tilt, tilt rate, episode phase. Action: base force in [-1, 1]."
        }
    }
}

/// Environment description, feature catalog and the reward grammar.
pub fn environment_summary(spec: &EnvironmentSpec) -> String {
    let mut t = String::new();
    let _ = writeln!(t, "Environment {}: {}", spec.env_id, description(spec.env_id));
    let _ = writeln!(t, "Episodes last {} steps of {} s.", spec.horizon, spec.dt);
    let _ = writeln!(t, "Per-step features available to the reward: {}.", spec.feature_catalog.join(", "));
    t.push_str(
        "Write the reward as one or more lines `component <name> = <expr>`. Expressions use + - * / ^, \
         unary minus, parentheses, numbers, feature names and the functions exp, abs, sqrt, min, max, \
         clip(x, lo, hi) and indicator(a < b). Exponents must be numeric literals. The per-step reward is \
         the sum of all components.\n",
    );
    t
}

impl TaskPrompt {
    /// Shipped task and safety instructions for an environment.
    pub fn builtin(spec: &EnvironmentSpec) -> Self {
        let (task, safety) = match spec.env_id {
            EnvId::SprintCart => (
                "Write a reward function that makes the cart move forward at a steady 2.0 m/s.",
                "The policy will be deployed on hardware. Include terms that keep actions smooth, keep the \
                 action magnitude bounded, and penalize squared torque, so that the motion stays safe and \
                 steady.",
            ),
            EnvId::SpinDisk => (
                "Write a reward function that spins the disk as fast as possible about its axis without dropping it.",
                "The policy will be deployed on hardware. Penalize the disk drifting or dropping, keep actions \
                 smooth, and cap the rotation reward so that the grip stays safe.",
            ),
            EnvId::GlobeBalance => (
                "Write a reward function that keeps the pendulum upright on the ball for as long as possible.",
                "The policy will be deployed on hardware. Penalize large actions and jerky changes so the \
                 balancing motion stays smooth.",
            ),
        };
        Self { l_task: task.to_string(), l_safety: safety.to_string(), environment_summary: environment_summary(spec) }
    }

    pub fn validate(&self) -> Result<(), SearchError> {
        if self.l_task.trim().is_empty() {
            return Err(SearchError::InvalidConfig("l_task is empty".into()));
        }
        Ok(())
    }

    /// `l_task`, then `l_safety`, then the environment summary.
    pub fn render(&self) -> String {
        let mut t = self.l_task.clone();
        if !self.l_safety.is_empty() {
            t.push_str("\n\n");
            t.push_str(&self.l_safety);
        }
        t.push_str("\n\n");
        t.push_str(&self.environment_summary);
        t
    }
}
