//! Reference reward programs shipped with each environment.

use std::collections::BTreeMap;

use super::{parse_reward, RewardError, RewardProgram};
use crate::sim::{EnvId, EnvironmentSpec};

/// `(env, name, source)` for every shipped program.
pub const BUILTIN_SOURCES: &[(EnvId, &str, &str)] = &[
    (EnvId::SprintCart, "human_forward", include_str!("../../rewards/sprint_cart.human_forward.rwd")),
    (EnvId::SprintCart, "eureka_forward", include_str!("../../rewards/sprint_cart.eureka_forward.rwd")),
    (EnvId::SprintCart, "dreureka_forward", include_str!("../../rewards/sprint_cart.dreureka_forward.rwd")),
    (EnvId::SpinDisk, "spin_human", include_str!("../../rewards/spin_disk.spin_human.rwd")),
    (EnvId::SpinDisk, "spin_dreureka", include_str!("../../rewards/spin_disk.spin_dreureka.rwd")),
    (EnvId::GlobeBalance, "globe_final", include_str!("../../rewards/globe_balance.globe_final.rwd")),
];

pub fn builtin_rewards(env: EnvId) -> BTreeMap<String, RewardProgram> {
    let catalog = EnvironmentSpec::builtin(env).feature_catalog;
    BUILTIN_SOURCES
        .iter()
        .filter(|(e, _, _)| *e == env)
        .map(|(_, name, src)| {
            let p = parse_reward(src, &catalog).unwrap_or_else(|e| panic!("builtin {name} does not parse: {e}"));
            (name.to_string(), p)
        })
        .collect()
}

pub fn builtin_reward(env: EnvId, name: &str) -> Result<RewardProgram, RewardError> {
    builtin_rewards(env).remove(name).ok_or_else(|| RewardError::UnknownBuiltin(name.to_string()))
}
