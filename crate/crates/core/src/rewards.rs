//! Fire-engine reward: goal bonus, collision penalty, step penalty and a
//! capped approach reward, summed into one team reward per tick.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardConfig {
    pub goal_bonus: f64,
    pub collision_penalty: f64,
    pub step_penalty: f64,
    pub approach_cap: f64,
    pub alpha: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            goal_bonus: 100.0,
            collision_penalty: 50.0,
            step_penalty: 0.1,
            approach_cap: 3.0,
            alpha: 1.0,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("goal_bonus", self.goal_bonus),
            ("collision_penalty", self.collision_penalty),
            ("step_penalty", self.step_penalty),
            ("approach_cap", self.approach_cap),
            ("alpha", self.alpha),
        ];
        for (name, value) in fields {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::config(format!("rewards.{name}"), "must be finite and non-negative"));
            }
        }
        if self.alpha == 0.0 {
            return Err(Error::config("rewards.alpha", "must be positive"));
        }
        if self.approach_cap == 0.0 {
            return Err(Error::config("rewards.approach_cap", "must be positive"));
        }
        Ok(())
    }

    /// `min(alpha * delta, cap)` for positive progress, else 0.
    pub fn approach(&self, delta: f64) -> f64 {
        if delta > 0.0 {
            (self.alpha * delta).min(self.approach_cap)
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineRewardInput {
    pub prev_dist: f64,
    pub new_dist: f64,
    pub arrived: bool,
    pub collided: bool,
}

pub fn engine_reward(input: &EngineRewardInput, cfg: &RewardConfig) -> Result<f64> {
    if !(input.prev_dist >= 0.0 && input.new_dist >= 0.0) {
        return Err(Error::validation(format!(
            "distances must be non-negative (prev {}, new {})",
            input.prev_dist, input.new_dist
        )));
    }
    if input.arrived && input.new_dist != 0.0 {
        return Err(Error::validation("an arrived engine must be at distance 0"));
    }
    let mut r = -cfg.step_penalty;
    if input.arrived {
        r += cfg.goal_bonus;
    }
    if input.collided {
        r -= cfg.collision_penalty;
    }
    r += cfg.approach(input.prev_dist - input.new_dist);
    Ok(r)
}

/// Team reward: the sum of per-engine rewards for engines active at the start
/// of the tick.
pub fn global_reward(inputs: &[EngineRewardInput], cfg: &RewardConfig) -> Result<f64> {
    if inputs.is_empty() {
        return Err(Error::validation("global reward needs at least one engine"));
    }
    inputs.iter().map(|i| engine_reward(i, cfg)).sum()
}
