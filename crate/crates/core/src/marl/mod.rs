//! Multi-agent learning over the simulator: observation encoding, the
//! in-process environment, replay, QMIX and IQL learners, and the training
//! loop.
//!
//! Agents are ordered engines first, then lights. Engine actions are indexed
//! `TurnChoice(0..K)`, `Continue`, `Wait` where `K` is the graph's largest
//! out-degree; light actions are `Hold`, `Switch`.

mod agents;
mod checkpoint;
mod env;
mod learner;
mod mixer;
mod obs;
mod replay;
mod train;

use serde::{Deserialize, Serialize};

pub use agents::{masked_argmax, AgentNets};
pub use checkpoint::{
    load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CheckpointManifest, CHECKPOINT_MAGIC,
    CHECKPOINT_VERSION,
};
pub use env::{Observations, RescueEnv, StepOutcome};
pub use learner::{IqlModel, LearnerConfig, Model, QmixGradients, QmixModel};
pub use mixer::{Mixer, MixerCache, MixerGradients};
pub use obs::{encode_observation, global_state, ENGINE_OBS_DIM, LIGHT_OBS_DIM};
pub use replay::{JointTransition, ReplayBuffer};
pub use train::{run_episode, train, EpisodeResult, EpisodeLog, TrainLog};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AgentKind {
    FireEngine,
    TrafficLight,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub agent_id: String,
    pub kind: AgentKind,
    /// Position among agents of the same kind (engine order or light order).
    pub index: usize,
    pub obs_dim: usize,
    pub action_count: usize,
}

/// One spec per agent, engines first.
pub fn agent_specs(engines: usize, lights: usize, turn_choices: usize) -> Vec<AgentSpec> {
    let engine = (0..engines).map(|i| AgentSpec {
        agent_id: format!("engine_{i}"),
        kind: AgentKind::FireEngine,
        index: i,
        obs_dim: ENGINE_OBS_DIM,
        action_count: turn_choices + 2,
    });
    let light = (0..lights).map(|i| AgentSpec {
        agent_id: format!("light_{i}"),
        kind: AgentKind::TrafficLight,
        index: i,
        obs_dim: LIGHT_OBS_DIM,
        action_count: 2,
    });
    engine.chain(light).collect()
}

pub fn state_dim(specs: &[AgentSpec]) -> usize {
    specs.iter().map(|s| s.obs_dim).sum::<usize>() + 1
}
