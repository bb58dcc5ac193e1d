use std::sync::Arc;

use super::obs::{encode_observation, global_state};
use super::{agent_specs, AgentKind, AgentSpec};
use crate::config::Scenario;
use crate::error::{Error, Result};
use crate::rewards::{global_reward, EngineRewardInput};
use crate::sim::{EngineAction, LightAction, Status, StepEvents, TraceRecord, WorldState};

/// Per-agent view of the world after a reset or step.
#[derive(Debug, Clone, PartialEq)]
pub struct Observations {
    pub obs: Vec<Vec<f64>>,
    /// Actions with an effect in the current state, per agent.
    pub masks: Vec<Vec<bool>>,
    pub state: Vec<f64>,
    /// False for engines that already reached the fire.
    pub active: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub observations: Observations,
    pub reward: f64,
    pub done: bool,
    pub status: Status,
    pub events: StepEvents,
}

/// The simulator wrapped as a multi-agent environment with team rewards.
#[derive(Debug, Clone)]
pub struct RescueEnv {
    scenario: Arc<Scenario>,
    world: WorldState,
    specs: Vec<AgentSpec>,
    turn_choices: usize,
}

impl RescueEnv {
    pub fn new(scenario: Arc<Scenario>) -> Result<Self> {
        let world = scenario.build_world(scenario.config.seeds[0])?;
        let turn_choices = scenario.graph().max_out_degree();
        let specs = agent_specs(scenario.engine_count(), scenario.light_nodes().len(), turn_choices);
        Ok(Self {
            scenario,
            world,
            specs,
            turn_choices,
        })
    }

    pub fn scenario(&self) -> &Arc<Scenario> {
        &self.scenario
    }

    pub fn specs(&self) -> &[AgentSpec] {
        &self.specs
    }

    pub fn state_dim(&self) -> usize {
        super::state_dim(&self.specs)
    }

    pub fn world(&self) -> &WorldState {
        &self.world
    }

    pub fn turn_choices(&self) -> usize {
        self.turn_choices
    }

    pub fn reset(&mut self, seed: u64) -> Result<Observations> {
        self.world = self.scenario.build_world(seed)?;
        self.observe()
    }

    pub fn status(&self) -> Status {
        self.world.is_terminal()
    }

    pub fn observe(&self) -> Result<Observations> {
        let obs = self
            .specs
            .iter()
            .map(|s| encode_observation(&self.world, s))
            .collect::<Result<Vec<_>>>()?;
        let state = global_state(&self.world, &obs);
        let masks = self.specs.iter().map(|s| self.mask(s)).collect();
        let active = self.specs.iter().map(|s| self.is_active(s)).collect();
        Ok(Observations { obs, masks, state, active })
    }

    fn is_active(&self, spec: &AgentSpec) -> bool {
        match spec.kind {
            AgentKind::FireEngine => self.world.vehicles[self.world.engines()[spec.index]].active,
            AgentKind::TrafficLight => true,
        }
    }

    fn mask(&self, spec: &AgentSpec) -> Vec<bool> {
        match spec.kind {
            AgentKind::FireEngine => self.world.engine_action_mask(spec.index, self.turn_choices),
            AgentKind::TrafficLight => {
                let l = &self.world.lights[spec.index];
                vec![true, l.time_in_phase >= l.min_green]
            }
        }
    }

    pub fn decode_engine_action(&self, index: usize) -> EngineAction {
        if index < self.turn_choices {
            EngineAction::TurnChoice(index)
        } else if index == self.turn_choices {
            EngineAction::Continue
        } else {
            EngineAction::Wait
        }
    }

    /// Applies one action index per agent (engines first, then lights).
    pub fn step(&mut self, actions: &[usize]) -> Result<StepOutcome> {
        if actions.len() != self.specs.len() {
            return Err(Error::validation(format!(
                "expected {} actions, got {}",
                self.specs.len(),
                actions.len()
            )));
        }
        for (spec, &a) in self.specs.iter().zip(actions) {
            if a >= spec.action_count {
                return Err(Error::validation(format!(
                    "action {a} for {} is outside 0..{}",
                    spec.agent_id, spec.action_count
                )));
            }
        }
        if let Status::Done(reason) = self.world.is_terminal() {
            return Err(Error::validation(format!("episode already finished ({reason:?})")));
        }
        let engines = self.scenario.engine_count();
        let engine_actions: Vec<EngineAction> =
            actions[..engines].iter().map(|&a| self.decode_engine_action(a)).collect();
        let light_actions: Vec<LightAction> = actions[engines..]
            .iter()
            .map(|&a| if a == 1 { LightAction::Switch } else { LightAction::Hold })
            .collect();

        let before: Vec<Option<u32>> = self
            .world
            .engines()
            .iter()
            .map(|&v| self.world.vehicles[v].active.then(|| self.world.distance_to_destination(v)))
            .collect();
        let events = self.world.step(&light_actions, &engine_actions)?;
        let inputs: Vec<EngineRewardInput> = self
            .world
            .engines()
            .iter()
            .zip(&before)
            .filter_map(|(&v, prev)| {
                prev.map(|prev| {
                    let arrived = events.arrivals.contains(&v);
                    EngineRewardInput {
                        prev_dist: f64::from(prev),
                        new_dist: if arrived { 0.0 } else { f64::from(self.world.distance_to_destination(v)) },
                        arrived,
                        collided: events.collisions.iter().any(|&(e, _)| e == v),
                    }
                })
            })
            .collect();
        let reward = global_reward(&inputs, &self.scenario.config.rewards)?;
        let status = self.world.is_terminal();
        Ok(StepOutcome {
            observations: self.observe()?,
            reward,
            done: status != Status::Running,
            status,
            events,
        })
    }

    pub fn snapshot(&self, events: &StepEvents, reward: f64) -> TraceRecord {
        self.world.snapshot(events, reward)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ScenarioConfig;

    fn one_cell() -> Arc<Scenario> {
        let cfg = ScenarioConfig::from_json(
            r#"{
                "graph": {"explicit": {
                    "nodes": [{"x": 0, "y": 0}, {"x": 1, "y": 0}],
                    "edges": [{"from": 0, "to": 1, "len": 1}, {"from": 1, "to": 0, "len": 1}]
                }},
                "fire_target": 1,
                "engine_starts": [0],
                "max_steps": 10
            }"#,
        )
        .unwrap();
        Arc::new(Scenario::new(cfg).unwrap())
    }

    #[test]
    fn one_cell_arrival_reward() {
        let mut env = RescueEnv::new(one_cell()).unwrap();
        let first = env.reset(0).unwrap();
        assert_eq!(first.masks[0], vec![true, false, true]);
        let out = env.step(&[0]).unwrap();
        assert!(out.done);
        assert_eq!(out.status, Status::Done(crate::sim::DoneReason::AllArrived));
        assert!((out.reward - 100.9).abs() < 1e-9);
        assert!(env.step(&[0]).is_err());
    }

    #[test]
    fn waiting_costs_step_penalty() {
        let mut env = RescueEnv::new(one_cell()).unwrap();
        env.reset(0).unwrap();
        let out = env.step(&[2]).unwrap();
        assert!(!out.done);
        assert!((out.reward + 0.1).abs() < 1e-12);
        assert!(env.step(&[3]).is_err());
        assert!(env.step(&[]).is_err());
    }

    #[test]
    fn zero_horizon_is_done_immediately() {
        let mut cfg = one_cell().config.clone();
        cfg.max_steps = 0;
        let mut env = RescueEnv::new(Arc::new(Scenario::new(cfg).unwrap())).unwrap();
        env.reset(0).unwrap();
        assert_eq!(env.status(), Status::Done(crate::sim::DoneReason::Horizon));
    }
}
