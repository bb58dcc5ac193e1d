use std::fmt::Write as _;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{AgentNets, JointTransition, Model, ReplayBuffer, RescueEnv};
use crate::config::{Scenario, Strategy, TrainConfig};
use crate::error::{Error, Result};
use crate::sim::{DoneReason, Status, StepEvents, TraceSink};

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeResult {
    /// Undiscounted sum of team rewards.
    pub ret: f64,
    pub transitions: Vec<JointTransition>,
    pub steps: u32,
    /// Tick at which each engine arrived, if it did.
    pub arrival_ticks: Vec<Option<u32>>,
    pub collisions: usize,
    pub status: Status,
}

/// Resets `env` with `seed` and plays one episode, acting epsilon-greedily.
pub fn run_episode<R: Rng + ?Sized>(
    env: &mut RescueEnv,
    seed: u64,
    agents: &AgentNets,
    epsilon: f64,
    rng: &mut R,
    mut trace: Option<&mut dyn TraceSink>,
) -> Result<EpisodeResult> {
    let mut obs = env.reset(seed)?;
    if let Some(sink) = trace.as_deref_mut() {
        sink.record(&env.snapshot(&StepEvents::default(), 0.0))?;
    }
    let engines: Vec<usize> = env.world().engines().to_vec();
    let mut result = EpisodeResult {
        ret: 0.0,
        transitions: Vec::new(),
        steps: 0,
        arrival_ticks: vec![None; engines.len()],
        collisions: 0,
        status: env.status(),
    };
    while result.status == Status::Running {
        let actions = agents.select_actions(&obs, epsilon, rng)?;
        let out = env.step(&actions)?;
        result.ret += out.reward;
        result.steps += 1;
        result.collisions += out.events.collisions.len();
        for v in &out.events.arrivals {
            if let Some(k) = engines.iter().position(|e| e == v) {
                result.arrival_ticks[k] = Some(env.world().tick);
            }
        }
        if let Some(sink) = trace.as_deref_mut() {
            sink.record(&env.snapshot(&out.events, out.reward))?;
        }
        let next = out.observations;
        result.transitions.push(JointTransition {
            obs: obs.obs,
            actions,
            reward: out.reward,
            next_obs: next.obs.clone(),
            state: obs.state,
            next_state: next.state.clone(),
            done: out.status == Status::Done(DoneReason::AllArrived),
            active: obs.active,
            next_active: next.active.clone(),
            next_masks: next.masks.clone(),
        });
        obs = next;
        result.status = out.status;
    }
    Ok(result)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeLog {
    pub episode: usize,
    pub strategy: Strategy,
    pub ret: f64,
    /// Mean training loss over the episode's updates; NaN before warm-up.
    pub mean_loss: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub rows: Vec<EpisodeLog>,
}

impl TrainLog {
    pub const HEADER: &'static str = "episode,strategy,return,mean_loss,epsilon";

    pub fn to_csv(&self) -> String {
        let mut s = String::from(Self::HEADER);
        s.push('\n');
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{},{},{}", r.episode, r.strategy, r.ret, r.mean_loss, r.epsilon);
        }
        s
    }

    pub fn returns(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.ret).collect()
    }

    /// Mean return over the last `window` episodes.
    pub fn final_mean(&self, window: usize) -> f64 {
        let tail = &self.rows[self.rows.len().saturating_sub(window)..];
        if tail.is_empty() {
            return f64::NAN;
        }
        tail.iter().map(|r| r.ret).sum::<f64>() / tail.len() as f64
    }
}

/// Trains a fresh model on `scenario`. The last episode is written to
/// `trace_last` when given.
pub fn train(
    scenario: Arc<Scenario>,
    cfg: &TrainConfig,
    mut trace_last: Option<&mut dyn TraceSink>,
) -> Result<(TrainLog, Model)> {
    cfg.validate()?;
    let seed = cfg.seed.unwrap_or(scenario.config.seeds[0]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut env = RescueEnv::new(scenario)?;
    let mut model = Model::build(env.specs(), env.state_dim(), cfg, &mut rng)?;
    let mut buffer = ReplayBuffer::new(cfg.buffer_capacity);
    let mut log = TrainLog::default();
    let ready = cfg.warmup.max(cfg.batch_size);
    for episode in 0..cfg.episodes {
        let epsilon = cfg.epsilon(episode);
        let world_seed: u64 = rng.random();
        let trace = if episode + 1 == cfg.episodes { trace_last.take() } else { None };
        let result = run_episode(&mut env, world_seed, model.agents(), epsilon, &mut rng, trace)?;
        for t in result.transitions {
            buffer.push(t);
        }
        let mut losses = Vec::new();
        if buffer.len() >= ready {
            for _ in 0..cfg.updates_per_episode {
                let batch = buffer.sample(cfg.batch_size, &mut rng)?;
                let loss = model.train_step(&batch).map_err(|e| match e {
                    Error::Divergence(msg) => Error::Divergence(format!("episode {episode}: {msg}")),
                    other => other,
                })?;
                losses.push(loss);
            }
        }
        let mean_loss = if losses.is_empty() {
            f64::NAN
        } else {
            losses.iter().sum::<f64>() / losses.len() as f64
        };
        log::debug!("episode {episode} return {:.3} loss {mean_loss:.5} eps {epsilon:.3}", result.ret);
        log.rows.push(EpisodeLog {
            episode,
            strategy: cfg.strategy,
            ret: result.ret,
            mean_loss,
            epsilon,
        });
    }
    Ok((log, model))
}
