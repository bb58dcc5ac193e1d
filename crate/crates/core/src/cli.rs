//! Experiment harness behind the `rescue` binary: training, evaluation,
//! serving and trace replay.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{Scenario, TrainConfig};
use crate::error::{Error, Result};
use crate::marl::{load_checkpoint, run_episode, save_checkpoint, train, RescueEnv, TrainLog};
use crate::server::{serve_forever, ServerConfig};
use crate::sim::{Phase, TraceRecord, TraceWriter, VehicleKind};

/// Process exit code for a command result: 0 ok, 1 bad input, 2 runtime failure.
pub fn exit_code<T>(result: &Result<T>) -> i32 {
    match result {
        Ok(_) => 0,
        Err(e) if e.is_validation() => 1,
        Err(_) => 2,
    }
}

/// Replaces the scenario's seed list with a single seed.
pub fn load_scenario(path: &Path, seed: Option<u64>) -> Result<Arc<Scenario>> {
    let mut scenario = Scenario::load(path)?;
    if let Some(seed) = seed {
        scenario.config.seeds = vec![seed];
    }
    Ok(Arc::new(scenario))
}

#[derive(Debug, Clone)]
pub struct TrainOutputs {
    pub rewards: PathBuf,
    pub checkpoint: PathBuf,
    pub trace: PathBuf,
    pub log: TrainLog,
}

/// Trains and writes `rewards_<strategy>.csv`, `model_<strategy>.ckpt` and the
/// final episode's trace `trace_<strategy>.jsonl` into the output directory
/// (`out`, else the train config's `out_dir`, else `runs`).
pub fn cmd_train(
    scenario: &Path,
    train_config: &Path,
    out: Option<&Path>,
    seed: Option<u64>,
    episodes: Option<usize>,
) -> Result<TrainOutputs> {
    let scenario = load_scenario(scenario, None)?;
    let mut cfg = TrainConfig::load(train_config)?;
    if seed.is_some() {
        cfg.seed = seed;
    }
    if let Some(e) = episodes {
        cfg.episodes = e;
    }
    let dir = out
        .map(Path::to_path_buf)
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("runs"));
    std::fs::create_dir_all(&dir)?;
    let name = cfg.strategy.name();
    let trace = dir.join(format!("trace_{name}.jsonl"));
    let mut writer = TraceWriter::new(BufWriter::new(File::create(&trace)?));
    let (log, model) = train(scenario.clone(), &cfg, Some(&mut writer))?;
    writer.into_inner().flush()?;
    let rewards = dir.join(format!("rewards_{name}.csv"));
    std::fs::write(&rewards, log.to_csv())?;
    let checkpoint = dir.join(format!("model_{name}.ckpt"));
    let env = RescueEnv::new(scenario)?;
    save_checkpoint(&checkpoint, &model, env.state_dim())?;
    Ok(TrainOutputs {
        rewards,
        checkpoint,
        trace,
        log,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeMetrics {
    pub seed: u64,
    #[serde(rename = "return")]
    pub ret: f64,
    pub steps: u32,
    /// Ticks each engine needed to reach the fire; `None` if it did not.
    pub arrival_ticks: Vec<Option<u32>>,
    pub collisions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalSummary {
    pub episodes: Vec<EpisodeMetrics>,
    pub mean_return: Option<f64>,
    /// Mean over all engine arrivals.
    pub mean_steps_to_arrival: Option<f64>,
    pub arrival_rate: Option<f64>,
    pub collisions: usize,
}

impl EvalSummary {
    pub fn from_episodes(episodes: Vec<EpisodeMetrics>) -> Self {
        let n = episodes.len() as f64;
        let arrivals: Vec<f64> = episodes
            .iter()
            .flat_map(|e| e.arrival_ticks.iter().flatten().map(|&t| f64::from(t)))
            .collect();
        let engine_slots: usize = episodes.iter().map(|e| e.arrival_ticks.len()).sum();
        Self {
            mean_return: (!episodes.is_empty()).then(|| episodes.iter().map(|e| e.ret).sum::<f64>() / n),
            mean_steps_to_arrival: (!arrivals.is_empty()).then(|| arrivals.iter().sum::<f64>() / arrivals.len() as f64),
            arrival_rate: (engine_slots > 0).then(|| arrivals.len() as f64 / engine_slots as f64),
            collisions: episodes.iter().map(|e| e.collisions).sum(),
            episodes,
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("episode,seed,return,steps,arrival_ticks,collisions\n");
        for (i, e) in self.episodes.iter().enumerate() {
            let ticks: Vec<String> = e
                .arrival_ticks
                .iter()
                .map(|t| t.map_or("-".to_string(), |t| t.to_string()))
                .collect();
            let _ = writeln!(s, "{i},{},{},{},{},{}", e.seed, e.ret, e.steps, ticks.join(";"), e.collisions);
        }
        let fmt = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.3}"));
        let _ = writeln!(
            s,
            "mean_return={} mean_steps_to_arrival={} arrival_rate={} collisions={}",
            fmt(self.mean_return),
            fmt(self.mean_steps_to_arrival),
            fmt(self.arrival_rate),
            self.collisions
        );
        s
    }
}

/// Greedy rollouts of a checkpoint, cycling through the scenario's seeds.
pub fn cmd_eval(scenario: &Path, checkpoint: &Path, episodes: usize, seed: Option<u64>) -> Result<EvalSummary> {
    let scenario = load_scenario(scenario, seed)?;
    let (manifest, model) = load_checkpoint(checkpoint)?;
    let mut env = RescueEnv::new(scenario.clone())?;
    if manifest.specs != env.specs() || manifest.state_dim != env.state_dim() {
        return Err(Error::validation(format!(
            "checkpoint agents ({} agents, state {}) do not match the scenario ({} agents, state {})",
            manifest.specs.len(),
            manifest.state_dim,
            env.specs().len(),
            env.state_dim()
        )));
    }
    let seeds = &scenario.config.seeds;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut out = Vec::with_capacity(episodes);
    for i in 0..episodes {
        let seed = seeds[i % seeds.len()];
        let r = run_episode(&mut env, seed, model.agents(), 0.0, &mut rng, None)?;
        out.push(EpisodeMetrics {
            seed,
            ret: r.ret,
            steps: r.steps,
            arrival_ticks: r.arrival_ticks,
            collisions: r.collisions,
        });
    }
    Ok(EvalSummary::from_episodes(out))
}

/// Validates the scenario, then serves it on `127.0.0.1:port` until Ctrl-C.
pub fn cmd_serve(scenario: &Path, port: u16, seed: Option<u64>) -> Result<()> {
    let scenario = load_scenario(scenario, seed)?;
    serve_forever(ServerConfig {
        addr: SocketAddr::from(([127, 0, 0, 1], port)),
        default_scenario: Some(scenario),
        ..ServerConfig::default()
    })
}

pub const REPLAY_HEADER: &str = "tick,engine_distances,light_phases,reward,cumulative_reward,collisions";

/// Summarizes a JSONL trace into one CSV row per record. Engine distances
/// and light phases are `;`-separated in vehicle and light order.
pub fn replay<R: BufRead>(input: R) -> Result<String> {
    let mut out = String::from(REPLAY_HEADER);
    out.push('\n');
    let mut total = 0.0;
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: TraceRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            msg: e.to_string(),
        })?;
        total += rec.reward;
        let distances: Vec<String> = rec
            .vehicles
            .iter()
            .filter(|v| v.kind == VehicleKind::Special)
            .map(|v| v.target_distance.map_or("?".to_string(), |d| d.to_string()))
            .collect();
        let phases: Vec<&str> = rec
            .lights
            .iter()
            .map(|l| match l.phase {
                Phase::NSGreen => "NS",
                Phase::EWGreen => "EW",
            })
            .collect();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            rec.tick,
            distances.join(";"),
            phases.join(";"),
            rec.reward,
            total,
            rec.events.collisions.len()
        );
    }
    Ok(out)
}

pub fn cmd_replay(trace: &Path) -> Result<String> {
    replay(BufReader::new(File::open(trace)?))
}
