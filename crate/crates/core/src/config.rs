//! Scenario and training configuration files (JSON).

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rewards::RewardConfig;
use crate::roadnet::{build_grid, DistanceTable, Edge, Node, NodeId, RoadGraph};
use crate::sim::{WorldParams, WorldState, DEFAULT_MIN_GREEN, DEFAULT_SENSING_RANGE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphConfig {
    Grid { width: usize, height: usize, edge_len: u32 },
    Explicit { nodes: Vec<Node>, edges: Vec<Edge> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LightsConfig {
    pub nodes: Vec<NodeId>,
    #[serde(default = "default_min_green")]
    pub min_green: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoisePlacement {
    pub from: NodeId,
    pub to: NodeId,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub graph: GraphConfig,
    /// Where the fire broke out; every engine drives here.
    pub fire_target: NodeId,
    pub engine_starts: Vec<NodeId>,
    #[serde(default)]
    pub lights: Option<LightsConfig>,
    #[serde(default)]
    pub ordinary_vehicles: usize,
    #[serde(default)]
    pub noise: Vec<NoisePlacement>,
    #[serde(default)]
    pub rewards: RewardConfig,
    pub max_steps: u32,
    #[serde(default = "default_sensing_range")]
    pub sensing_range: u32,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
}

fn default_min_green() -> u32 {
    DEFAULT_MIN_GREEN
}

fn default_sensing_range() -> u32 {
    DEFAULT_SENSING_RANGE
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Json(j) => Error::config(path.display().to_string(), j.to_string()),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }
}

/// A validated scenario with its road graph built.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    graph: Arc<RoadGraph>,
    table: Arc<DistanceTable>,
}

impl Scenario {
    pub fn new(config: ScenarioConfig) -> Result<Self> {
        let graph = match &config.graph {
            GraphConfig::Grid { width, height, edge_len } => build_grid(*width, *height, *edge_len),
            GraphConfig::Explicit { nodes, edges } => RoadGraph::new(nodes.clone(), edges.clone()),
        }
        .map_err(|e| match e {
            Error::Validation(msg) => Error::config("graph", msg),
            other => other,
        })?;
        let n = graph.node_count();
        let node_ok = |field: String, node: NodeId| {
            if node < n {
                Ok(())
            } else {
                Err(Error::config(field, format!("node {node} does not exist (graph has {n} nodes)")))
            }
        };
        node_ok("fire_target".into(), config.fire_target)?;
        if config.engine_starts.is_empty() {
            return Err(Error::config("engine_starts", "at least one fire engine is required"));
        }
        for (i, &s) in config.engine_starts.iter().enumerate() {
            node_ok(format!("engine_starts[{i}]"), s)?;
            if s == config.fire_target {
                return Err(Error::config(format!("engine_starts[{i}]"), "engine starts on the fire target"));
            }
        }
        if let Some(lights) = &config.lights {
            for (i, &node) in lights.nodes.iter().enumerate() {
                node_ok(format!("lights.nodes[{i}]"), node)?;
                if lights.nodes[..i].contains(&node) {
                    return Err(Error::config(format!("lights.nodes[{i}]"), format!("duplicate light node {node}")));
                }
            }
        }
        for (i, p) in config.noise.iter().enumerate() {
            if graph.find_edge(p.from, p.to).is_none() {
                return Err(Error::config(
                    format!("noise[{i}]"),
                    format!("edge {} -> {} does not exist", p.from, p.to),
                ));
            }
        }
        config.rewards.validate()?;
        if config.seeds.is_empty() {
            return Err(Error::config("seeds", "at least one seed is required"));
        }
        let table = DistanceTable::new(&graph);
        let scenario = Self {
            config,
            graph: Arc::new(graph),
            table: Arc::new(table),
        };
        // surfaces placement conflicts (over-capacity noise, unreachable targets)
        scenario.build_world(scenario.config.seeds[0])?;
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::new(ScenarioConfig::load(path)?)
    }

    pub fn graph(&self) -> &RoadGraph {
        &self.graph
    }

    pub fn table(&self) -> &DistanceTable {
        &self.table
    }

    pub fn engine_count(&self) -> usize {
        self.config.engine_starts.len()
    }

    pub fn light_nodes(&self) -> &[NodeId] {
        self.config.lights.as_ref().map_or(&[], |l| &l.nodes)
    }

    /// Fresh tick-0 world for `seed`.
    pub fn build_world(&self, seed: u64) -> Result<WorldState> {
        let c = &self.config;
        let mut world = WorldState::new(
            self.graph.clone(),
            self.table.clone(),
            WorldParams {
                fire_target: c.fire_target,
                max_steps: c.max_steps,
                sensing_range: c.sensing_range,
                seed,
            },
        )?;
        if let Some(lights) = &c.lights {
            for &node in &lights.nodes {
                world.add_light(node, lights.min_green)?;
            }
        }
        for &start in &c.engine_starts {
            world.place_engine(start)?;
        }
        let placements: Vec<_> = c
            .noise
            .iter()
            .map(|p| (self.graph.find_edge(p.from, p.to).expect("validated"), p.count))
            .collect();
        world.spawn_noise(&placements)?;
        world.spawn_ordinary(c.ordinary_vehicles)?;
        Ok(world)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Qmix,
    Iql,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Qmix => "qmix",
            Strategy::Iql => "iql",
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub strategy: Strategy,
    pub episodes: usize,
    pub updates_per_episode: usize,
    pub gamma: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub warmup: usize,
    /// Training steps between target-network copies.
    pub target_sync: usize,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Fraction of the episodes over which epsilon is annealed.
    pub epsilon_anneal: f64,
    pub hidden: Vec<usize>,
    pub mixer_embed: usize,
    pub hyper_hidden: usize,
    pub grad_clip: f64,
    pub double_q: bool,
    /// Master seed; falls back to the scenario's first seed.
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::Qmix,
            episodes: 100,
            updates_per_episode: 8,
            gamma: 0.99,
            lr: 5e-4,
            batch_size: 32,
            buffer_capacity: 5000,
            warmup: 500,
            target_sync: 200,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_anneal: 0.8,
            hidden: vec![64],
            mixer_embed: 32,
            hyper_hidden: 64,
            grad_clip: 10.0,
            double_q: true,
            seed: None,
            out_dir: None,
        }
    }
}

impl TrainConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Json(j) => Error::config(path.display().to_string(), j.to_string()),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::config("gamma", "must lie in [0, 1]"));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::config("lr", "must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size", "must be at least 1"));
        }
        if self.buffer_capacity < self.batch_size {
            return Err(Error::config("buffer_capacity", "must hold at least one batch"));
        }
        if self.target_sync == 0 {
            return Err(Error::config("target_sync", "must be at least 1"));
        }
        for (name, v) in [("epsilon_start", self.epsilon_start), ("epsilon_end", self.epsilon_end), ("epsilon_anneal", self.epsilon_anneal)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(name, "must lie in [0, 1]"));
            }
        }
        if self.hidden.iter().any(|&h| h == 0) {
            return Err(Error::config("hidden", "layer widths must be positive"));
        }
        if self.mixer_embed == 0 || self.hyper_hidden == 0 {
            return Err(Error::config("mixer_embed", "mixer widths must be positive"));
        }
        if !(self.grad_clip > 0.0) {
            return Err(Error::config("grad_clip", "must be positive"));
        }
        Ok(())
    }

    /// Linear schedule from `epsilon_start` to `epsilon_end` over the first
    /// `epsilon_anneal * episodes` episodes.
    pub fn epsilon(&self, episode: usize) -> f64 {
        let horizon = (self.epsilon_anneal * self.episodes as f64).round();
        if horizon <= 0.0 {
            return self.epsilon_end;
        }
        let frac = (episode as f64 / horizon).min(1.0);
        self.epsilon_start + (self.epsilon_end - self.epsilon_start) * frac
    }
}
