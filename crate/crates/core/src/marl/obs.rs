use super::{AgentKind, AgentSpec};
use crate::error::{Error, Result};
use crate::roadnet::{Heading, NodeId};
use crate::sim::{Phase, WorldState};

/// active flag, at-node flag, own (x, y), target (x, y), target offset
/// (dx, dy), distance, four rays, four heading bits.
pub const ENGINE_OBS_DIM: usize = 17;
/// phase (2), time in phase, four approach queues, nearest engine distance,
/// four engine-on-approach bits.
pub const LIGHT_OBS_DIM: usize = 12;

struct Frame {
    min_x: f64,
    min_y: f64,
    span_x: f64,
    span_y: f64,
    diameter: f64,
}

impl Frame {
    fn of(world: &WorldState) -> Self {
        let (x0, y0, x1, y1) = world.graph().bounds();
        Self {
            min_x: x0 as f64,
            min_y: y0 as f64,
            span_x: f64::from((x1 - x0).max(1)),
            span_y: f64::from((y1 - y0).max(1)),
            diameter: f64::from(world.table().diameter().max(1)),
        }
    }

    fn norm(&self, x: f64, y: f64) -> (f64, f64) {
        ((x - self.min_x) / self.span_x, (y - self.min_y) / self.span_y)
    }

    fn node(&self, world: &WorldState, node: NodeId) -> (f64, f64) {
        let n = world.graph().node(node);
        self.norm(n.x as f64, n.y as f64)
    }

    fn dist(&self, cells: u32) -> f64 {
        (f64::from(cells) / self.diameter).min(1.0)
    }
}

pub fn encode_observation(world: &WorldState, agent: &AgentSpec) -> Result<Vec<f64>> {
    match agent.kind {
        AgentKind::FireEngine => encode_engine(world, agent.index),
        AgentKind::TrafficLight => encode_light(world, agent.index),
    }
}

fn encode_engine(world: &WorldState, index: usize) -> Result<Vec<f64>> {
    let &vid = world
        .engines()
        .get(index)
        .ok_or_else(|| Error::validation(format!("engine {index} does not exist")))?;
    let mut obs = vec![0.0; ENGINE_OBS_DIM];
    let v = &world.vehicles[vid];
    if !v.active {
        return Ok(obs);
    }
    let frame = Frame::of(world);
    let graph = world.graph();
    let edge = graph.edge(v.pos.edge);
    let (tail, head) = (graph.node(edge.from), graph.node(edge.to));
    let t = f64::from(v.pos.progress) / f64::from(edge.len);
    let (x, y) = frame.norm(
        tail.x as f64 + t * f64::from(head.x - tail.x),
        tail.y as f64 + t * f64::from(head.y - tail.y),
    );
    let (tx, ty) = frame.node(world, v.destination);
    let sense = world.sense(vid)?;
    let range = f64::from(world.sensing_range);

    obs[0] = 1.0;
    obs[1] = if v.pos.progress == edge.len { 1.0 } else { 0.0 };
    obs[2] = x;
    obs[3] = y;
    obs[4] = tx;
    obs[5] = ty;
    obs[6] = tx - x;
    obs[7] = ty - y;
    obs[8] = frame.dist(world.distance_to_destination(vid));
    for (slot, d) in obs[9..13].iter_mut().zip(sense.distances()) {
        *slot = if range > 0.0 { f64::from(d) / range } else { 0.0 };
    }
    obs[13 + graph.heading(v.pos.edge).index()] = 1.0;
    Ok(obs)
}

fn encode_light(world: &WorldState, index: usize) -> Result<Vec<f64>> {
    let light = world
        .lights
        .get(index)
        .ok_or_else(|| Error::validation(format!("light {index} does not exist")))?;
    let graph = world.graph();
    let frame = Frame::of(world);
    let mut obs = vec![0.0; LIGHT_OBS_DIM];
    obs[match light.phase {
        Phase::NSGreen => 0,
        Phase::EWGreen => 1,
    }] = 1.0;
    obs[2] = if light.min_green == 0 {
        1.0
    } else {
        (f64::from(light.time_in_phase) / f64::from(light.min_green)).min(1.0)
    };
    // approach k carries traffic travelling along Heading::ALL[k]
    for h in Heading::ALL {
        if let Some(e) = graph.in_edge_heading(light.node, h) {
            let cap = f64::from(graph.edge(e).len);
            obs[3 + h.index()] = (world.edge_load(e) as f64 / cap).min(1.0);
        }
    }
    let mut nearest = 1.0f64;
    for &vid in world.engines() {
        let v = &world.vehicles[vid];
        if !v.active {
            continue;
        }
        if let Some(d) = world.table().distance(graph, v.pos, light.node) {
            nearest = nearest.min(frame.dist(d));
        }
        let e = graph.edge(v.pos.edge);
        if e.to == light.node && v.pos.progress < e.len {
            obs[8 + graph.heading(v.pos.edge).index()] = 1.0;
        }
    }
    obs[7] = nearest;
    Ok(obs)
}

/// Concatenated observations plus normalized episode time.
pub fn global_state(world: &WorldState, observations: &[Vec<f64>]) -> Vec<f64> {
    let mut s: Vec<f64> = observations.iter().flatten().copied().collect();
    let t = if world.max_steps == 0 {
        1.0
    } else {
        (f64::from(world.tick) / f64::from(world.max_steps)).min(1.0)
    };
    s.push(t);
    s
}
