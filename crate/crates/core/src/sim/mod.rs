//! Cell-based traffic simulation: vehicles, traffic lights, ray sensing and
//! the episode lifecycle.
//!
//! Every edge of length `L` has cells `0..=L`; cell `L` is the stop line in
//! front of the head node. A vehicle crossing an intersection lands on cell 1
//! of its next edge, so each tick of movement along a shortest route reduces
//! the graph distance to its destination by exactly one.

mod sense;
mod step;
mod trace;

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::roadnet::{DistanceTable, EdgeId, Heading, NodeId, Position, RoadGraph};

pub use sense::RaySense;
pub use trace::{LightRecord, TraceRecord, TraceSink, TraceWriter, VehicleRecord};

/// Default ray-sensing range in cells.
pub const DEFAULT_SENSING_RANGE: u32 = 5;
/// Default minimum green time in ticks.
pub const DEFAULT_MIN_GREEN: u32 = 5;

const FREE: u32 = u32::MAX;
const SPAWN_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VehicleKind {
    Ordinary,
    Noise,
    Special,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VehicleState {
    pub id: usize,
    pub kind: VehicleKind,
    pub pos: Position,
    /// Node sequence. Fixed at spawn for ordinary and noise vehicles; grows by
    /// one node per intersection for special vehicles.
    pub route: Vec<NodeId>,
    /// Index into `route` of the current edge's tail node.
    pub leg: usize,
    pub destination: NodeId,
    pub active: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    NSGreen,
    EWGreen,
}

impl Phase {
    pub fn flipped(self) -> Phase {
        match self {
            Phase::NSGreen => Phase::EWGreen,
            Phase::EWGreen => Phase::NSGreen,
        }
    }

    /// Whether traffic arriving along `heading` has green.
    pub fn allows(self, heading: Heading) -> bool {
        match self {
            Phase::NSGreen => heading.is_vertical(),
            Phase::EWGreen => !heading.is_vertical(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LightState {
    pub node: NodeId,
    pub phase: Phase,
    pub time_in_phase: u32,
    pub min_green: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LightAction {
    Hold,
    Switch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EngineAction {
    Continue,
    /// Take the k-th outgoing edge of the head node, ordered by target node id.
    TurnChoice(usize),
    Wait,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepEvents {
    pub arrivals: Vec<usize>,
    /// (special vehicle id, blocking vehicle id)
    pub collisions: Vec<(usize, usize)>,
    /// Special vehicles whose action was invalid and replaced by `Wait`.
    pub masked: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DoneReason {
    AllArrived,
    Horizon,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Running,
    Done(DoneReason),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WorldParams {
    pub fire_target: NodeId,
    pub max_steps: u32,
    pub sensing_range: u32,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    graph: Arc<RoadGraph>,
    table: Arc<DistanceTable>,
    pub tick: u32,
    pub vehicles: Vec<VehicleState>,
    pub lights: Vec<LightState>,
    pub fire_target: NodeId,
    pub max_steps: u32,
    pub sensing_range: u32,
    rng: ChaCha8Rng,
    /// vehicle indices of special vehicles, in engine order
    engines: Vec<usize>,
    light_at: Vec<Option<usize>>,
    cell_base: Vec<usize>,
    occupancy: Vec<u32>,
}

impl WorldState {
    pub fn new(graph: Arc<RoadGraph>, table: Arc<DistanceTable>, params: WorldParams) -> Result<Self> {
        if params.fire_target >= graph.node_count() {
            return Err(Error::validation(format!(
                "fire target {} is not a node",
                params.fire_target
            )));
        }
        let mut cell_base = Vec::with_capacity(graph.edge_count());
        let mut total = 0;
        for e in graph.edges() {
            cell_base.push(total);
            total += e.len as usize + 1;
        }
        let light_at = vec![None; graph.node_count()];
        Ok(Self {
            graph,
            table,
            tick: 0,
            vehicles: Vec::new(),
            lights: Vec::new(),
            fire_target: params.fire_target,
            max_steps: params.max_steps,
            sensing_range: params.sensing_range,
            rng: ChaCha8Rng::seed_from_u64(params.seed),
            engines: Vec::new(),
            light_at,
            cell_base,
            occupancy: vec![FREE; total],
        })
    }

    pub fn graph(&self) -> &RoadGraph {
        &self.graph
    }

    pub fn table(&self) -> &DistanceTable {
        &self.table
    }

    /// Vehicle indices of the special vehicles, in engine order.
    pub fn engines(&self) -> &[usize] {
        &self.engines
    }

    pub fn light_at(&self, node: NodeId) -> Option<&LightState> {
        self.light_at[node].map(|i| &self.lights[i])
    }

    pub fn add_light(&mut self, node: NodeId, min_green: u32) -> Result<()> {
        if node >= self.graph.node_count() {
            return Err(Error::validation(format!("light node {node} is not a node")));
        }
        if self.light_at[node].is_some() {
            return Err(Error::validation(format!("duplicate light at node {node}")));
        }
        self.light_at[node] = Some(self.lights.len());
        self.lights.push(LightState {
            node,
            phase: Phase::NSGreen,
            time_in_phase: 0,
            min_green,
        });
        Ok(())
    }

    /// Places a special vehicle on the stop line of the first free incoming
    /// edge of `start`, heading to the fire target.
    pub fn place_engine(&mut self, start: NodeId) -> Result<usize> {
        if start >= self.graph.node_count() {
            return Err(Error::validation(format!("engine start {start} is not a node")));
        }
        if start == self.fire_target {
            return Err(Error::validation(format!(
                "engine start {start} equals the fire target"
            )));
        }
        if self.table.node_distance(start, self.fire_target).is_none() {
            return Err(Error::NoRoute {
                src: start,
                dst: self.fire_target,
            });
        }
        let edge = self
            .graph
            .in_edges(start)
            .iter()
            .copied()
            .find(|&e| self.cell_free(e, self.graph.edge(e).len))
            .ok_or_else(|| {
                Error::validation(format!("engine start {start} has no free incoming stop line"))
            })?;
        let e = *self.graph.edge(edge);
        let id = self.push_vehicle(
            VehicleKind::Special,
            Position { edge, progress: e.len },
            vec![e.from, e.to],
            self.fire_target,
        );
        self.engines.push(id);
        Ok(id)
    }

    /// Adds `count` ordinary vehicles with uniformly drawn start/destination
    /// pairs, parked on cell 0 of their first route edge.
    pub fn spawn_ordinary(&mut self, count: usize) -> Result<()> {
        let n = self.graph.node_count();
        if count > 0 && n < 2 {
            return Err(Error::validation("ordinary vehicles need at least two nodes"));
        }
        for _ in 0..count {
            let mut placed = false;
            for _ in 0..SPAWN_ATTEMPTS {
                let start = self.rng.random_range(0..n);
                let mut dst = self.rng.random_range(0..n - 1);
                if dst >= start {
                    dst += 1;
                }
                let Ok(route) = self.table.route(&self.graph, start, dst) else {
                    continue;
                };
                let edge = self
                    .graph
                    .find_edge(route.nodes[0], route.nodes[1])
                    .expect("route edges exist");
                if self.cell_free(edge, 0) {
                    self.push_vehicle(
                        VehicleKind::Ordinary,
                        Position { edge, progress: 0 },
                        route.nodes,
                        dst,
                    );
                    placed = true;
                    break;
                }
            }
            if !placed {
                return Err(Error::validation("could not find a free spawn cell for an ordinary vehicle"));
            }
        }
        Ok(())
    }

    /// Queues noise vehicles on cells `0..count` of each placement edge. Each
    /// heads for a node one or two hops past the edge's head.
    pub fn spawn_noise(&mut self, placements: &[(EdgeId, usize)]) -> Result<()> {
        for &(edge, count) in placements {
            if edge >= self.graph.edge_count() {
                return Err(Error::validation(format!("noise edge {edge} does not exist")));
            }
            let e = *self.graph.edge(edge);
            if count > e.len as usize {
                return Err(Error::validation(format!(
                    "noise placement of {count} vehicles exceeds the {} cells of edge {edge}",
                    e.len
                )));
            }
            if let Some(cell) = (0..count as u32).find(|&c| !self.cell_free(edge, c)) {
                return Err(Error::validation(format!(
                    "noise placement on edge {edge} overlaps an occupied cell {cell}"
                )));
            }
            let candidates = self.nearby_destinations(e.from, e.to);
            if count > 0 && candidates.is_empty() {
                return Err(Error::validation(format!(
                    "edge {edge} has no destination within two hops of its head"
                )));
            }
            for cell in 0..count as u32 {
                let dst = candidates[self.rng.random_range(0..candidates.len())];
                let tail = self.table.route(&self.graph, e.to, dst)?;
                let mut route = vec![e.from];
                route.extend(tail.nodes);
                self.push_vehicle(
                    VehicleKind::Noise,
                    Position { edge, progress: cell },
                    route,
                    dst,
                );
            }
        }
        Ok(())
    }

    fn nearby_destinations(&self, tail: NodeId, head: NodeId) -> Vec<NodeId> {
        let mut out = Vec::new();
        for &e1 in self.graph.out_edges(head) {
            let a = self.graph.edge(e1).to;
            if a == tail {
                continue;
            }
            if !out.contains(&a) {
                out.push(a);
            }
            for &e2 in self.graph.out_edges(a) {
                let b = self.graph.edge(e2).to;
                if b != tail && b != head && !out.contains(&b) {
                    out.push(b);
                }
            }
        }
        out.sort_unstable();
        out
    }

    fn push_vehicle(&mut self, kind: VehicleKind, pos: Position, route: Vec<NodeId>, destination: NodeId) -> usize {
        let id = self.vehicles.len();
        self.vehicles.push(VehicleState {
            id,
            kind,
            pos,
            route,
            leg: 0,
            destination,
            active: true,
        });
        let c = self.cell(pos);
        self.occupancy[c] = id as u32;
        id
    }

    fn cell(&self, pos: Position) -> usize {
        self.cell_base[pos.edge] + pos.progress as usize
    }

    pub(crate) fn occupant(&self, edge: EdgeId, cell: u32) -> Option<usize> {
        match self.occupancy[self.cell_base[edge] + cell as usize] {
            FREE => None,
            v => Some(v as usize),
        }
    }

    pub fn cell_free(&self, edge: EdgeId, cell: u32) -> bool {
        self.occupant(edge, cell).is_none()
    }

    /// Number of occupied cells on `edge`.
    pub fn edge_load(&self, edge: EdgeId) -> usize {
        let base = self.cell_base[edge];
        let len = self.graph.edge(edge).len as usize;
        self.occupancy[base..=base + len].iter().filter(|&&v| v != FREE).count()
    }

    /// Graph distance from a vehicle to its destination, in cells.
    pub fn distance_to_destination(&self, vehicle: usize) -> u32 {
        let v = &self.vehicles[vehicle];
        self.table
            .distance(&self.graph, v.pos, v.destination)
            .expect("destinations are reachable by construction")
    }

    pub fn is_terminal(&self) -> Status {
        if self.engines.iter().all(|&i| !self.vehicles[i].active) {
            Status::Done(DoneReason::AllArrived)
        } else if self.tick >= self.max_steps {
            Status::Done(DoneReason::Horizon)
        } else {
            Status::Running
        }
    }

    /// Counts (edge, cell) slots held by more than one active vehicle.
    pub fn occupancy_violations(&self) -> usize {
        let mut seen = std::collections::HashSet::new();
        self.vehicles
            .iter()
            .filter(|v| v.active)
            .filter(|v| !seen.insert(v.pos))
            .count()
    }
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::*;
    use crate::roadnet::{Edge, Node};

    pub fn world_on(graph: RoadGraph, fire_target: NodeId, max_steps: u32, range: u32) -> WorldState {
        let table = DistanceTable::new(&graph);
        WorldState::new(
            Arc::new(graph),
            Arc::new(table),
            WorldParams {
                fire_target,
                max_steps,
                sensing_range: range,
                seed: 1,
            },
        )
        .unwrap()
    }

    /// Bidirectional line of `n` nodes along +x with segments of length `len`.
    pub fn line(n: usize, len: u32) -> RoadGraph {
        let nodes = (0..n).map(|i| Node { x: i as i32 * len as i32, y: 0 }).collect();
        let mut edges = Vec::new();
        for i in 0..n - 1 {
            edges.push(Edge { from: i, to: i + 1, len });
            edges.push(Edge { from: i + 1, to: i, len });
        }
        RoadGraph::new(nodes, edges).unwrap()
    }

    /// Places a vehicle directly; test-only.
    pub fn put(world: &mut WorldState, kind: VehicleKind, pos: Position, route: Vec<NodeId>, destination: NodeId) -> usize {
        let id = world.push_vehicle(kind, pos, route, destination);
        if kind == VehicleKind::Special {
            world.engines.push(id);
        }
        id
    }
}

#[cfg(test)]
mod tests {
    use super::testutil::*;
    use super::*;
    use crate::roadnet::{build_grid, shortest_path};

    #[test]
    fn spawn_ordinary_zero_is_noop() {
        let mut w = world_on(build_grid(3, 3, 4).unwrap(), 8, 10, 5);
        let before = w.clone();
        w.spawn_ordinary(0).unwrap();
        assert_eq!(w, before);
    }

    #[test]
    fn spawn_ordinary_routes_are_shortest() {
        let g = build_grid(3, 3, 4).unwrap();
        let table = DistanceTable::new(&g);
        let mut w = WorldState::new(
            Arc::new(g.clone()),
            Arc::new(table),
            WorldParams { fire_target: 8, max_steps: 10, sensing_range: 5, seed: 42 },
        )
        .unwrap();
        w.spawn_ordinary(10).unwrap();
        assert_eq!(w.vehicles.len(), 10);
        for v in &w.vehicles {
            let start = v.route[0];
            assert_ne!(start, v.destination);
            let oracle = shortest_path(&g, start, v.destination).unwrap();
            assert_eq!(v.route, oracle.nodes);
            assert_eq!(g.edge(v.pos.edge).from, start);
            assert_eq!(v.pos.progress, 0);
        }
        assert_eq!(w.occupancy_violations(), 0);
    }

    #[test]
    fn spawn_ordinary_is_deterministic() {
        let make = || {
            let mut w = world_on(build_grid(3, 3, 4).unwrap(), 8, 10, 5);
            w.spawn_ordinary(6).unwrap();
            w
        };
        assert_eq!(make(), make());
    }

    #[test]
    fn noise_fills_cells_from_zero() {
        let mut w = world_on(line(4, 5), 3, 10, 5);
        let before = w.clone();
        w.spawn_noise(&[]).unwrap();
        assert_eq!(w, before);

        let e = w.graph().find_edge(1, 2).unwrap();
        w.spawn_noise(&[(e, 5)]).unwrap();
        let cells: Vec<u32> = w.vehicles.iter().map(|v| v.pos.progress).collect();
        assert_eq!(cells, vec![0, 1, 2, 3, 4]);
        assert!(w.vehicles.iter().all(|v| v.pos.edge == e && v.kind == VehicleKind::Noise));
        assert!(w.vehicles.iter().all(|v| v.destination == 3));
    }

    #[test]
    fn noise_over_capacity_is_rejected() {
        let mut w = world_on(line(4, 3), 3, 10, 5);
        let e = w.graph().find_edge(0, 1).unwrap();
        let err = w.spawn_noise(&[(e, 4)]).unwrap_err();
        assert!(err.to_string().contains("exceeds"), "{err}");
    }

    #[test]
    fn engine_starts_on_incoming_stop_line() {
        let mut w = world_on(line(3, 2), 2, 10, 5);
        let id = w.place_engine(1).unwrap();
        let v = &w.vehicles[id];
        assert_eq!(w.graph().edge(v.pos.edge).to, 1);
        assert_eq!(v.pos.progress, 2);
        assert_eq!(w.distance_to_destination(id), 2);
        assert!(w.place_engine(2).is_err());
    }

    #[test]
    fn terminal_status() {
        let mut w = world_on(line(3, 2), 2, 4, 5);
        let id = w.place_engine(0).unwrap();
        assert_eq!(w.is_terminal(), Status::Running);
        w.tick = 4;
        assert_eq!(w.is_terminal(), Status::Done(DoneReason::Horizon));
        w.vehicles[id].active = false;
        assert_eq!(w.is_terminal(), Status::Done(DoneReason::AllArrived));
    }
}
