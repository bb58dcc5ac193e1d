//! Road network as a directed graph of intersections and cell-discretized
//! segments, with deterministic shortest-path planning.
//!
//! Path cost is edge length in cells. Among equal-cost routes the
//! lexicographically smallest node sequence wins, so every planner call is
//! reproducible.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type NodeId = usize;
pub type EdgeId = usize;

const UNREACHABLE: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub x: i32,
    pub y: i32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub from: NodeId,
    pub to: NodeId,
    pub len: u32,
}

/// Compass heading of a segment, quantized by its dominant axis. North is +y.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Heading {
    North,
    East,
    South,
    West,
}

impl Heading {
    pub const ALL: [Heading; 4] = [Heading::North, Heading::East, Heading::South, Heading::West];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn left(self) -> Heading {
        Heading::ALL[(self.index() + 3) % 4]
    }

    pub fn right(self) -> Heading {
        Heading::ALL[(self.index() + 1) % 4]
    }

    /// True for headings that travel along the north-south axis.
    pub fn is_vertical(self) -> bool {
        matches!(self, Heading::North | Heading::South)
    }

    fn from_delta(dx: i64, dy: i64) -> Heading {
        if dy.abs() >= dx.abs() {
            if dy >= 0 {
                Heading::North
            } else {
                Heading::South
            }
        } else if dx > 0 {
            Heading::East
        } else {
            Heading::West
        }
    }
}

/// A location on the network: `progress` cells travelled along `edge`.
/// `progress == len` is the stop line at the edge's head node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Position {
    pub edge: EdgeId,
    pub progress: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Route {
    pub nodes: Vec<NodeId>,
    pub length: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoadGraph {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    // outgoing edge ids per node, ordered by target node id
    out: Vec<Vec<EdgeId>>,
    incoming: Vec<Vec<EdgeId>>,
}

impl RoadGraph {
    pub fn new(nodes: Vec<Node>, edges: Vec<Edge>) -> Result<Self> {
        let n = nodes.len();
        let mut seen = HashSet::new();
        for (i, e) in edges.iter().enumerate() {
            if e.from >= n || e.to >= n {
                return Err(Error::validation(format!(
                    "edge {i} ({} -> {}) references a node outside 0..{n}",
                    e.from, e.to
                )));
            }
            if e.from == e.to {
                return Err(Error::validation(format!("edge {i} is a self-loop on node {}", e.from)));
            }
            if e.len == 0 {
                return Err(Error::validation(format!("edge {i} has zero length")));
            }
            if !seen.insert((e.from, e.to)) {
                return Err(Error::validation(format!(
                    "duplicate edge {} -> {}",
                    e.from, e.to
                )));
            }
        }
        let mut out = vec![Vec::new(); n];
        let mut incoming = vec![Vec::new(); n];
        for (i, e) in edges.iter().enumerate() {
            out[e.from].push(i);
            incoming[e.to].push(i);
        }
        for list in out.iter_mut() {
            list.sort_by_key(|&id| edges[id].to);
        }
        for list in incoming.iter_mut() {
            list.sort_by_key(|&id| edges[id].from);
        }
        Ok(Self {
            nodes,
            edges,
            out,
            incoming,
        })
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn edge(&self, id: EdgeId) -> &Edge {
        &self.edges[id]
    }

    /// Outgoing edges of `node`, ordered by target node id.
    pub fn out_edges(&self, node: NodeId) -> &[EdgeId] {
        &self.out[node]
    }

    /// Incoming edges of `node`, ordered by source node id.
    pub fn in_edges(&self, node: NodeId) -> &[EdgeId] {
        &self.incoming[node]
    }

    pub fn find_edge(&self, from: NodeId, to: NodeId) -> Option<EdgeId> {
        self.out
            .get(from)?
            .iter()
            .copied()
            .find(|&e| self.edges[e].to == to)
    }

    pub fn max_out_degree(&self) -> usize {
        self.out.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn heading(&self, edge: EdgeId) -> Heading {
        let e = &self.edges[edge];
        let (a, b) = (&self.nodes[e.from], &self.nodes[e.to]);
        Heading::from_delta(i64::from(b.x) - i64::from(a.x), i64::from(b.y) - i64::from(a.y))
    }

    /// First outgoing edge of `node` with the given heading (lowest target id).
    pub fn out_edge_heading(&self, node: NodeId, heading: Heading) -> Option<EdgeId> {
        self.out[node].iter().copied().find(|&e| self.heading(e) == heading)
    }

    /// First incoming edge of `node` with the given heading (lowest source id).
    pub fn in_edge_heading(&self, node: NodeId, heading: Heading) -> Option<EdgeId> {
        self.incoming[node]
            .iter()
            .copied()
            .find(|&e| self.heading(e) == heading)
    }

    /// Bounding box (min_x, min_y, max_x, max_y) of node coordinates.
    pub fn bounds(&self) -> (i32, i32, i32, i32) {
        let mut b = (i32::MAX, i32::MAX, i32::MIN, i32::MIN);
        for n in &self.nodes {
            b.0 = b.0.min(n.x);
            b.1 = b.1.min(n.y);
            b.2 = b.2.max(n.x);
            b.3 = b.3.max(n.y);
        }
        if self.nodes.is_empty() {
            (0, 0, 0, 0)
        } else {
            b
        }
    }

    fn check_node(&self, id: NodeId) -> Result<()> {
        if id < self.nodes.len() {
            Ok(())
        } else {
            Err(Error::validation(format!(
                "node {id} does not exist (graph has {} nodes)",
                self.nodes.len()
            )))
        }
    }

    pub fn check_position(&self, pos: Position) -> Result<()> {
        let e = self
            .edges
            .get(pos.edge)
            .ok_or_else(|| Error::validation(format!("edge {} does not exist", pos.edge)))?;
        if pos.progress > e.len {
            return Err(Error::validation(format!(
                "progress {} exceeds length {} of edge {}",
                pos.progress, e.len, pos.edge
            )));
        }
        Ok(())
    }

    /// Shortest distance from every node to `dst` (reverse Dijkstra).
    fn distances_to(&self, dst: NodeId) -> Vec<u32> {
        let mut dist = vec![UNREACHABLE; self.nodes.len()];
        let mut heap = BinaryHeap::new();
        dist[dst] = 0;
        heap.push(Reverse((0u32, dst)));
        while let Some(Reverse((d, v))) = heap.pop() {
            if d > dist[v] {
                continue;
            }
            for &e in &self.incoming[v] {
                let u = self.edges[e].from;
                let nd = d + self.edges[e].len;
                if nd < dist[u] {
                    dist[u] = nd;
                    heap.push(Reverse((nd, u)));
                }
            }
        }
        dist
    }
}

/// Builds a `width` x `height` lattice with bidirectional edges between
/// orthogonal neighbours. Node ids are row-major: `id = y * width + x`.
pub fn build_grid(width: usize, height: usize, edge_len: u32) -> Result<RoadGraph> {
    if width == 0 || height == 0 {
        return Err(Error::validation("grid dimensions must be at least 1x1"));
    }
    if edge_len == 0 {
        return Err(Error::validation("grid edge length must be at least 1"));
    }
    let step = i32::try_from(edge_len).map_err(|_| Error::validation("edge length too large"))?;
    let mut nodes = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            nodes.push(Node {
                x: x as i32 * step,
                y: y as i32 * step,
            });
        }
    }
    let id = |x: usize, y: usize| y * width + x;
    let mut edges = Vec::new();
    for y in 0..height {
        for x in 0..width {
            if x + 1 < width {
                edges.push(Edge { from: id(x, y), to: id(x + 1, y), len: edge_len });
                edges.push(Edge { from: id(x + 1, y), to: id(x, y), len: edge_len });
            }
            if y + 1 < height {
                edges.push(Edge { from: id(x, y), to: id(x, y + 1), len: edge_len });
                edges.push(Edge { from: id(x, y + 1), to: id(x, y), len: edge_len });
            }
        }
    }
    RoadGraph::new(nodes, edges)
}

/// Minimum-length route from `src` to `dst`; ties go to the lexicographically
/// smallest node sequence.
pub fn shortest_path(graph: &RoadGraph, src: NodeId, dst: NodeId) -> Result<Route> {
    graph.check_node(src)?;
    graph.check_node(dst)?;
    let dist = graph.distances_to(dst);
    route_from_distances(graph, &dist, src, dst)
}

fn route_from_distances(graph: &RoadGraph, dist: &[u32], src: NodeId, dst: NodeId) -> Result<Route> {
    if dist[src] == UNREACHABLE {
        return Err(Error::NoRoute { src, dst });
    }
    // With strictly positive lengths, walking the smallest-id tight edge at
    // each node yields the lexicographically smallest shortest path.
    let mut nodes = vec![src];
    let mut at = src;
    while at != dst {
        let next = graph.out[at]
            .iter()
            .map(|&e| &graph.edges[e])
            .find(|e| dist[e.to] != UNREACHABLE && e.len + dist[e.to] == dist[at])
            .map(|e| e.to)
            .expect("tight edge exists on a finite distance label");
        nodes.push(next);
        at = next;
    }
    Ok(Route {
        nodes,
        length: dist[src],
    })
}

/// Remaining cells on the current edge plus the shortest distance from its
/// head node to `dst`.
pub fn graph_distance(graph: &RoadGraph, pos: Position, dst: NodeId) -> Result<u32> {
    graph.check_position(pos)?;
    graph.check_node(dst)?;
    let e = graph.edge(pos.edge);
    let dist = graph.distances_to(dst);
    if dist[e.to] == UNREACHABLE {
        return Err(Error::NoRoute { src: e.to, dst });
    }
    Ok(e.len - pos.progress + dist[e.to])
}

/// All-pairs distance table for repeated lookups inside the simulator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistanceTable {
    n: usize,
    // row-major [dst][node]
    dist: Vec<u32>,
    diameter: u32,
}

impl DistanceTable {
    pub fn new(graph: &RoadGraph) -> Self {
        let n = graph.node_count();
        let mut dist = Vec::with_capacity(n * n);
        for dst in 0..n {
            dist.extend(graph.distances_to(dst));
        }
        let diameter = dist.iter().copied().filter(|&d| d != UNREACHABLE).max().unwrap_or(0);
        Self { n, dist, diameter }
    }

    pub fn node_distance(&self, from: NodeId, dst: NodeId) -> Option<u32> {
        let d = self.dist[dst * self.n + from];
        (d != UNREACHABLE).then_some(d)
    }

    pub fn distance(&self, graph: &RoadGraph, pos: Position, dst: NodeId) -> Option<u32> {
        let e = graph.edge(pos.edge);
        self.node_distance(e.to, dst).map(|d| d + e.len - pos.progress)
    }

    /// Largest finite node-to-node distance, used for normalization.
    pub fn diameter(&self) -> u32 {
        self.diameter
    }

    pub fn route(&self, graph: &RoadGraph, src: NodeId, dst: NodeId) -> Result<Route> {
        graph.check_node(src)?;
        graph.check_node(dst)?;
        route_from_distances(graph, &self.dist[dst * self.n..(dst + 1) * self.n], src, dst)
    }

    pub fn is_strongly_connected(&self) -> bool {
        self.dist.iter().all(|&d| d != UNREACHABLE)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line3(a: u32, b: u32) -> RoadGraph {
        let nodes = (0..3).map(|i| Node { x: i, y: 0 }).collect();
        RoadGraph::new(
            nodes,
            vec![Edge { from: 0, to: 1, len: a }, Edge { from: 1, to: 2, len: b }],
        )
        .unwrap()
    }

    #[test]
    fn degenerate_grid() {
        let g = build_grid(1, 1, 5).unwrap();
        assert_eq!(g.node_count(), 1);
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn small_grids_have_expected_edge_counts() {
        let g = build_grid(2, 2, 3).unwrap();
        assert_eq!(g.node_count(), 4);
        assert_eq!(g.edge_count(), 8);
        assert!(g.edges().iter().all(|e| e.len == 3));
        let mut pairs: Vec<_> = g.edges().iter().map(|e| (e.from, e.to)).collect();
        pairs.sort();
        assert_eq!(pairs, vec![(0, 1), (0, 2), (1, 0), (1, 3), (2, 0), (2, 3), (3, 1), (3, 2)]);

        let g = build_grid(3, 3, 4).unwrap();
        assert_eq!(g.node_count(), 9);
        assert_eq!(g.edge_count(), 24);
        assert!(DistanceTable::new(&g).is_strongly_connected());
    }

    #[test]
    fn grid_rejects_zero_dimensions() {
        assert!(build_grid(0, 3, 1).is_err());
        assert!(build_grid(3, 0, 1).is_err());
        assert!(build_grid(3, 3, 0).is_err());
    }

    #[test]
    fn graph_validation() {
        let nodes = vec![Node { x: 0, y: 0 }, Node { x: 1, y: 0 }];
        assert!(RoadGraph::new(nodes.clone(), vec![Edge { from: 0, to: 2, len: 1 }]).is_err());
        assert!(RoadGraph::new(nodes.clone(), vec![Edge { from: 0, to: 1, len: 0 }]).is_err());
        assert!(RoadGraph::new(
            nodes,
            vec![Edge { from: 0, to: 1, len: 1 }, Edge { from: 0, to: 1, len: 2 }]
        )
        .is_err());
    }

    #[test]
    fn identity_route() {
        let g = build_grid(2, 2, 3).unwrap();
        assert_eq!(shortest_path(&g, 0, 0).unwrap(), Route { nodes: vec![0], length: 0 });
    }

    #[test]
    fn grid_corner_tie_break_is_lexicographic() {
        let g = build_grid(2, 2, 3).unwrap();
        assert_eq!(shortest_path(&g, 0, 3).unwrap(), Route { nodes: vec![0, 1, 3], length: 6 });
    }

    #[test]
    fn line_route_and_unreachable() {
        let g = line3(2, 5);
        assert_eq!(shortest_path(&g, 0, 2).unwrap(), Route { nodes: vec![0, 1, 2], length: 7 });
        assert!(matches!(shortest_path(&g, 2, 0), Err(Error::NoRoute { src: 2, dst: 0 })));
        assert!(matches!(shortest_path(&g, 0, 9), Err(Error::Validation(_))));
    }

    #[test]
    fn distances_on_edges() {
        let g = line3(3, 3);
        // at the destination node
        assert_eq!(graph_distance(&g, Position { edge: 1, progress: 3 }, 2).unwrap(), 0);
        // mid-edge with the head being the destination
        assert_eq!(graph_distance(&g, Position { edge: 0, progress: 1 }, 1).unwrap(), 2);
        // at node 0 (tail of edge 0), target two edges away
        assert_eq!(graph_distance(&g, Position { edge: 0, progress: 0 }, 2).unwrap(), 6);
        assert!(graph_distance(&g, Position { edge: 0, progress: 4 }, 2).is_err());
        assert!(graph_distance(&g, Position { edge: 1, progress: 0 }, 0).is_err());
    }

    #[test]
    fn table_agrees_with_direct_distance() {
        let g = build_grid(4, 3, 2).unwrap();
        let t = DistanceTable::new(&g);
        for e in 0..g.edge_count() {
            for p in 0..=g.edge(e).len {
                for dst in 0..g.node_count() {
                    let pos = Position { edge: e, progress: p };
                    assert_eq!(t.distance(&g, pos, dst), Some(graph_distance(&g, pos, dst).unwrap()));
                }
            }
        }
        assert_eq!(t.route(&g, 0, 11).unwrap(), shortest_path(&g, 0, 11).unwrap());
        assert_eq!(t.diameter(), 10);
    }

    #[test]
    fn headings_follow_coordinates() {
        let g = build_grid(2, 2, 1).unwrap();
        assert_eq!(g.heading(g.find_edge(0, 1).unwrap()), Heading::East);
        assert_eq!(g.heading(g.find_edge(1, 0).unwrap()), Heading::West);
        assert_eq!(g.heading(g.find_edge(0, 2).unwrap()), Heading::North);
        assert_eq!(g.heading(g.find_edge(2, 0).unwrap()), Heading::South);
        assert_eq!(Heading::North.left(), Heading::West);
        assert_eq!(Heading::North.right(), Heading::East);
    }
}
