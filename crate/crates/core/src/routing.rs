//! Undirected road graph and deterministic shortest-path routing.
//!
//! Among equal-length shortest routes the one whose junction-id sequence is
//! lexicographically smallest wins, so generated datasets are reproducible.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::RouteError;
use crate::geo::GeoPoint;
use crate::map::CityMap;

pub use crate::geo::{bearing, haversine, planar_bearing, Direction};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub to: usize,
    pub length: f64,
    /// Slot of the road segment in [`CityMap::roads`].
    pub road: usize,
}

/// Road graph: nodes are junctions (in map order), edges are road segments.
#[derive(Debug, Clone)]
pub struct RoadGraph {
    ids: Vec<String>,
    locations: Vec<GeoPoint>,
    adjacency: Vec<Vec<Edge>>,
    road_names: Vec<String>,
    road_ids: Vec<String>,
    edge_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteStep {
    pub road_id: String,
    pub road_name: String,
    pub direction: Direction,
    pub length_m: f64,
    pub from_junction: String,
    pub to_junction: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Route {
    pub steps: Vec<RouteStep>,
    pub total_length_m: f64,
}

impl Route {
    pub fn empty() -> Self {
        Route { steps: Vec::new(), total_length_m: 0.0 }
    }

    /// Junction sequence including both ends; empty for an empty route.
    pub fn junctions(&self) -> Vec<&str> {
        let mut out: Vec<&str> = self.steps.iter().map(|s| s.from_junction.as_str()).collect();
        if let Some(last) = self.steps.last() {
            out.push(&last.to_junction);
        }
        out
    }

    /// Concatenate two routes sharing a junction.
    pub fn join(mut self, other: Route) -> Route {
        self.steps.extend(other.steps);
        self.total_length_m = self.steps.iter().map(|s| s.length_m).sum();
        self
    }
}

#[derive(Clone, Copy)]
struct QueueItem {
    dist: f64,
    node: usize,
}

impl PartialEq for QueueItem {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for QueueItem {}
impl PartialOrd for QueueItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for QueueItem {
    // min-heap on distance
    fn cmp(&self, other: &Self) -> Ordering {
        other.dist.total_cmp(&self.dist).then_with(|| other.node.cmp(&self.node))
    }
}

impl RoadGraph {
    pub fn from_map(map: &CityMap) -> Self {
        let ids: Vec<String> = map.junctions().iter().map(|j| j.id.clone()).collect();
        let locations = map.junctions().iter().map(|j| j.location).collect();
        let mut adjacency = vec![Vec::new(); ids.len()];
        for (slot, r) in map.roads().iter().enumerate() {
            let (Some(a), Some(b)) = (map.junction_slot(&r.from), map.junction_slot(&r.to)) else {
                continue;
            };
            adjacency[a].push(Edge { to: b, length: r.length_m, road: slot });
            adjacency[b].push(Edge { to: a, length: r.length_m, road: slot });
        }
        Self {
            ids,
            locations,
            adjacency,
            road_names: map.roads().iter().map(|r| r.name.clone()).collect(),
            road_ids: map.roads().iter().map(|r| r.id.clone()).collect(),
            edge_count: map.roads().len(),
        }
    }

    /// Graph over explicit nodes and undirected weighted edges; used for
    /// routing tests where no geometry exists. Locations are synthesized.
    pub fn from_edges(ids: Vec<String>, edges: &[(usize, usize, f64)]) -> Self {
        let n = ids.len();
        let locations = (0..n).map(|i| GeoPoint::new_unchecked(i as f64 * 0.001, (i % 7) as f64 * 0.001)).collect();
        let mut adjacency = vec![Vec::new(); n];
        for (k, &(a, b, w)) in edges.iter().enumerate() {
            adjacency[a].push(Edge { to: b, length: w, road: k });
            adjacency[b].push(Edge { to: a, length: w, road: k });
        }
        Self {
            ids,
            locations,
            adjacency,
            road_names: (0..edges.len()).map(|k| format!("road {k}")).collect(),
            road_ids: (0..edges.len()).map(|k| format!("E{k}")).collect(),
            edge_count: edges.len(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.ids.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn node_id(&self, node: usize) -> &str {
        &self.ids[node]
    }

    pub fn node_location(&self, node: usize) -> GeoPoint {
        self.locations[node]
    }

    pub fn node(&self, id: &str) -> Option<usize> {
        // ids are sorted when built from a map; fall back to a scan otherwise
        match self.ids.binary_search_by(|x| x.as_str().cmp(id)) {
            Ok(i) => Some(i),
            Err(_) => self.ids.iter().position(|x| x == id),
        }
    }

    pub fn neighbors(&self, node: usize) -> &[Edge] {
        &self.adjacency[node]
    }

    pub fn road_name(&self, road: usize) -> &str {
        &self.road_names[road]
    }

    fn require(&self, id: &str) -> Result<usize, RouteError> {
        self.node(id).ok_or_else(|| RouteError::UnknownJunction(id.to_string()))
    }

    /// Single-source shortest distances; unreachable nodes are `INFINITY`.
    pub fn distances_from(&self, source: usize) -> Vec<f64> {
        let mut dist = vec![f64::INFINITY; self.node_count()];
        let mut heap = BinaryHeap::new();
        dist[source] = 0.0;
        heap.push(QueueItem { dist: 0.0, node: source });
        while let Some(QueueItem { dist: d, node }) = heap.pop() {
            if d > dist[node] {
                continue;
            }
            for e in &self.adjacency[node] {
                let nd = d + e.length;
                if nd < dist[e.to] {
                    dist[e.to] = nd;
                    heap.push(QueueItem { dist: nd, node: e.to });
                }
            }
        }
        dist
    }

    /// Unweighted hop counts from `source`; unreachable nodes are `usize::MAX`.
    pub fn hops_from(&self, sources: &[usize]) -> Vec<usize> {
        let mut hops = vec![usize::MAX; self.node_count()];
        let mut queue = VecDeque::new();
        for &s in sources {
            hops[s] = 0;
            queue.push_back(s);
        }
        while let Some(u) = queue.pop_front() {
            for e in &self.adjacency[u] {
                if hops[e.to] == usize::MAX {
                    hops[e.to] = hops[u] + 1;
                    queue.push_back(e.to);
                }
            }
        }
        hops
    }

    /// Shortest route by total length with lexicographic junction-sequence tie-break.
    pub fn shortest_path(&self, origin: &str, dest: &str) -> Result<Route, RouteError> {
        let (o, d) = (self.require(origin)?, self.require(dest)?);
        self.shortest_path_nodes(o, d)
    }

    pub fn shortest_path_nodes(&self, o: usize, d: usize) -> Result<Route, RouteError> {
        if o == d {
            return Ok(Route::empty());
        }
        let dist = self.distances_from(o);
        if dist[d].is_infinite() {
            return Err(RouteError::Unreachable { origin: self.ids[o].clone(), dest: self.ids[d].clone() });
        }
        // Nodes that reach `d` through tight edges (edges lying on some shortest path).
        let mut on_path = vec![false; self.node_count()];
        on_path[d] = true;
        let mut stack = vec![d];
        while let Some(v) = stack.pop() {
            for e in &self.adjacency[v] {
                let u = e.to;
                if !on_path[u] && dist[u] + e.length == dist[v] {
                    on_path[u] = true;
                    stack.push(u);
                }
            }
        }
        // Greedy walk choosing the smallest next junction id keeps the sequence lexicographically minimal.
        let mut steps = Vec::new();
        let mut total = 0.0;
        let mut cur = o;
        while cur != d {
            let best = self.adjacency[cur]
                .iter()
                .filter(|e| on_path[e.to] && dist[cur] + e.length == dist[e.to])
                .min_by(|a, b| {
                    self.ids[a.to].cmp(&self.ids[b.to]).then_with(|| self.road_ids[a.road].cmp(&self.road_ids[b.road]))
                })
                .copied()
                .expect("tight edge toward destination");
            steps.push(self.step(cur, &best));
            total += best.length;
            cur = best.to;
        }
        Ok(Route { steps, total_length_m: total })
    }

    fn step(&self, from: usize, e: &Edge) -> RouteStep {
        let b = bearing(self.locations[from], self.locations[e.to]).unwrap_or(0.0);
        RouteStep {
            road_id: self.road_ids[e.road].clone(),
            road_name: self.road_names[e.road].clone(),
            direction: Direction::quantize(b),
            length_m: e.length,
            from_junction: self.ids[from].clone(),
            to_junction: self.ids[e.to].clone(),
        }
    }

    /// Step along a specific edge, as used by the navigation simulator.
    pub fn edge_step(&self, from: usize, e: &Edge) -> RouteStep {
        self.step(from, e)
    }

    /// Connected component containing `node`, as sorted node indices.
    pub fn component_of(&self, node: usize) -> Vec<usize> {
        let hops = self.hops_from(&[node]);
        (0..self.node_count()).filter(|&i| hops[i] != usize::MAX).collect()
    }
}

/// Compass direction of a planar bearing in degrees.
pub fn quantize_direction(bearing_deg: f64) -> Direction {
    Direction::quantize(bearing_deg)
}
