//! Per-node associative semantic network.
//!
//! Vertices are tag labels; undirected edges carry the time of their last
//! activation and a popularity count. Edge strength is never stored: it is
//! evaluated on demand as `exp(-(gamma / popularity) * (now - last_activation))`.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::string::ToString;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::GraphError;
use crate::item::{TagLabel, TaggedItem};
use crate::Seconds;

/// Unordered vertex pair, stored with `lo < hi`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    lo: TagLabel,
    hi: TagLabel,
}

impl Edge {
    pub fn new(a: TagLabel, b: TagLabel) -> Result<Self, GraphError> {
        match a.cmp(&b) {
            core::cmp::Ordering::Less => Ok(Self { lo: a, hi: b }),
            core::cmp::Ordering::Greater => Ok(Self { lo: b, hi: a }),
            core::cmp::Ordering::Equal => Err(GraphError::SelfLoop(a.to_string())),
        }
    }

    pub fn endpoints(&self) -> (&TagLabel, &TagLabel) {
        (&self.lo, &self.hi)
    }

    pub fn touches(&self, v: &TagLabel) -> bool {
        &self.lo == v || &self.hi == v
    }

    /// The endpoint opposite `v`. `v` must be an endpoint.
    pub fn other(&self, v: &TagLabel) -> &TagLabel {
        if &self.lo == v {
            &self.hi
        } else {
            &self.lo
        }
    }

    fn unknown(&self) -> GraphError {
        GraphError::UnknownEdge(self.lo.to_string(), self.hi.to_string())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeState {
    pub last_activation: Seconds,
    pub popularity: u32,
}

impl EdgeState {
    pub fn fresh(now: Seconds) -> Self {
        Self {
            last_activation: now,
            popularity: 1,
        }
    }

    /// Memory strength at `now`; exactly 1 when `now == last_activation`.
    pub fn weight(&self, now: Seconds, gamma: f64) -> f64 {
        let elapsed = now - self.last_activation;
        libm::exp(-(gamma / self.popularity as f64) * elapsed)
    }

    /// Whether the strength has fallen to the forget threshold.
    ///
    /// The threshold `exp(-gamma * f_min)` is compared against
    /// `exp(-gamma * elapsed / popularity)`; gamma cancels, leaving
    /// `elapsed >= popularity * f_min`. Ties count as forgotten.
    pub fn is_forgotten(&self, now: Seconds, f_min: Seconds) -> bool {
        now - self.last_activation >= self.popularity as f64 * f_min
    }

    pub fn activate(&mut self, now: Seconds) {
        debug_assert!(now >= self.last_activation, "activation moves back in time");
        self.last_activation = now;
        self.popularity = self.popularity.saturating_add(1);
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PruneReport {
    pub edges_removed: usize,
    pub vertices_removed: usize,
}

/// Structural summary of a network at one instant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotStats {
    pub vertex_count: usize,
    pub edge_count: usize,
    pub mean_edge_weight: f64,
    /// degree -> number of vertices with that degree
    pub degree_histogram: BTreeMap<usize, usize>,
    /// `None` for an empty network.
    pub diameter: Option<u32>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SemanticNetwork {
    adjacency: BTreeMap<TagLabel, BTreeSet<TagLabel>>,
    edges: BTreeMap<Edge, EdgeState>,
}

impl SemanticNetwork {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds the t0 network: each item's tags form a clique and equal labels
    /// across items collapse into one vertex. Every edge starts at popularity 1
    /// activated at `t0`. Single-tag items leave isolated vertices.
    pub fn build_initial<'a>(items: impl IntoIterator<Item = &'a TaggedItem>, t0: Seconds) -> Result<Self, GraphError> {
        let mut net = Self::new();
        let mut any = false;
        for item in items {
            any = true;
            let tags = item.tags();
            for (i, a) in tags.iter().enumerate() {
                net.add_vertex(a.clone());
                for b in &tags[i + 1..] {
                    let edge = Edge::new(a.clone(), b.clone())?;
                    net.edges.entry(edge).or_insert_with(|| EdgeState::fresh(t0));
                    net.link(a, b);
                }
            }
        }
        if !any {
            return Err(GraphError::EmptyItemSet);
        }
        Ok(net)
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }

    pub fn vertex_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn vertices(&self) -> impl Iterator<Item = &TagLabel> + '_ {
        self.adjacency.keys()
    }

    pub fn edges(&self) -> impl Iterator<Item = (&Edge, &EdgeState)> + '_ {
        self.edges.iter()
    }

    pub fn contains_vertex(&self, v: &TagLabel) -> bool {
        self.adjacency.contains_key(v)
    }

    pub fn edge_state(&self, e: &Edge) -> Option<&EdgeState> {
        self.edges.get(e)
    }

    pub fn neighbors<'a>(&'a self, v: &TagLabel) -> impl Iterator<Item = &'a TagLabel> + 'a {
        self.adjacency.get(v).into_iter().flatten()
    }

    pub fn degree(&self, v: &TagLabel) -> usize {
        self.adjacency.get(v).map_or(0, BTreeSet::len)
    }

    pub fn add_vertex(&mut self, v: TagLabel) {
        self.adjacency.entry(v).or_default();
    }

    /// Inserts or overwrites an edge, adding missing endpoints.
    pub fn insert_edge(&mut self, e: Edge, state: EdgeState) {
        let (a, b) = (e.lo.clone(), e.hi.clone());
        self.add_vertex(a.clone());
        self.add_vertex(b.clone());
        self.link(&a, &b);
        self.edges.insert(e, state);
    }

    fn link(&mut self, a: &TagLabel, b: &TagLabel) {
        self.adjacency.entry(a.clone()).or_default().insert(b.clone());
        self.adjacency.entry(b.clone()).or_default().insert(a.clone());
    }

    pub fn edge_weight(&self, e: &Edge, now: Seconds, gamma: f64) -> Result<f64, GraphError> {
        self.edges
            .get(e)
            .map(|s| s.weight(now, gamma))
            .ok_or_else(|| e.unknown())
    }

    /// Resets the edge strength to 1 at `now` and counts one more use.
    pub fn activate_edge(&mut self, e: &Edge, now: Seconds) -> Result<(), GraphError> {
        let state = self.edges.get_mut(e).ok_or_else(|| e.unknown())?;
        state.activate(now);
        Ok(())
    }

    /// Counts one more use without touching the activation time.
    pub fn bump_popularity(&mut self, e: &Edge) -> Result<(), GraphError> {
        let state = self.edges.get_mut(e).ok_or_else(|| e.unknown())?;
        state.popularity = state.popularity.saturating_add(1);
        Ok(())
    }

    /// Drops every forgotten edge, then every vertex left with degree 0.
    pub fn prune_forgotten(&mut self, now: Seconds, f_min: Seconds) -> PruneReport {
        let mut report = PruneReport::default();
        let adjacency = &mut self.adjacency;
        self.edges.retain(|e, s| {
            if s.is_forgotten(now, f_min) {
                if let Some(n) = adjacency.get_mut(&e.lo) {
                    n.remove(&e.hi);
                }
                if let Some(n) = adjacency.get_mut(&e.hi) {
                    n.remove(&e.lo);
                }
                report.edges_removed += 1;
                false
            } else {
                true
            }
        });
        let before = self.adjacency.len();
        self.adjacency.retain(|_, n| !n.is_empty());
        report.vertices_removed = before - self.adjacency.len();
        report
    }

    /// Adds all missing vertices and edges of `contrib`; every contributed
    /// edge, new or already known, is then activated at `now`. New edges
    /// therefore land with popularity 2.
    pub fn merge_contributed(&mut self, contrib: &ContributedNetwork, now: Seconds) {
        for v in contrib.vertices() {
            self.add_vertex(v.clone());
        }
        for e in contrib.edges() {
            match self.edges.get_mut(e) {
                Some(state) => state.activate(now),
                None => {
                    let mut state = EdgeState::fresh(now);
                    state.activate(now);
                    self.insert_edge(e.clone(), state);
                }
            }
        }
    }

    /// Label-wise union; edges present in both keep `self`'s state.
    pub fn union_with(&mut self, other: &SemanticNetwork) {
        for v in other.vertices() {
            self.add_vertex(v.clone());
        }
        for (e, s) in other.edges() {
            if !self.edges.contains_key(e) {
                self.insert_edge(e.clone(), *s);
            }
        }
    }

    pub fn mean_edge_weight(&self, now: Seconds, gamma: f64) -> f64 {
        if self.edges.is_empty() {
            return 0.0;
        }
        self.total_edge_weight(now, gamma) / self.edges.len() as f64
    }

    pub fn total_edge_weight(&self, now: Seconds, gamma: f64) -> f64 {
        self.edges.values().map(|s| s.weight(now, gamma)).sum()
    }

    /// Vertex degrees in label order.
    pub fn degree_sequence(&self) -> Vec<usize> {
        self.adjacency.values().map(BTreeSet::len).collect()
    }

    pub fn degree_histogram(&self) -> BTreeMap<usize, usize> {
        let mut hist = BTreeMap::new();
        for d in self.degree_sequence() {
            *hist.entry(d).or_insert(0) += 1;
        }
        hist
    }

    /// Connected components as vertex lists, each in label order, listed by
    /// their smallest label.
    pub fn components(&self) -> Vec<Vec<TagLabel>> {
        let mut seen: BTreeSet<&TagLabel> = BTreeSet::new();
        let mut out = Vec::new();
        for start in self.adjacency.keys() {
            if seen.contains(start) {
                continue;
            }
            let mut comp = Vec::new();
            let mut queue = VecDeque::from([start]);
            seen.insert(start);
            while let Some(v) = queue.pop_front() {
                comp.push(v.clone());
                for u in self.neighbors(v) {
                    if seen.insert(u) {
                        queue.push_back(u);
                    }
                }
            }
            comp.sort();
            out.push(comp);
        }
        out
    }

    /// Hop eccentricity of `source` within its component.
    fn eccentricity(&self, source: &TagLabel) -> u32 {
        let mut dist: BTreeMap<&TagLabel, u32> = BTreeMap::new();
        dist.insert(source, 0);
        let mut queue = VecDeque::from([source]);
        let mut far = 0;
        while let Some(v) = queue.pop_front() {
            let d = dist[v];
            far = far.max(d);
            for u in self.neighbors(v) {
                if !dist.contains_key(u) {
                    dist.insert(u, d + 1);
                    queue.push_back(u);
                }
            }
        }
        far
    }

    /// Longest shortest hop path inside the largest connected component
    /// (ties between equally large components go to the one with the smallest
    /// label). `None` when the network is empty.
    pub fn diameter(&self) -> Option<u32> {
        let comps = self.components();
        let largest = comps
            .iter()
            .enumerate()
            .max_by(|(i, a), (j, b)| a.len().cmp(&b.len()).then(j.cmp(i)))?
            .1;
        Some(largest.iter().map(|v| self.eccentricity(v)).max().unwrap_or(0))
    }

    pub fn snapshot_stats(&self, now: Seconds, gamma: f64) -> SnapshotStats {
        SnapshotStats {
            vertex_count: self.vertex_count(),
            edge_count: self.edge_count(),
            mean_edge_weight: self.mean_edge_weight(now, gamma),
            degree_histogram: self.degree_histogram(),
            diameter: self.diameter(),
        }
    }

    /// Checks the structural invariants: symmetric adjacency, every edge
    /// endpoint present, no self-loops, popularity at least 1.
    pub fn is_consistent(&self) -> bool {
        let mut adjacency_edges = 0usize;
        for (v, ns) in &self.adjacency {
            for u in ns {
                if u == v {
                    return false;
                }
                let Ok(e) = Edge::new(v.clone(), u.clone()) else {
                    return false;
                };
                if !self.edges.contains_key(&e) {
                    return false;
                }
                adjacency_edges += 1;
            }
        }
        adjacency_edges == 2 * self.edges.len()
            && self
                .edges
                .iter()
                .all(|(e, s)| s.popularity >= 1 && self.adjacency.get(&e.lo).is_some_and(|n| n.contains(&e.hi)))
    }
}

/// The subgraph selected by a donor for transfer during one contact.
///
/// Vertices and edges keep their insertion order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ContributedNetwork {
    vertices: Vec<TagLabel>,
    vertex_set: BTreeSet<TagLabel>,
    edges: Vec<Edge>,
    edge_set: BTreeSet<Edge>,
}

impl ContributedNetwork {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn vertices(&self) -> &[TagLabel] {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn contains_vertex(&self, v: &TagLabel) -> bool {
        self.vertex_set.contains(v)
    }

    pub fn contains_edge(&self, e: &Edge) -> bool {
        self.edge_set.contains(e)
    }

    /// Returns false if the vertex was already present.
    pub fn push_vertex(&mut self, v: TagLabel) -> bool {
        if self.vertex_set.insert(v.clone()) {
            self.vertices.push(v);
            true
        } else {
            false
        }
    }

    /// Adds the edge and any missing endpoint. Returns false if already present.
    pub fn push_edge(&mut self, e: Edge) -> bool {
        if !self.edge_set.insert(e.clone()) {
            return false;
        }
        self.push_vertex(e.lo.clone());
        self.push_vertex(e.hi.clone());
        self.edges.push(e);
        true
    }

    pub fn is_subgraph_of(&self, net: &SemanticNetwork) -> bool {
        self.vertices.iter().all(|v| net.contains_vertex(v)) && self.edges.iter().all(|e| net.edge_state(e).is_some())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn l(s: &str) -> TagLabel {
        TagLabel::new(s).unwrap()
    }

    fn e(a: &str, b: &str) -> Edge {
        Edge::new(l(a), l(b)).unwrap()
    }

    fn item(id: u64, tags: &[&str]) -> TaggedItem {
        TaggedItem::from_strs(id, tags.iter().copied()).unwrap()
    }

    #[test]
    fn two_pictures_share_the_lake_vertex() {
        let items = [
            item(1, &["mountain", "snow", "lake"]),
            item(2, &["lake", "boat", "sunset"]),
        ];
        let net = SemanticNetwork::build_initial(&items, 0.0).unwrap();
        assert_eq!(net.vertex_count(), 5);
        assert_eq!(net.edge_count(), 6);
        assert_eq!(net.degree(&l("lake")), 4);
        assert_eq!(net.components().len(), 1);
        assert!(net.is_consistent());
    }

    #[test]
    fn smallest_clique_has_unit_weight_at_t0() {
        let net = SemanticNetwork::build_initial(&[item(1, &["a", "b"])], 3.0).unwrap();
        assert_eq!(net.vertex_count(), 2);
        assert_eq!(net.edge_count(), 1);
        assert_eq!(net.edge_weight(&e("a", "b"), 3.0, 0.01).unwrap(), 1.0);
    }

    #[test]
    fn disjoint_cliques_stay_separate() {
        let items = [
            item(1, &["a", "b"]),
            item(2, &["c", "d", "e"]),
            item(3, &["f", "g", "h", "i"]),
        ];
        let net = SemanticNetwork::build_initial(&items, 0.0).unwrap();
        assert_eq!(net.vertex_count(), 9);
        assert_eq!(net.edge_count(), 10);
        assert_eq!(net.components().len(), 3);
    }

    #[test]
    fn empty_items_and_single_tag_items() {
        let none: [TaggedItem; 0] = [];
        assert_eq!(
            SemanticNetwork::build_initial(&none, 0.0),
            Err(GraphError::EmptyItemSet)
        );
        let net = SemanticNetwork::build_initial(&[item(1, &["solo"])], 0.0).unwrap();
        assert_eq!(net.vertex_count(), 1);
        assert_eq!(net.edge_count(), 0);
    }

    #[test]
    fn weight_follows_the_forgetting_curve() {
        let s = EdgeState::fresh(0.0);
        let w = s.weight(150.0, 0.01);
        assert!((w - 0.223_130_160_148_429_8).abs() < 1e-15);
        let mut p2 = s;
        p2.popularity = 2;
        assert!(p2.weight(150.0, 0.01) > w);
    }

    #[test]
    fn unknown_edges_are_reported() {
        let mut net = SemanticNetwork::new();
        assert!(matches!(
            net.edge_weight(&e("x", "y"), 0.0, 0.01),
            Err(GraphError::UnknownEdge(..))
        ));
        assert!(net.activate_edge(&e("x", "y"), 0.0).is_err());
        assert!(matches!(Edge::new(l("x"), l("x")), Err(GraphError::SelfLoop(_))));
    }

    #[test]
    fn activation_resets_weight_and_counts_use() {
        let mut net = SemanticNetwork::new();
        net.insert_edge(
            e("a", "b"),
            EdgeState {
                last_activation: 0.0,
                popularity: 3,
            },
        );
        net.activate_edge(&e("a", "b"), 40.0).unwrap();
        let s = net.edge_state(&e("a", "b")).unwrap();
        assert_eq!(s.popularity, 4);
        assert_eq!(s.last_activation, 40.0);
        assert_eq!(net.edge_weight(&e("a", "b"), 40.0, 0.01).unwrap(), 1.0);
        // just before p * f_min has elapsed, the edge is still remembered
        let mut copy = net.clone();
        copy.prune_forgotten(40.0 + 4.0 * 150.0 - 1e-9, 150.0);
        assert_eq!(copy.edge_count(), 1);
    }

    #[test]
    fn prune_drops_at_exactly_p_times_fmin() {
        let mut net = SemanticNetwork::new();
        net.insert_edge(
            e("a", "b"),
            EdgeState {
                last_activation: 0.0,
                popularity: 4,
            },
        );
        net.insert_edge(e("c", "d"), EdgeState::fresh(0.0));
        let mut at_599 = net.clone();
        at_599.prune_forgotten(599.0, 150.0);
        assert!(at_599.edge_state(&e("a", "b")).is_some());
        net.prune_forgotten(600.0, 150.0);
        assert_eq!(net.edge_count(), 0);
        assert!(net.is_empty());
    }

    #[test]
    fn popularity_one_edge_forgotten_after_fmin() {
        let mut net = SemanticNetwork::build_initial(&[item(1, &["a", "b"])], 0.0).unwrap();
        let report = net.prune_forgotten(49.0, 50.0);
        assert_eq!(report, PruneReport::default());
        let report = net.prune_forgotten(50.0, 50.0);
        assert_eq!(report.edges_removed, 1);
        assert_eq!(report.vertices_removed, 2);
        // idempotent
        assert_eq!(net.prune_forgotten(50.0, 50.0), PruneReport::default());
    }

    #[test]
    fn pruning_keeps_vertices_with_surviving_edges() {
        let mut net = SemanticNetwork::build_initial(&[item(1, &["a", "b", "c"])], 0.0).unwrap();
        net.activate_edge(&e("a", "b"), 10.0).unwrap();
        net.prune_forgotten(60.0, 50.0);
        assert_eq!(net.edge_count(), 1);
        assert_eq!(net.vertex_count(), 2);
        assert!(!net.contains_vertex(&l("c")));
        assert!(net.is_consistent());
    }

    #[test]
    fn infinite_fmin_never_forgets() {
        let mut net = SemanticNetwork::build_initial(&[item(1, &["a", "b"])], 0.0).unwrap();
        net.prune_forgotten(1e12, f64::INFINITY);
        assert_eq!(net.edge_count(), 1);
    }

    #[test]
    fn merge_adds_missing_and_activates_existing() {
        let mut net = SemanticNetwork::new();
        net.insert_edge(
            e("a", "b"),
            EdgeState {
                last_activation: 1.0,
                popularity: 5,
            },
        );
        let mut c = ContributedNetwork::new();
        c.push_edge(e("a", "b"));
        c.push_edge(e("b", "z"));
        net.merge_contributed(&c, 9.0);
        let ab = net.edge_state(&e("a", "b")).unwrap();
        assert_eq!((ab.popularity, ab.last_activation), (6, 9.0));
        let bz = net.edge_state(&e("b", "z")).unwrap();
        assert_eq!((bz.popularity, bz.last_activation), (2, 9.0));
        assert_eq!(net.vertex_count(), 3);
        assert!(net.is_consistent());
    }

    #[test]
    fn merge_into_empty_reproduces_contribution() {
        let mut c = ContributedNetwork::new();
        c.push_vertex(l("k"));
        c.push_edge(e("k", "a"));
        c.push_edge(e("a", "b"));
        let mut net = SemanticNetwork::new();
        net.merge_contributed(&c, 2.0);
        let mut vs: Vec<_> = c.vertices().to_vec();
        vs.sort();
        assert_eq!(net.vertices().cloned().collect::<Vec<_>>(), vs);
        assert_eq!(net.edge_count(), 2);
        assert!(c.is_subgraph_of(&net));
    }

    #[test]
    fn snapshot_of_empty_and_triangle() {
        let empty = SemanticNetwork::new().snapshot_stats(0.0, 0.01);
        assert_eq!(empty.vertex_count, 0);
        assert_eq!(empty.mean_edge_weight, 0.0);
        assert!(empty.degree_histogram.is_empty());
        assert_eq!(empty.diameter, None);

        let tri = SemanticNetwork::build_initial(&[item(1, &["a", "b", "c"])], 0.0).unwrap();
        let s = tri.snapshot_stats(0.0, 0.01);
        assert_eq!(s.diameter, Some(1));
        assert_eq!(s.degree_histogram, BTreeMap::from([(2, 3)]));
        assert_eq!(s.mean_edge_weight, 1.0);
    }

    #[test]
    fn diameter_uses_largest_component() {
        // path of 5 vertices (diameter 4) plus a separate triangle
        let items = [
            item(1, &["p0", "p1"]),
            item(2, &["p1", "p2"]),
            item(3, &["p2", "p3"]),
            item(4, &["p3", "p4"]),
            item(5, &["x", "y", "z"]),
        ];
        let net = SemanticNetwork::build_initial(&items, 0.0).unwrap();
        assert_eq!(net.diameter(), Some(4));
    }
}
