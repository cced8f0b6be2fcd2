//! Cognitive exchange executed when two nodes meet.
//!
//! The donor starts from the concepts both parties know (key vertices),
//! reinforces the edges around them, ranks them by how strongly they are
//! remembered, and walks its network depth-first along recognized edges in
//! order of retrieval weight. The recipient merges the resulting contributed
//! network, then receives the donor's items that match the most contributed
//! concepts.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, GraphError};
use crate::graph::{ContributedNetwork, Edge, SemanticNetwork};
use crate::item::{ItemId, ItemStore, NodeId, TagLabel, TaggedItem};
use crate::Seconds;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExchangeParams {
    /// Maximum vertices in one contributed network.
    pub tag_limit: usize,
    /// Maximum items pushed per direction per contact.
    pub data_limit: usize,
    /// Minimum popularity for an edge to be recognized.
    pub theta_rec: u32,
    /// Retrieval threshold expressed as seconds since last use of a
    /// popularity-1 edge one hop from a key, in a 2 s reference contact.
    pub w_min_seconds: f64,
    /// Contact-duration saturation rate, 1/s.
    pub tau: f64,
    /// Forgetting speed coefficient, 1/s.
    pub gamma: f64,
}

impl Default for ExchangeParams {
    fn default() -> Self {
        Self {
            tag_limit: 25,
            data_limit: 10,
            theta_rec: 2,
            w_min_seconds: 35.0,
            tau: 0.1,
            gamma: 0.01,
        }
    }
}

impl ExchangeParams {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.tag_limit < 1 {
            return Err(ConfigError::new("tag_limit", "must be at least 1"));
        }
        if self.theta_rec < 1 {
            return Err(ConfigError::new("theta_rec", "must be at least 1"));
        }
        if !(self.w_min_seconds > 0.0) || !self.w_min_seconds.is_finite() {
            return Err(ConfigError::new("w_min_seconds", "must be positive and finite"));
        }
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(ConfigError::new("tau", "must be positive and finite"));
        }
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(ConfigError::new("gamma", "must be positive and finite"));
        }
        Ok(())
    }
}

/// Concepts known to both parties, in label order.
pub fn key_vertices(donor: &SemanticNetwork, recipient: &SemanticNetwork) -> Vec<TagLabel> {
    donor
        .vertices()
        .filter(|v| recipient.contains_vertex(v))
        .cloned()
        .collect()
}

/// Adds one use to every edge incident to each key. An edge joining two keys
/// is counted once per endpoint.
pub fn boost_key_popularity(donor: &mut SemanticNetwork, keys: &[TagLabel]) {
    for k in keys {
        let incident: Vec<Edge> = donor
            .neighbors(k)
            .map(|u| Edge::new(k.clone(), u.clone()).expect("adjacency has no self-loops"))
            .collect();
        for e in &incident {
            donor.bump_popularity(e).expect("incident edge exists");
        }
    }
}

/// Sum of current strengths over the edges incident to `key`.
pub fn key_relevance(donor: &SemanticNetwork, key: &TagLabel, now: Seconds, gamma: f64) -> Result<f64, GraphError> {
    if !donor.contains_vertex(key) {
        return Err(GraphError::UnknownVertex(key.as_str().into()));
    }
    let mut total = 0.0;
    for u in donor.neighbors(key) {
        let e = Edge::new(key.clone(), u.clone())?;
        total += donor.edge_weight(&e, now, gamma)?;
    }
    Ok(total)
}

/// Retrieval weight of an edge with strength `strength`, reached at
/// `hops_from_key` hops, during a contact lasting `contact_duration`.
pub fn retrieval_weight(strength: f64, hops_from_key: u32, contact_duration: Seconds, tau: f64) -> f64 {
    debug_assert!(hops_from_key >= 1);
    strength * (1.0 - libm::exp(-tau * contact_duration)) / hops_from_key as f64
}

/// Minimum retrieval weight for an edge to be followed: the weight of a
/// popularity-1 edge, one hop from a key, last used `w_min_seconds` ago, in a
/// 2 s contact.
pub fn omega_min(params: &ExchangeParams) -> f64 {
    libm::exp(-params.gamma * params.w_min_seconds) * (1.0 - libm::exp(-2.0 * params.tau))
}

struct Visit<'a> {
    donor: &'a mut SemanticNetwork,
    contrib: ContributedNetwork,
    expanded: BTreeSet<TagLabel>,
    params: &'a ExchangeParams,
    now: Seconds,
    duration: Seconds,
    threshold: f64,
}

impl Visit<'_> {
    fn visit(&mut self, v: &TagLabel, hops: u32) {
        if !self.contrib.contains_vertex(v) {
            if self.contrib.vertex_count() >= self.params.tag_limit {
                return;
            }
            self.contrib.push_vertex(v.clone());
        }
        if !self.expanded.insert(v.clone()) {
            return;
        }

        let mut ranked: Vec<(f64, TagLabel, Edge)> = Vec::new();
        for u in self.donor.neighbors(v) {
            let e = Edge::new(v.clone(), u.clone()).expect("adjacency has no self-loops");
            let state = self.donor.edge_state(&e).expect("adjacent edge exists");
            if state.popularity < self.params.theta_rec {
                continue;
            }
            let strength = state.weight(self.now, self.params.gamma);
            let w = retrieval_weight(strength, hops, self.duration, self.params.tau);
            ranked.push((w, u.clone(), e));
        }
        ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));

        for (w, u, e) in ranked {
            if w < self.threshold || self.contrib.contains_edge(&e) {
                continue;
            }
            if !self.contrib.contains_vertex(&u) && self.contrib.vertex_count() >= self.params.tag_limit {
                continue;
            }
            self.contrib.push_edge(e.clone());
            self.donor.activate_edge(&e, self.now).expect("adjacent edge exists");
            self.visit(&u, hops + 1);
        }
    }
}

/// Selects the donor's contributed network for a contact spanning
/// `[contact_start, contact_end]`, mutating the donor's edge states (key
/// boosts and activations of traversed edges).
pub fn compute_contributed_network(
    donor: &mut SemanticNetwork,
    recipient: &SemanticNetwork,
    contact_start: Seconds,
    contact_end: Seconds,
    params: &ExchangeParams,
) -> ContributedNetwork {
    let keys = key_vertices(donor, recipient);
    if keys.is_empty() {
        return ContributedNetwork::new();
    }
    boost_key_popularity(donor, &keys);

    let mut ranked: Vec<(f64, TagLabel)> = keys
        .into_iter()
        .map(|k| {
            let rel = key_relevance(donor, &k, contact_end, params.gamma).expect("key is a donor vertex");
            (rel, k)
        })
        .collect();
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));

    let mut visit = Visit {
        donor,
        contrib: ContributedNetwork::new(),
        expanded: BTreeSet::new(),
        params,
        now: contact_end,
        duration: (contact_end - contact_start).max(0.0),
        threshold: omega_min(params),
    };
    for (_, k) in &ranked {
        visit.visit(k, 1);
    }
    visit.contrib
}

/// Ranks the sender's items not yet owned by the receiver by how many of
/// their tags appear among the contributed vertices. Items with no matching
/// tag are dropped; ties go to the smaller id. At most `data_limit` items.
pub fn tally_select<'a>(
    sender_items: impl IntoIterator<Item = &'a TaggedItem>,
    receiver_owns: impl Fn(ItemId) -> bool,
    contrib: &ContributedNetwork,
    data_limit: usize,
) -> Vec<&'a TaggedItem> {
    let mut ranked: Vec<(usize, &TaggedItem)> = sender_items
        .into_iter()
        .filter(|i| !receiver_owns(i.id()))
        .map(|i| (i.tags().iter().filter(|t| contrib.contains_vertex(t)).count(), i))
        .filter(|(tally, _)| *tally > 0)
        .collect();
    ranked.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.id().cmp(&b.1.id())));
    ranked.truncate(data_limit);
    ranked.into_iter().map(|(_, i)| i).collect()
}

/// Per-node state touched by an exchange.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct NodeState {
    pub id: NodeId,
    pub network: SemanticNetwork,
    pub items: ItemStore,
    pub community: u32,
}

impl NodeState {
    pub fn new(id: NodeId, community: u32) -> Self {
        Self {
            id,
            network: SemanticNetwork::new(),
            items: ItemStore::new(),
            community,
        }
    }

    pub fn item_ids(&self) -> BTreeSet<ItemId> {
        self.items.keys().copied().collect()
    }
}

/// What flowed in one direction of a contact.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Transfer {
    pub donor: NodeId,
    pub recipient: NodeId,
    pub contributed: ContributedNetwork,
    pub items: Vec<ItemId>,
}

/// Copies the selected items into the recipient's store.
pub(crate) fn deliver(recipient: &mut NodeState, items: &[TaggedItem]) -> Vec<ItemId> {
    items
        .iter()
        .map(|item| {
            recipient.items.insert(item.id(), item.clone());
            item.id()
        })
        .collect()
}

fn ca_direction(
    donor: &mut NodeState,
    recipient: &mut NodeState,
    start: Seconds,
    end: Seconds,
    params: &ExchangeParams,
) -> Transfer {
    let contributed = compute_contributed_network(&mut donor.network, &recipient.network, start, end, params);
    let mut transfer = Transfer {
        donor: donor.id,
        recipient: recipient.id,
        ..Transfer::default()
    };
    if contributed.is_empty() {
        return transfer;
    }
    recipient.network.merge_contributed(&contributed, end);
    let picked: Vec<TaggedItem> = tally_select(
        donor.items.values(),
        |id| recipient.items.contains_key(&id),
        &contributed,
        params.data_limit,
    )
    .into_iter()
    .cloned()
    .collect();
    transfer.items = deliver(recipient, &picked);
    transfer.contributed = contributed;
    transfer
}

/// Orders two nodes so the one with the lower id comes first.
pub(crate) fn by_id<'a>(a: &'a mut NodeState, b: &'a mut NodeState) -> (&'a mut NodeState, &'a mut NodeState) {
    if a.id <= b.id {
        (a, b)
    } else {
        (b, a)
    }
}

/// Runs both directions of a contact: the lower-id node donates first, then
/// roles swap. Items are copied, never removed from the sender.
pub fn run_contact_ca(
    a: &mut NodeState,
    b: &mut NodeState,
    start: Seconds,
    end: Seconds,
    params: &ExchangeParams,
) -> [Transfer; 2] {
    let (first, second) = by_id(a, b);
    let forward = ca_direction(first, second, start, end, params);
    let backward = ca_direction(second, first, start, end, params);
    [forward, backward]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::EdgeState;

    fn l(s: &str) -> TagLabel {
        TagLabel::new(s).unwrap()
    }

    fn e(a: &str, b: &str) -> Edge {
        Edge::new(l(a), l(b)).unwrap()
    }

    fn net(edges: &[(&str, &str, u32)], t: Seconds) -> SemanticNetwork {
        let mut n = SemanticNetwork::new();
        for &(a, b, p) in edges {
            n.insert_edge(
                e(a, b),
                EdgeState {
                    last_activation: t,
                    popularity: p,
                },
            );
        }
        n
    }

    fn labels(v: &[&str]) -> Vec<TagLabel> {
        v.iter().map(|s| l(s)).collect()
    }

    #[test]
    fn keys_are_the_shared_labels() {
        let d = net(&[("a", "b", 1), ("b", "c", 1)], 0.0);
        let r = net(&[("c", "d", 1)], 0.0);
        assert_eq!(key_vertices(&d, &r), labels(&["c"]));
        assert_eq!(key_vertices(&d, &d), labels(&["a", "b", "c"]));
        let other = net(&[("x", "y", 1)], 0.0);
        assert!(key_vertices(&d, &other).is_empty());
    }

    #[test]
    fn boost_counts_key_key_edges_twice() {
        let mut d = net(&[("k", "a", 1), ("k", "b", 1), ("k", "j", 1), ("a", "b", 1)], 0.0);
        boost_key_popularity(&mut d, &labels(&["j", "k"]));
        assert_eq!(d.edge_state(&e("k", "a")).unwrap().popularity, 2);
        assert_eq!(d.edge_state(&e("k", "b")).unwrap().popularity, 2);
        assert_eq!(d.edge_state(&e("k", "j")).unwrap().popularity, 3);
        assert_eq!(d.edge_state(&e("a", "b")).unwrap().popularity, 1);
        let before = d.clone();
        boost_key_popularity(&mut d, &[]);
        assert_eq!(d, before);
    }

    #[test]
    fn relevance_sums_incident_strengths() {
        let mut d = net(&[("k", "a", 1), ("k", "b", 1), ("k", "c", 1)], 10.0);
        d.add_vertex(l("lonely"));
        assert_eq!(key_relevance(&d, &l("k"), 10.0, 0.01).unwrap(), 3.0);
        assert_eq!(key_relevance(&d, &l("lonely"), 10.0, 0.01).unwrap(), 0.0);
        assert!(key_relevance(&d, &l("nope"), 10.0, 0.01).is_err());

        // strengths 0.5 and 0.25 with gamma = ln 2 per second
        let g = core::f64::consts::LN_2;
        let d = net(&[("k", "a", 1)], 9.0);
        let mut d2 = d.clone();
        d2.insert_edge(
            e("k", "b"),
            EdgeState {
                last_activation: 8.0,
                popularity: 1,
            },
        );
        let rel = key_relevance(&d2, &l("k"), 10.0, g).unwrap();
        assert!((rel - 0.75).abs() < 1e-15);
    }

    #[test]
    fn retrieval_weight_cases() {
        assert_eq!(retrieval_weight(1.0, 1, 0.0, 0.1), 0.0);
        assert!((retrieval_weight(1.0, 1, 1e6, 0.1) - 1.0).abs() < 1e-12);
        let w = retrieval_weight(1.0, 2, 2.0, 0.1);
        assert!((w - 0.090_634_623_461_009_08).abs() < 1e-15);
    }

    #[test]
    fn omega_min_cases() {
        let mut p = ExchangeParams::default();
        assert!((omega_min(&p) - 0.127_738_279_338_226_76).abs() < 1e-15);
        let at_35 = omega_min(&p);
        p.w_min_seconds = 70.0;
        assert!(omega_min(&p) < at_35);
        p.w_min_seconds = 0.0;
        assert_eq!(omega_min(&p), 1.0 - libm::exp(-0.2));
    }

    fn open_params(tag_limit: usize) -> ExchangeParams {
        ExchangeParams {
            tag_limit,
            theta_rec: 1,
            ..ExchangeParams::default()
        }
    }

    #[test]
    fn no_keys_means_empty_contribution() {
        let mut d = net(&[("a", "b", 5)], 0.0);
        let r = net(&[("x", "y", 5)], 0.0);
        let before = d.clone();
        let c = compute_contributed_network(&mut d, &r, 0.0, 30.0, &ExchangeParams::default());
        assert!(c.is_empty());
        assert_eq!(d, before);
    }

    #[test]
    fn chain_respects_tag_limit_and_admission_rule() {
        let mut d = net(&[("k", "a", 3), ("a", "b", 3)], 100.0);
        let r = net(&[("k", "z", 1)], 100.0);
        let c = compute_contributed_network(&mut d, &r, 70.0, 100.0, &open_params(2));
        assert_eq!(c.vertices(), labels(&["k", "a"]).as_slice());
        assert_eq!(c.edges(), &[e("k", "a")]);
        // traversed edge activated on top of the key boost, the other untouched
        assert_eq!(d.edge_state(&e("k", "a")).unwrap().popularity, 5);
        assert_eq!(d.edge_state(&e("a", "b")).unwrap().popularity, 3);
    }

    #[test]
    fn depth_first_follows_stronger_branch_first() {
        // k-a is fresher than k-b, so the a-branch is fully expanded first
        let mut d = SemanticNetwork::new();
        let st = |t: f64, p: u32| EdgeState {
            last_activation: t,
            popularity: p,
        };
        d.insert_edge(e("k", "a"), st(100.0, 3));
        d.insert_edge(e("k", "b"), st(90.0, 3));
        d.insert_edge(e("a", "a2"), st(100.0, 3));
        d.insert_edge(e("b", "b2"), st(100.0, 3));
        let r = net(&[("k", "z", 1)], 100.0);
        let c = compute_contributed_network(&mut d, &r, 50.0, 100.0, &open_params(4));
        assert_eq!(c.vertices(), labels(&["k", "a", "a2", "b"]).as_slice());
        assert_eq!(c.edges(), &[e("k", "a"), e("a", "a2"), e("k", "b")]);
    }

    #[test]
    fn unrecognized_and_weak_edges_are_skipped() {
        let mut d = net(&[("k", "a", 1)], 0.0);
        d.insert_edge(
            e("a", "b"),
            EdgeState {
                last_activation: 0.0,
                popularity: 1,
            },
        );
        d.insert_edge(
            e("k", "old"),
            EdgeState {
                last_activation: -600.0,
                popularity: 1,
            },
        );
        let r = net(&[("k", "z", 1)], 0.0);
        let params = ExchangeParams {
            theta_rec: 2,
            ..ExchangeParams::default()
        };
        let c = compute_contributed_network(&mut d, &r, -30.0, 0.0, &params);
        // k-a becomes recognized via the key boost; a-b stays unrecognized;
        // k-old is recognized but far below the retrieval threshold.
        assert_eq!(c.vertices(), labels(&["k", "a"]).as_slice());
        assert_eq!(c.edges(), &[e("k", "a")]);
    }

    #[test]
    fn tallying_prefers_larger_intersections() {
        let mut c = ContributedNetwork::new();
        c.push_edge(e("lake", "mountain"));
        c.push_vertex(l("snow"));
        let first = TaggedItem::from_strs(2, ["lake", "mountain", "sky"]).unwrap();
        let second = TaggedItem::from_strs(1, ["lake", "boat"]).unwrap();
        let unrelated = TaggedItem::from_strs(0, ["car"]).unwrap();
        let items = [first.clone(), second.clone(), unrelated];
        let picked = tally_select(&items, |_| false, &c, 10);
        assert_eq!(picked, vec![&first, &second]);
        assert_eq!(tally_select(&items, |_| false, &c, 1), vec![&first]);
        assert!(tally_select(&items, |_| true, &c, 10).is_empty());
    }

    #[test]
    fn tally_ties_break_by_id() {
        let mut c = ContributedNetwork::new();
        c.push_vertex(l("a"));
        let items = [
            TaggedItem::from_strs(9, ["a"]).unwrap(),
            TaggedItem::from_strs(4, ["a", "q"]).unwrap(),
        ];
        let ids: Vec<_> = tally_select(&items, |_| false, &c, 5).iter().map(|i| i.id()).collect();
        assert_eq!(ids, vec![ItemId(4), ItemId(9)]);
    }

    fn node(id: u32, items: &[TaggedItem]) -> NodeState {
        let mut n = NodeState::new(NodeId(id), 0);
        n.network = SemanticNetwork::build_initial(items, 0.0).unwrap();
        for i in items {
            n.items.insert(i.id(), i.clone());
        }
        n
    }

    #[test]
    fn contact_without_shared_tags_moves_nothing() {
        let mut a = node(0, &[TaggedItem::from_strs(1, ["a", "b"]).unwrap()]);
        let mut b = node(1, &[TaggedItem::from_strs(2, ["x", "y"]).unwrap()]);
        let (a0, b0) = (a.clone(), b.clone());
        let t = run_contact_ca(&mut a, &mut b, 0.0, 20.0, &ExchangeParams::default());
        assert!(t.iter().all(|t| t.contributed.is_empty() && t.items.is_empty()));
        assert_eq!((a, b), (a0, b0));
    }

    #[test]
    fn identical_nodes_exchange_knowledge_but_no_items() {
        let items = [TaggedItem::from_strs(1, ["a", "b", "c"]).unwrap()];
        let mut a = node(3, &items);
        let mut b = node(1, &items);
        let t = run_contact_ca(&mut a, &mut b, 0.0, 20.0, &ExchangeParams::default());
        assert_eq!(t[0].donor, NodeId(1));
        assert!(!t[0].contributed.is_empty());
        assert!(t.iter().all(|t| t.items.is_empty()));
    }

    #[test]
    fn two_node_contact_hand_trace() {
        // A (id 0): items {k,a}, {a,b}; B (id 1): item {k,z}. Contact [0, 20].
        let a_items = [
            TaggedItem::from_strs(10, ["k", "a"]).unwrap(),
            TaggedItem::from_strs(11, ["a", "b"]).unwrap(),
        ];
        let b_items = [TaggedItem::from_strs(20, ["k", "z"]).unwrap()];
        let mut a = node(0, &a_items);
        let mut b = node(1, &b_items);
        let params = ExchangeParams::default();
        let t = run_contact_ca(&mut a, &mut b, 0.0, 20.0, &params);

        // A donates: key k, k-a boosted to 2 (recognized), a-b stays at 1.
        assert_eq!(t[0].contributed.vertices(), labels(&["k", "a"]).as_slice());
        assert_eq!(t[0].contributed.edges(), &[e("k", "a")]);
        assert_eq!(t[0].items, vec![ItemId(10), ItemId(11)]);
        // B now holds k-a at popularity 2 (new edge, activated on merge).
        // B donates: keys k, a. Relevance k = w(k-z)+w(k-a), a = w(k-a).
        // Boost: k-z -> 2, k-a -> 4 (both endpoints are keys).
        assert_eq!(t[1].contributed.vertices(), labels(&["k", "a", "z"]).as_slice());
        assert_eq!(t[1].contributed.edges(), &[e("k", "a"), e("k", "z")]);
        assert_eq!(t[1].items, vec![ItemId(20)]);

        let ka = b.network.edge_state(&e("k", "a")).unwrap();
        assert_eq!((ka.popularity, ka.last_activation), (5, 20.0));
        let kz = b.network.edge_state(&e("k", "z")).unwrap();
        assert_eq!(kz.popularity, 3);
        // A: k-a 1 +1 boost +1 traversal, then +1 merged back from B
        assert_eq!(a.network.edge_state(&e("k", "a")).unwrap().popularity, 4);
        assert_eq!(a.network.edge_state(&e("k", "z")).unwrap().popularity, 2);
        assert_eq!(a.network.edge_state(&e("a", "b")).unwrap().popularity, 1);
        assert_eq!(a.items.len(), 3);
        assert_eq!(b.items.len(), 3);
    }
}
