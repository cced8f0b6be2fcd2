//! Non-cognitive baseline: random-walk contributed networks and uniform item
//! choice, over the same data structures as the cognitive exchange.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use rand::seq::index;
use rand::Rng;

use crate::exchange::{by_id, deliver, key_vertices, ExchangeParams, NodeState, Transfer};
use crate::graph::{ContributedNetwork, Edge, SemanticNetwork};
use crate::item::{ItemId, TagLabel, TaggedItem};
use crate::Seconds;

/// Vertices reachable from any of `starts`.
fn reachable(net: &SemanticNetwork, starts: &[TagLabel]) -> usize {
    let mut seen: BTreeSet<&TagLabel> = starts.iter().collect();
    let mut stack: Vec<&TagLabel> = starts.iter().collect();
    while let Some(v) = stack.pop() {
        for u in net.neighbors(v) {
            if seen.insert(u) {
                stack.push(u);
            }
        }
    }
    seen.len()
}

/// One random-walk step: each incident edge of `from` is taken with
/// probability 1/degree. `None` for an isolated vertex.
pub fn walk_step<'a, R: Rng + ?Sized>(net: &'a SemanticNetwork, from: &TagLabel, rng: &mut R) -> Option<&'a TagLabel> {
    let degree = net.degree(from);
    if degree == 0 {
        return None;
    }
    net.neighbors(from).nth(rng.random_range(0..degree))
}

/// Grows a contributed network by a random walk over the donor network,
/// starting from a uniformly chosen key vertex.
///
/// Every step follows a uniformly chosen incident edge; the edge joins the
/// contribution and is activated the first time it is traversed, and a newly
/// reached vertex is appended. When every neighbour of the current vertex is
/// already in the contribution the walk restarts from a uniformly chosen key.
/// It stops at `tag_limit` vertices or once everything reachable from the
/// keys has been collected.
pub fn compute_contributed_network_ba<R: Rng + ?Sized>(
    donor: &mut SemanticNetwork,
    recipient: &SemanticNetwork,
    now: Seconds,
    params: &ExchangeParams,
    rng: &mut R,
) -> ContributedNetwork {
    let keys = key_vertices(donor, recipient);
    let mut contrib = ContributedNetwork::new();
    if keys.is_empty() {
        return contrib;
    }
    let target = params.tag_limit.min(reachable(donor, &keys));
    // Bounded so a pathological graph cannot stall a run; the walk reaches its
    // target long before this in practice.
    let mut budget = 1000 * (donor.vertex_count() + 1) * params.tag_limit.max(1);

    let mut current = keys[rng.random_range(0..keys.len())].clone();
    contrib.push_vertex(current.clone());
    let mut restarted = true;
    while contrib.vertex_count() < target && budget > 0 {
        budget -= 1;
        // After a restart one step is always taken, so a key whose
        // neighbours are all collected can still lead past them.
        let dead_end = donor.neighbors(&current).all(|u| contrib.contains_vertex(u));
        if dead_end && !restarted {
            current = keys[rng.random_range(0..keys.len())].clone();
            contrib.push_vertex(current.clone());
            restarted = true;
            continue;
        }
        restarted = false;
        let Some(next) = walk_step(donor, &current, rng).cloned() else {
            continue;
        };
        let e = Edge::new(current.clone(), next.clone()).expect("adjacency has no self-loops");
        if contrib.push_edge(e.clone()) {
            donor.activate_edge(&e, now).expect("walked edge exists");
        }
        current = next;
    }
    contrib
}

/// Uniform sample, without replacement, of up to `data_limit` of the sender's
/// items that the receiver lacks and that share at least one tag with the
/// contribution. Returned in sampling order.
pub fn random_select<'a, R: Rng + ?Sized>(
    sender_items: impl IntoIterator<Item = &'a TaggedItem>,
    receiver_owns: impl Fn(ItemId) -> bool,
    contrib: &ContributedNetwork,
    data_limit: usize,
    rng: &mut R,
) -> Vec<&'a TaggedItem> {
    let candidates: Vec<&TaggedItem> = sender_items
        .into_iter()
        .filter(|i| !receiver_owns(i.id()))
        .filter(|i| i.tags().iter().any(|t| contrib.contains_vertex(t)))
        .collect();
    let amount = data_limit.min(candidates.len());
    index::sample(rng, candidates.len(), amount)
        .into_iter()
        .map(|k| candidates[k])
        .collect()
}

fn ba_direction<R: Rng + ?Sized>(
    donor: &mut NodeState,
    recipient: &mut NodeState,
    end: Seconds,
    params: &ExchangeParams,
    rng: &mut R,
) -> Transfer {
    let contributed = compute_contributed_network_ba(&mut donor.network, &recipient.network, end, params, rng);
    let mut transfer = Transfer {
        donor: donor.id,
        recipient: recipient.id,
        ..Transfer::default()
    };
    if contributed.is_empty() {
        return transfer;
    }
    recipient.network.merge_contributed(&contributed, end);
    let picked: Vec<TaggedItem> = random_select(
        donor.items.values(),
        |id| recipient.items.contains_key(&id),
        &contributed,
        params.data_limit,
        rng,
    )
    .into_iter()
    .cloned()
    .collect();
    transfer.items = deliver(recipient, &picked);
    transfer.contributed = contributed;
    transfer
}

/// Both directions of a benchmark contact, lower id donating first.
pub fn run_contact_ba<R: Rng + ?Sized>(
    a: &mut NodeState,
    b: &mut NodeState,
    end: Seconds,
    params: &ExchangeParams,
    rng: &mut R,
) -> [Transfer; 2] {
    let (first, second) = by_id(a, b);
    let forward = ba_direction(first, second, end, params, rng);
    let backward = ba_direction(second, first, end, params, rng);
    [forward, backward]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::EdgeState;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn l(s: &str) -> TagLabel {
        TagLabel::new(s).unwrap()
    }

    fn e(a: &str, b: &str) -> Edge {
        Edge::new(l(a), l(b)).unwrap()
    }

    fn net(edges: &[(&str, &str)]) -> SemanticNetwork {
        let mut n = SemanticNetwork::new();
        for &(a, b) in edges {
            n.insert_edge(e(a, b), EdgeState::fresh(0.0));
        }
        n
    }

    #[test]
    fn empty_keys_give_empty_walk() {
        let mut d = net(&[("a", "b")]);
        let r = net(&[("x", "y")]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let c = compute_contributed_network_ba(&mut d, &r, 5.0, &ExchangeParams::default(), &mut rng);
        assert!(c.is_empty());
    }

    #[test]
    fn forced_walk_on_a_path() {
        let params = ExchangeParams {
            tag_limit: 2,
            ..ExchangeParams::default()
        };
        for seed in 0..20 {
            let mut d = net(&[("k", "a")]);
            let r = net(&[("k", "z")]);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let c = compute_contributed_network_ba(&mut d, &r, 5.0, &params, &mut rng);
            assert_eq!(c.vertices(), &[l("k"), l("a")]);
            assert_eq!(c.edges(), &[e("k", "a")]);
            let s = d.edge_state(&e("k", "a")).unwrap();
            assert_eq!((s.popularity, s.last_activation), (2, 5.0));
        }
    }

    #[test]
    fn walk_respects_limit_and_subgraph() {
        let edges: Vec<(String, String)> = (0..12)
            .flat_map(|i| {
                [
                    (format!("v{i}"), format!("v{}", (i + 1) % 12)),
                    (format!("v{i}"), format!("v{}", (i + 5) % 12)),
                ]
            })
            .collect();
        let pairs: Vec<(&str, &str)> = edges.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
        let base = net(&pairs);
        let r = net(&[("v0", "zz"), ("v7", "zz")]);
        for seed in 0..50 {
            let mut d = base.clone();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let params = ExchangeParams {
                tag_limit: 7,
                ..ExchangeParams::default()
            };
            let c = compute_contributed_network_ba(&mut d, &r, 1.0, &params, &mut rng);
            assert_eq!(c.vertex_count(), 7);
            assert!(c.is_subgraph_of(&base));
        }
    }

    #[test]
    fn walk_stops_when_reachable_set_is_exhausted() {
        let mut d = net(&[("k", "a"), ("a", "b"), ("x", "y")]);
        let r = net(&[("k", "q")]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = compute_contributed_network_ba(&mut d, &r, 1.0, &ExchangeParams::default(), &mut rng);
        assert_eq!(c.vertex_count(), 3);
        assert!(!c.contains_vertex(&l("x")));
    }

    #[test]
    fn star_spokes_are_equally_likely() {
        let d = net(&[("c", "s1"), ("c", "s2"), ("c", "s3"), ("c", "s4")]);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut counts = std::collections::BTreeMap::new();
        let trials = 100_000;
        for _ in 0..trials {
            let next = walk_step(&d, &l("c"), &mut rng).unwrap();
            *counts.entry(next.clone()).or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), 4);
        for c in counts.values() {
            let f = *c as f64 / trials as f64;
            assert!((f - 0.25).abs() < 0.01, "frequency {f}");
        }
    }

    #[test]
    fn random_select_filters_and_bounds() {
        let mut c = ContributedNetwork::new();
        c.push_vertex(l("a"));
        let items: Vec<TaggedItem> = (0..3).map(|i| TaggedItem::from_strs(i, ["a"]).unwrap()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(random_select(&items, |_| false, &c, 10, &mut rng).len(), 3);
        let off: Vec<TaggedItem> = (0..3).map(|i| TaggedItem::from_strs(i, ["b"]).unwrap()).collect();
        assert!(random_select(&off, |_| false, &c, 10, &mut rng).is_empty());
        assert!(random_select(&items, |_| true, &c, 10, &mut rng).is_empty());
    }

    #[test]
    fn random_select_is_uniform() {
        let mut c = ContributedNetwork::new();
        c.push_vertex(l("a"));
        let items: Vec<TaggedItem> = (0..20).map(|i| TaggedItem::from_strs(i, ["a"]).unwrap()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut hits = [0usize; 20];
        let trials = 10_000;
        for _ in 0..trials {
            for it in random_select(&items, |_| false, &c, 5, &mut rng) {
                hits[it.id().0 as usize] += 1;
            }
        }
        for h in hits {
            let f = h as f64 / trials as f64;
            assert!((f - 0.25).abs() < 0.02, "frequency {f}");
        }
    }
}
