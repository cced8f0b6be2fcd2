use std::io::Cursor;

use proptest::prelude::*;
use semnet::format::{
    read_assignment, read_items, read_snapshot, read_trace, write_assignment, write_items, write_snapshot, write_trace,
};
use semnet_core::mobility::{generate_trace, MobilityConfig};
use semnet_core::{Edge, EdgeState, ItemId, NodeId, SemanticNetwork, TagLabel, TaggedItem};

fn label_strategy() -> impl Strategy<Value = TagLabel> {
    "[a-z0-9_\"\\\\# .-]{1,8}"
        .prop_filter("blank", |s| !s.trim().is_empty())
        .prop_map(|s| TagLabel::new(&s).unwrap())
}

fn network_strategy() -> impl Strategy<Value = SemanticNetwork> {
    (
        prop::collection::vec(label_strategy(), 1..10),
        prop::collection::vec((0usize..10, 0usize..10, -1e6f64..1e6, 1u32..1000), 0..25),
    )
        .prop_map(|(labels, edges)| {
            let mut net = SemanticNetwork::new();
            for l in &labels {
                net.add_vertex(l.clone());
            }
            for (a, b, t, p) in edges {
                let (a, b) = (&labels[a % labels.len()], &labels[b % labels.len()]);
                if let Ok(e) = Edge::new(a.clone(), b.clone()) {
                    net.insert_edge(
                        e,
                        EdgeState {
                            last_activation: t,
                            popularity: p,
                        },
                    );
                }
            }
            net
        })
}

proptest! {
    #[test]
    fn snapshots_round_trip(net in network_strategy(), node in 0u32..500, time in 0.0f64..1e5) {
        let mut buf = Vec::new();
        write_snapshot(&mut buf, NodeId(node), time, &net).unwrap();
        let back = read_snapshot(Cursor::new(&buf)).unwrap();
        prop_assert_eq!(back.node, NodeId(node));
        prop_assert_eq!(back.time, time);
        prop_assert_eq!(back.network, net);
    }

    #[test]
    fn items_and_assignment_round_trip(
        raw in prop::collection::btree_map(0u64..10_000, prop::collection::vec(label_strategy(), 1..5), 0..30),
        nodes in 1usize..6,
    ) {
        let items: Vec<TaggedItem> = raw.iter().map(|(&id, tags)| TaggedItem::new(ItemId(id), tags.iter().cloned()).unwrap()).collect();
        let mut buf = Vec::new();
        write_items(&mut buf, &items).unwrap();
        let back = read_items(Cursor::new(&buf)).unwrap();
        prop_assert_eq!(back.values().cloned().collect::<Vec<_>>(), items.clone());

        let assignment: Vec<Vec<ItemId>> = (0..nodes)
            .map(|n| items.iter().skip(n).step_by(nodes).map(|i| i.id()).collect())
            .collect();
        let mut buf = Vec::new();
        write_assignment(&mut buf, &assignment).unwrap();
        prop_assert_eq!(read_assignment(Cursor::new(&buf)).unwrap(), assignment);
    }
}

#[test]
fn labels_with_spaces_and_quotes_are_quoted() {
    let mut net = SemanticNetwork::new();
    let e = Edge::new(TagLabel::new("new york").unwrap(), TagLabel::new("say \"hi\"").unwrap()).unwrap();
    net.insert_edge(
        e,
        EdgeState {
            last_activation: 12.5,
            popularity: 3,
        },
    );
    let mut buf = Vec::new();
    write_snapshot(&mut buf, NodeId(7), 20.0, &net).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("SN 7 20\n"), "{text}");
    assert!(text.contains("E \"new york\" \"say \\\"hi\\\"\" 12.5 3\n"), "{text}");
}

#[test]
fn generated_trace_round_trips() {
    let cfg = MobilityConfig {
        num_nodes: 20,
        area_width: 300.0,
        area_height: 300.0,
        duration: 1500.0,
        seed: 11,
        ..MobilityConfig::default()
    };
    let trace = generate_trace(&cfg).unwrap();
    assert!(!trace.contacts.is_empty());
    let mut buf = Vec::new();
    write_trace(&mut buf, &trace.contacts).unwrap();
    assert_eq!(read_trace(Cursor::new(&buf)).unwrap(), trace.contacts);
}

#[test]
fn malformed_snapshots_are_rejected() {
    for bad in [
        "V a\n",
        "SN 1 0\nSN 1 0\n",
        "SN 1 0\nE a b 0 0\n",
        "SN 1 0\nE a a 0 1\n",
        "SN 1 0\nE a b 0 1\nE b a 0 1\n",
        "SN 1 0\nX\n",
        "",
    ] {
        assert!(read_snapshot(Cursor::new(bad)).is_err(), "{bad:?}");
    }
}
