use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use toolgraph_core::kgstore::cosine;
use toolgraph_core::{Direction, Edge, EdgeLabel, Node, NodeId, NodeKind, PropValue, PropertyGraph};

const DIM: usize = 4;

#[derive(Clone, Debug)]
struct Spec {
    entities: Vec<(Vec<f64>, Option<String>)>,
    chunks: usize,
    relations: Vec<(usize, usize, u8)>,
    mentions: Vec<(usize, usize)>,
}

fn spec() -> impl Strategy<Value = Spec> {
    (1usize..12, 0usize..5).prop_flat_map(|(n, c)| {
        (
            prop::collection::vec(
                (
                    prop::collection::vec(prop_oneof![Just(0.0), -3.0..3.0f64], DIM),
                    prop::option::of("[a-z]{1,6}"),
                ),
                n,
            ),
            Just(c),
            prop::collection::vec((0..n, 0..n, 0u8..3), 0..20),
            prop::collection::vec((0..n, 0..c.max(1)), 0..10),
        )
            .prop_map(|(entities, chunks, relations, mentions)| Spec {
                entities,
                chunks,
                relations,
                mentions,
            })
    })
}

fn eid(i: usize) -> NodeId {
    NodeId::new(format!("entity:{i:02}"))
}

fn build(s: &Spec) -> PropertyGraph {
    let mut g = PropertyGraph::new(DIM);
    for (i, (emb, name)) in s.entities.iter().enumerate() {
        let mut n = Node::new(eid(i), NodeKind::Entity).with_embedding(emb.clone());
        if let Some(name) = name {
            n = n.with_prop("name", name.as_str()).with_prop("weight", i as f64 + 0.1);
        }
        g.add_node(n).unwrap();
    }
    for c in 0..s.chunks {
        g.add_node(Node::new(format!("chunk:{c}"), NodeKind::Chunk).with_prop("text", format!("chunk {c}")))
            .unwrap();
    }
    for (a, b, r) in &s.relations {
        g.add_edge(&eid(*a), &eid(*b), EdgeLabel::relation(format!("r{r}"))).unwrap();
    }
    if s.chunks > 0 {
        for (e, c) in &s.mentions {
            g.add_edge(&eid(*e), &NodeId::new(format!("chunk:{c}")), EdgeLabel::Mentions)
                .unwrap();
        }
    }
    g
}

fn edge_set(g: &PropertyGraph) -> BTreeSet<Edge> {
    g.edges().collect()
}

fn dump(g: &PropertyGraph) -> String {
    let mut buf = Vec::new();
    g.export(&mut buf).unwrap();
    String::from_utf8(buf).unwrap()
}

fn check_integrity(g: &PropertyGraph) {
    let mut count = 0;
    for e in g.edges() {
        count += 1;
        assert!(g.contains(&e.src) && g.contains(&e.dst), "dangling edge {e:?}");
        let out = g.neighbors(&e.src, Some(&e.label), Direction::Out).unwrap();
        assert!(out.iter().any(|(n, x)| n == &e.dst && x == &e));
        let inc = g.neighbors(&e.dst, Some(&e.label), Direction::In).unwrap();
        assert!(inc.iter().any(|(n, x)| n == &e.src && x == &e));
    }
    assert_eq!(count, g.edge_count());
    for (from, to) in g.aliases() {
        assert!(!g.contains(from));
        assert!(g.contains(to), "alias {from} points at missing {to}");
    }
}

/// Full scan sorted by score descending, then id.
fn knn_oracle(g: &PropertyGraph, q: &[f64], k: usize, kind: Option<NodeKind>) -> Vec<(NodeId, f64)> {
    let mut all = Vec::new();
    for n in g.nodes() {
        if kind.is_some_and(|k| k != n.kind) {
            continue;
        }
        let Some(e) = &n.embedding else { continue };
        let dot: f64 = q.iter().zip(e).map(|(a, b)| a * b).sum();
        let nq = q.iter().map(|x| x * x).sum::<f64>().sqrt();
        let ne = e.iter().map(|x| x * x).sum::<f64>().sqrt();
        let s = if nq == 0.0 || ne == 0.0 { 0.0 } else { dot / (nq * ne) };
        all.push((n.id.clone(), s));
    }
    for i in 0..all.len() {
        for j in i + 1..all.len() {
            let swap = all[j].1 > all[i].1 || (all[j].1 == all[i].1 && all[j].0 < all[i].0);
            if swap {
                all.swap(i, j);
            }
        }
    }
    all.truncate(k);
    all
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn built_graphs_are_consistent(s in spec()) {
        let g = build(&s);
        check_integrity(&g);
        prop_assert_eq!(g.node_count(), s.entities.len() + s.chunks);
        let distinct_rel: BTreeSet<_> = s.relations.iter().collect();
        let distinct_men: BTreeSet<_> = if s.chunks > 0 { s.mentions.iter().collect() } else { BTreeSet::new() };
        prop_assert_eq!(g.edge_count(), distinct_rel.len() + distinct_men.len());
    }

    #[test]
    fn knn_matches_full_scan(s in spec(), q in prop::collection::vec(-3.0..3.0f64, DIM), k in 1usize..15) {
        let g = build(&s);
        for kind in [None, Some(NodeKind::Entity), Some(NodeKind::Chunk)] {
            let got = g.knn(&q, k, kind).unwrap();
            let want = knn_oracle(&g, &q, k, kind);
            prop_assert_eq!(got.len(), want.len());
            for (a, b) in got.iter().zip(&want) {
                prop_assert_eq!(&a.0, &b.0);
                prop_assert!((a.1 - b.1).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn cosine_is_symmetric_and_bounded(a in prop::collection::vec(-5.0..5.0f64, DIM), b in prop::collection::vec(-5.0..5.0f64, DIM)) {
        let s = cosine(&a, &b);
        prop_assert!((s - cosine(&b, &a)).abs() < 1e-12);
        prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&s));
        prop_assert_eq!(cosine(&a, &[0.0; DIM]), 0.0);
    }

    #[test]
    fn export_import_is_identity(s in spec(), merge in prop::collection::btree_set(0usize..12, 0..4)) {
        let mut g = build(&s);
        let group: BTreeSet<NodeId> = merge.into_iter().filter(|i| *i < s.entities.len()).map(eid).collect();
        if let Some(first) = group.iter().next().cloned() {
            g.merge_nodes(&group, &first).unwrap();
        }
        let text = dump(&g);
        let back = PropertyGraph::import(text.as_bytes()).unwrap();
        prop_assert_eq!(dump(&back), text);
        prop_assert_eq!(edge_set(&back), edge_set(&g));
        prop_assert_eq!(back.aliases(), g.aliases());
        for n in g.nodes() {
            prop_assert_eq!(back.get(&n.id), Some(n));
        }
    }

    #[test]
    fn merge_rewires_every_edge(s in spec(), members in prop::collection::btree_set(0usize..12, 2..5)) {
        let mut g = build(&s);
        let group: BTreeSet<NodeId> = members.into_iter().filter(|i| *i < s.entities.len()).map(eid).collect();
        prop_assume!(group.len() >= 2);
        let survivor = group.iter().last().unwrap().clone();
        let before = edge_set(&g);
        let props_before: BTreeMap<NodeId, _> = group.iter().map(|id| (id.clone(), g.get(id).unwrap().props.clone())).collect();

        g.merge_nodes(&group, &survivor).unwrap();
        check_integrity(&g);

        let map = |id: &NodeId| if group.contains(id) { survivor.clone() } else { id.clone() };
        let expected: BTreeSet<Edge> = before
            .iter()
            .filter(|e| {
                let touched = [&e.src, &e.dst].iter().any(|n| group.contains(n) && **n != survivor);
                !touched || map(&e.src) != map(&e.dst)
            })
            .map(|e| Edge { src: map(&e.src), dst: map(&e.dst), label: e.label.clone() })
            .collect();
        prop_assert_eq!(edge_set(&g), expected);
        for id in &group {
            prop_assert_eq!(g.resolve(id), survivor.clone());
            if id != &survivor {
                prop_assert!(!g.contains(id));
            }
        }
        // Survivor keeps its own values; absent keys come from the others.
        let merged = &g.get(&survivor).unwrap().props;
        for (k, v) in &props_before[&survivor] {
            prop_assert_eq!(merged.get(k), Some(v));
        }
        let all_keys: BTreeSet<&String> = props_before.values().flat_map(|p| p.keys()).collect();
        prop_assert_eq!(merged.keys().collect::<BTreeSet<_>>(), all_keys);
    }
}

#[test]
fn merge_chains_stay_flat() {
    let mut g = PropertyGraph::new(DIM);
    for i in 0..4 {
        g.add_node(Node::new(eid(i), NodeKind::Entity)).unwrap();
    }
    g.merge_nodes(&[eid(0), eid(1)].into(), &eid(1)).unwrap();
    g.merge_nodes(&[eid(1), eid(2)].into(), &eid(2)).unwrap();
    assert_eq!(g.resolve(&eid(0)), eid(2));
    assert_eq!(g.aliases()[&eid(0)], eid(2));
    assert!(g.add_node(Node::new(eid(0), NodeKind::Entity)).is_err());
}

#[test]
fn props_survive_round_trip_with_exact_floats() {
    let mut g = PropertyGraph::new(DIM);
    g.add_node(
        Node::new("row:1", NodeKind::Row)
            .with_prop("x", 0.1 + 0.2)
            .with_prop("n", 3i64)
            .with_prop("ok", true)
            .with_embedding(vec![1e-300, -0.0, 1.0 / 3.0, 2.5e17]),
    )
    .unwrap();
    let back = PropertyGraph::import(dump(&g).as_bytes()).unwrap();
    let node = back.get(&NodeId::new("row:1")).unwrap();
    assert_eq!(node.props["x"], PropValue::Float(0.1 + 0.2));
    assert_eq!(node.props["n"], PropValue::Int(3));
    assert_eq!(node.embedding.as_ref().unwrap()[2], 1.0 / 3.0);
}
