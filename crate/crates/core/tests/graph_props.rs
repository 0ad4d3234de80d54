mod common;

use std::collections::BTreeSet;

use callfuse_core::graph::{parse_graph_document, serialize_graph, validate_graph};
use proptest::prelude::*;

const GRAPH12: &str = include_str!("fixtures/graph12.json");
const GRAPH12_GOLDEN: &str = include_str!("fixtures/graph12.golden.json");

#[test]
fn twelve_node_document_serializes_to_golden() {
    let g = parse_graph_document(GRAPH12.as_bytes()).unwrap();
    assert!(validate_graph(&g).is_empty());
    assert_eq!((g.nodes.len(), g.edges.len()), (12, 12));
    let out = String::from_utf8(serialize_graph(&g)).unwrap();
    assert_eq!(out, GRAPH12_GOLDEN);
    // the golden document is a fixed point
    let again = parse_graph_document(GRAPH12_GOLDEN.as_bytes()).unwrap();
    assert_eq!(again, g.canonical());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn generated_graphs_are_valid(g in common::arb_graph(30, 80)) {
        prop_assert!(validate_graph(&g).is_empty());
    }

    #[test]
    fn serialize_parse_round_trip(g in common::arb_graph(30, 80)) {
        let doc = serialize_graph(&g);
        let back = parse_graph_document(&doc).unwrap();
        prop_assert_eq!(&back, &g);
        prop_assert_eq!(serialize_graph(&back), doc);
    }

    #[test]
    fn serialization_ignores_record_order(g in common::arb_graph(20, 50), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut shuffled = g.clone();
        shuffled.nodes.shuffle(&mut rng);
        shuffled.edges.shuffle(&mut rng);
        prop_assert_eq!(serialize_graph(&shuffled), serialize_graph(&g));
    }

    #[test]
    fn edge_keys_are_unique_and_endpoints_exist(g in common::arb_graph(30, 80)) {
        let ids: BTreeSet<_> = g.nodes.iter().map(|n| &n.id).collect();
        let keys: BTreeSet<_> = g.edges.iter().map(|e| e.key()).collect();
        prop_assert_eq!(keys.len(), g.edges.len());
        prop_assert_eq!(ids.len(), g.nodes.len());
        for e in &g.edges {
            prop_assert!(ids.contains(&e.source) && ids.contains(&e.target));
            prop_assert!(!e.found_by.is_empty());
        }
    }
}
