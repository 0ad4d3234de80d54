mod common;

use std::collections::{BTreeMap, BTreeSet};

use callfuse_core::fusion::{
    assign_confidence, cell_populations, estimate_confidence, merge_graphs, proportional_quota,
    stratified_sample, union, LabeledEdgeSample, LabeledEntry, VennCell,
};
use callfuse_core::graph::{serialize_graph, validate_graph, HybridCallGraph, SourcePosition};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn pos(line: u32) -> SourcePosition {
    SourcePosition::new("a.js", line, 1)
}

fn cell(tools: &[&str]) -> VennCell {
    VennCell::new(tools.iter().copied()).unwrap()
}

/// Splits a graph into one graph per tool holding the edges that tool found.
fn per_tool(g: &HybridCallGraph) -> Vec<(String, HybridCallGraph)> {
    common::TOOLS
        .iter()
        .map(|&t| {
            let mut h = g.clone();
            h.edges.retain(|e| e.found_by.contains(t));
            h.tool_ids = BTreeSet::from([t.to_string()]);
            (t.to_string(), h)
        })
        .collect()
}

fn labeled(g: &HybridCallGraph, seed: u64) -> LabeledEdgeSample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    LabeledEdgeSample {
        entries: g
            .edges
            .iter()
            .map(|e| LabeledEntry {
                source: e.source.clone(),
                target: e.target.clone(),
                cell: VennCell::of_edge(e).unwrap(),
                valid: Some(rng.random_bool(0.6)),
            })
            .collect(),
    }
}

#[test]
fn ten_edges_over_three_tools() {
    let sets: [&[&str]; 10] = [
        &["static-ast"],
        &["static-ast"],
        &["static-ast"],
        &["dynamic-trace"],
        &["dynamic-trace", "static-ast"],
        &["dynamic-trace", "static-ast"],
        &["dynamic-trace", "name-match", "static-ast"],
        &["name-match"],
        &["name-match", "static-ast"],
        &["name-match", "static-ast"],
    ];
    let mut tools: BTreeMap<&str, Vec<(u32, u32)>> = BTreeMap::new();
    for (i, s) in sets.iter().enumerate() {
        for t in *s {
            tools.entry(t).or_default().push((i as u32 + 1, i as u32 + 2));
        }
    }
    let graphs = tools
        .into_iter()
        .map(|(t, edges)| {
            let mut g = HybridCallGraph::new();
            for (s, d) in edges {
                g.upsert_node(callfuse_core::graph::FunctionNode::new(pos(s)));
                g.upsert_node(callfuse_core::graph::FunctionNode::new(pos(d)));
                g.edges.push(callfuse_core::graph::CallEdge::new(pos(s), pos(d), t, 1.0));
            }
            g.tool_ids.insert(t.to_string());
            (t.to_string(), g)
        })
        .collect();
    let merged = merge_graphs(graphs).unwrap();
    assert_eq!(merged.edges.len(), 10);
    assert_eq!(merged.nodes.len(), 11);
    let expected = BTreeMap::from([
        (cell(&["static-ast"]), 3),
        (cell(&["dynamic-trace"]), 1),
        (cell(&["dynamic-trace", "static-ast"]), 2),
        (cell(&["dynamic-trace", "name-match", "static-ast"]), 1),
        (cell(&["name-match"]), 1),
        (cell(&["name-match", "static-ast"]), 2),
    ]);
    assert_eq!(cell_populations(&merged), expected);
}

#[test]
fn half_valid_cell_gives_one_half_on_every_edge() {
    let mut g = HybridCallGraph::new();
    for i in 0..10 {
        g.upsert_node(callfuse_core::graph::FunctionNode::new(pos(i + 1)));
        g.upsert_node(callfuse_core::graph::FunctionNode::new(pos(i + 100)));
        g.edges.push(callfuse_core::graph::CallEdge::new(pos(i + 1), pos(i + 100), "static-ast", 0.0));
    }
    g.tool_ids.insert("static-ast".into());
    let sample = LabeledEdgeSample {
        entries: g
            .edges
            .iter()
            .enumerate()
            .map(|(i, e)| LabeledEntry {
                source: e.source.clone(),
                target: e.target.clone(),
                cell: cell(&["static-ast"]),
                valid: Some(i % 2 == 0),
            })
            .collect(),
    };
    let assigned = assign_confidence(&g, &estimate_confidence(&sample).unwrap());
    assert!(assigned.edges.iter().all(|e| e.confidence == 0.5));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn union_is_commutative_and_associative(
        a in common::arb_graph(12, 30),
        b in common::arb_graph(12, 30),
        c in common::arb_graph(12, 30),
    ) {
        prop_assert_eq!(serialize_graph(&union(&a, &b)), serialize_graph(&union(&b, &a)));
        prop_assert_eq!(
            serialize_graph(&union(&union(&a, &b), &c)),
            serialize_graph(&union(&a, &union(&b, &c)))
        );
        prop_assert!(validate_graph(&union(&a, &b)).is_empty());
    }

    #[test]
    fn merge_recovers_found_by_regardless_of_order(g in common::arb_graph(20, 60), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let mut parts = per_tool(&g);
        parts.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let merged = merge_graphs(parts).unwrap();
        prop_assert_eq!(merged.edges.len(), g.edges.len());
        for e in &g.edges {
            let m = merged.edge(&e.source, &e.target).unwrap();
            prop_assert_eq!(&m.found_by, &e.found_by);
        }
    }

    #[test]
    fn populations_sum_to_edge_count(g in common::arb_graph(20, 60)) {
        let pops = cell_populations(&g);
        prop_assert_eq!(pops.values().sum::<usize>(), g.edges.len());
    }

    #[test]
    fn tallies_match_brute_force(g in common::arb_graph(20, 60), seed in any::<u64>()) {
        prop_assume!(!g.edges.is_empty());
        let sample = labeled(&g, seed);
        let table = estimate_confidence(&sample).unwrap();
        for (c, t) in &table.cells {
            let members: Vec<_> = sample.entries.iter().filter(|e| &e.cell == c).collect();
            let tp = members.iter().filter(|e| e.valid == Some(true)).count() as u64;
            prop_assert_eq!((t.tp, t.total), (tp, members.len() as u64));
            prop_assert_eq!(table.rate(c), tp as f64 / members.len() as f64);
        }
        prop_assert_eq!(table.fallback.total, sample.entries.len() as u64);
    }

    #[test]
    fn assignment_is_idempotent_and_uses_table_rates(g in common::arb_graph(20, 60), seed in any::<u64>()) {
        prop_assume!(!g.edges.is_empty());
        // label only half the graph so some cells may fall back
        let mut sample = labeled(&g, seed);
        sample.entries.truncate(sample.entries.len().div_ceil(2));
        let table = estimate_confidence(&sample).unwrap();
        let once = assign_confidence(&g, &table);
        let twice = assign_confidence(&once, &table);
        prop_assert_eq!(&once, &twice);
        prop_assert_eq!(once.edges.len(), g.edges.len());
        prop_assert_eq!(once.nodes.len(), g.nodes.len());
        let allowed: Vec<f64> = table
            .cells
            .values()
            .map(|t| t.rate())
            .chain([table.fallback_rate()])
            .collect();
        for e in &once.edges {
            prop_assert!(allowed.contains(&e.confidence));
            prop_assert!((0.0..=1.0).contains(&e.confidence));
        }
    }

    #[test]
    fn stratified_sample_respects_quota(g in common::arb_graph(25, 80), total in 0usize..40, seed in any::<u64>()) {
        let pops = cell_populations(&g);
        let quota = proportional_quota(&pops, total, 1);
        for (c, q) in &quota {
            prop_assert!(*q <= pops[c]);
            prop_assert!(*q >= 1);
        }
        let drawn: usize = quota.values().sum();
        prop_assert!(drawn >= total.min(g.edges.len()));
        let sample = stratified_sample(&g, &quota, seed).unwrap();
        prop_assert_eq!(sample.entries.len(), drawn);
        let keys: BTreeSet<_> = sample.entries.iter().map(|e| (&e.source, &e.target)).collect();
        prop_assert_eq!(keys.len(), drawn);
        for e in &sample.entries {
            let edge = g.edge(&e.source, &e.target).unwrap();
            prop_assert_eq!(&VennCell::of_edge(edge).unwrap(), &e.cell);
        }
        prop_assert_eq!(sample, stratified_sample(&g, &quota, seed).unwrap());
    }
}
