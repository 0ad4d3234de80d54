#![allow(dead_code)]

use std::collections::BTreeSet;

use callfuse_core::graph::{CallEdge, FunctionNode, HybridCallGraph, SourcePosition};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const TOOLS: [&str; 3] = ["dynamic-trace", "name-match", "static-ast"];

fn position(i: usize) -> SourcePosition {
    let files = ["a.js", "lib/b.js", "lib/util/c.js"];
    SourcePosition::new(files[i % 3], (i / 3) as u32 + 1, (i % 7) as u32 + 1)
}

/// Random valid graph: `nodes` distinct positions, up to `edges` distinct
/// edges (self calls allowed), each reported by a non-empty tool subset.
pub fn random_graph(rng: &mut ChaCha8Rng, nodes: usize, edges: usize) -> HybridCallGraph {
    let mut g = HybridCallGraph::new();
    for i in 0..nodes {
        let mut n = FunctionNode::new(position(i));
        n.entry = rng.random_bool(0.1);
        n.is_final = rng.random_bool(0.2);
        if rng.random_bool(0.7) {
            n.name = Some(format!("fn{i}"));
        }
        g.nodes.push(n);
    }
    let mut keys = BTreeSet::new();
    for _ in 0..edges {
        if nodes == 0 {
            break;
        }
        let (s, t) = (rng.random_range(0..nodes), rng.random_range(0..nodes));
        if !keys.insert((s, t)) {
            continue;
        }
        let mut found_by = BTreeSet::new();
        while found_by.is_empty() {
            for tool in TOOLS {
                if rng.random_bool(0.4) {
                    found_by.insert(tool.to_string());
                }
            }
        }
        g.tool_ids.extend(found_by.iter().cloned());
        g.edges.push(CallEdge {
            source: position(s),
            target: position(t),
            found_by,
            // a coarse grid, so thresholds hit edge confidences exactly
            confidence: f64::from(rng.random_range(0..=20u32)) / 20.0,
        });
    }
    g.canonical()
}

pub fn arb_graph(max_nodes: usize, max_edges: usize) -> impl Strategy<Value = HybridCallGraph> {
    (1..=max_nodes, 0..=max_edges, any::<u64>())
        .prop_map(|(n, e, seed)| random_graph(&mut ChaCha8Rng::seed_from_u64(seed), n, e))
}

/// Two well separated Gaussian blobs in 2-D, 50 rows per class, labels
/// alternating. Points closer than 1.0 to the line x + y = 0 are redrawn,
/// so the classes are linearly separable with a margin.
pub fn two_blobs() -> String {
    use rand_distr::{Distribution, Normal};
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let noise = Normal::new(0.0, 1.0).expect("valid");
    let mut out = String::from("x,y,label\n");
    for i in 0..100 {
        let label = i % 2;
        let centre = if label == 1 { 2.0 } else { -2.0 };
        loop {
            let x: f64 = centre + noise.sample(&mut rng);
            let y: f64 = centre + noise.sample(&mut rng);
            let side = (x + y) / 2f64.sqrt();
            if (label == 1 && side > 1.0) || (label == 0 && side < -1.0) {
                out.push_str(&format!("{x:.6},{y:.6},{label}\n"));
                break;
            }
        }
    }
    out
}
