mod common;

use callfuse_core::graph::HybridCallGraph;
use callfuse_core::invocation::{
    count_invocations, descriptive_stats, read_metric_document, threshold_sweep, threshold_tag,
    write_metric_document, Comparator, ThresholdConfig, DEFAULT_THRESHOLDS,
};
use proptest::prelude::*;
use statrs::statistics::{Data, Median, Statistics};

/// Per-node (in, out) by scanning every edge for every node.
fn brute(g: &HybridCallGraph, pass: impl Fn(f64) -> bool) -> Vec<(u64, u64)> {
    g.nodes
        .iter()
        .map(|n| {
            let inc = g.edges.iter().filter(|e| e.target == n.id && pass(e.confidence)).count();
            let out = g.edges.iter().filter(|e| e.source == n.id && pass(e.confidence)).count();
            (inc as u64, out as u64)
        })
        .collect()
}

#[test]
fn threshold_tags() {
    let tags: Vec<String> = DEFAULT_THRESHOLDS.iter().map(|&t| threshold_tag(t)).collect();
    assert_eq!(tags, ["0_00", "0_05", "0_20", "0_30"]);
}

#[test]
fn sweep_rejects_bad_thresholds() {
    let g = HybridCallGraph::new();
    assert!(threshold_sweep(&g, &[0.2, 0.1], Comparator::Strict).is_err());
    assert!(threshold_sweep(&g, &[1.5], Comparator::Strict).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn totals_are_conserved_and_shrink_with_threshold(g in common::arb_graph(40, 150)) {
        let sweep = threshold_sweep(&g, &[0.0, 0.05, 0.2, 0.3, 0.5, 1.0], Comparator::Strict).unwrap();
        let mut prev: Option<&Vec<callfuse_core::invocation::InvocationCounts>> = None;
        for (t, counts) in &sweep {
            let passing = g.edges.iter().filter(|e| e.confidence > *t).count() as u64;
            prop_assert_eq!(counts.iter().map(|c| c.hnii).sum::<u64>(), passing);
            prop_assert_eq!(counts.iter().map(|c| c.hnoi).sum::<u64>(), passing);
            if let Some(p) = prev {
                for (a, b) in p.iter().zip(counts) {
                    prop_assert!(b.hnii <= a.hnii && b.hnoi <= a.hnoi);
                }
            }
            prev = Some(counts);
        }
    }

    #[test]
    fn inclusive_zero_counts_are_degrees(g in common::arb_graph(40, 150)) {
        let counts = count_invocations(&g, ThresholdConfig { threshold: 0.0, comparator: Comparator::Inclusive });
        let degrees = brute(&g, |_| true);
        let got: Vec<(u64, u64)> = counts.iter().map(|c| (c.hnii, c.hnoi)).collect();
        prop_assert_eq!(got, degrees);
    }

    #[test]
    fn counts_match_brute_force(g in common::arb_graph(40, 150), t in prop::sample::select(vec![0.0, 0.05, 0.2, 0.3, 0.55])) {
        for comparator in [Comparator::Strict, Comparator::Inclusive] {
            let counts = count_invocations(&g, ThresholdConfig { threshold: t, comparator });
            let oracle = brute(&g, |c| match comparator {
                Comparator::Strict => c > t,
                Comparator::Inclusive => c >= t,
            });
            prop_assert_eq!(counts.len(), g.nodes.len());
            for ((c, n), o) in counts.iter().zip(&g.nodes).zip(&oracle) {
                prop_assert_eq!(&c.pos, &n.id);
                prop_assert_eq!((c.entry, c.is_final), (n.entry, n.is_final));
                prop_assert_eq!((c.hnii, c.hnoi), *o);
            }
        }
    }

    #[test]
    fn metric_document_round_trip(g in common::arb_graph(30, 80)) {
        let counts = count_invocations(&g, ThresholdConfig::strict(0.2));
        prop_assert_eq!(read_metric_document(&write_metric_document(&counts)).unwrap(), counts);
    }

    #[test]
    fn descriptive_matches_reference(values in prop::collection::vec(0u64..500, 1..200)) {
        let d = descriptive_stats(&values).unwrap();
        let xs: Vec<f64> = values.iter().map(|&v| v as f64).collect();
        let mean = (&xs).mean();
        let sd = (&xs).population_std_dev();
        let median = Data::new(xs.clone()).median();
        prop_assert!((d.mean - mean).abs() <= 1e-12 * mean.abs().max(1.0));
        prop_assert!((d.stddev - sd).abs() <= 1e-9 * sd.max(1.0));
        prop_assert_eq!(d.median, median);
    }
}
