use std::collections::{BTreeMap, BTreeSet};

use callfuse_core::extract::{extract_call_graph, StaticExtraction, UnresolvedReason};
use callfuse_core::js::parse_js_subset;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A generated snapshot with no shadowing: every function name is unique,
/// so the expected callee of each identifier call follows from scoping
/// alone. Property functions are named `impl_<prop>_<k>` and assigned in an
/// object literal at the top of file 0.
struct Program {
    files: Vec<(String, String)>,
    expected: BTreeSet<(String, String)>,
    sites: usize,
    unknown: usize,
    /// property calls with no function assigned to that property
    untargeted: usize,
}

fn program(seed: u64, props: usize) -> Program {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nfiles = rng.random_range(1..=3);
    // tops[f] = [(top name, nested names)]
    let tops: Vec<Vec<(String, Vec<String>)>> = (0..nfiles)
        .map(|f| {
            (0..rng.random_range(1..=4))
                .map(|i| {
                    let nested = (0..rng.random_range(0..=2)).map(|j| format!("n{f}_{i}_{j}")).collect();
                    (format!("t{f}_{i}"), nested)
                })
                .collect()
        })
        .collect();
    let prop_impls: BTreeMap<String, Vec<String>> = (0..2)
        .map(|p| {
            let name = format!("p{p}");
            let impls = (0..props).map(|k| format!("impl_{name}_{k}")).collect();
            (name, impls)
        })
        .collect();

    let mut expected = BTreeSet::new();
    let (mut sites, mut unknown, mut untargeted) = (0, 0, 0);
    let mut files = Vec::new();
    for f in 0..nfiles {
        let mut src = String::new();
        if f == 0 {
            src.push_str("var obj = {\n");
            for (p, impls) in &prop_impls {
                for i in impls {
                    src.push_str(&format!("  {p}: function {i}() {{}},\n"));
                }
            }
            src.push_str("  tail: 0\n};\n");
        }
        for (i, (top, nested)) in tops[f].iter().enumerate() {
            // names visible from inside `top` (and its nested functions)
            let mut visible: Vec<String> = nested.clone();
            visible.extend(tops[f].iter().map(|t| t.0.clone()));
            visible.extend(tops.iter().enumerate().filter(|(g, _)| *g != f).flat_map(|(_, ts)| ts.iter().map(|t| t.0.clone())));
            let hidden: Vec<String> = tops[f].iter().enumerate().filter(|(j, _)| *j != i).flat_map(|(_, t)| t.1.clone()).collect();

            let mut calls = |caller: &str, indent: &str, src: &mut String, rng: &mut ChaCha8Rng| {
                for _ in 0..rng.random_range(0..=4) {
                    sites += 1;
                    match rng.random_range(0..4) {
                        0 | 1 => {
                            let callee = &visible[rng.random_range(0..visible.len())];
                            expected.insert((caller.to_string(), callee.clone()));
                            src.push_str(&format!("{indent}{callee}();\n"));
                        }
                        2 => {
                            let p = format!("p{}", rng.random_range(0..2));
                            for i in &prop_impls[&p] {
                                expected.insert((caller.to_string(), i.clone()));
                            }
                            if prop_impls[&p].is_empty() {
                                untargeted += 1;
                            }
                            src.push_str(&format!("{indent}obj.{p}();\n"));
                        }
                        _ => {
                            unknown += 1;
                            let name = if !hidden.is_empty() && rng.random_bool(0.5) {
                                hidden[rng.random_range(0..hidden.len())].clone()
                            } else {
                                format!("missing{}", rng.random_range(0..3))
                            };
                            src.push_str(&format!("{indent}{name}();\n"));
                        }
                    }
                }
            };
            src.push_str(&format!("function {top}() {{\n"));
            for n in nested {
                src.push_str(&format!("  function {n}() {{\n"));
                calls(n, "    ", &mut src, &mut rng);
                src.push_str("  }\n");
            }
            calls(top, "  ", &mut src, &mut rng);
            src.push_str("}\n");
        }
        files.push((format!("m{f}.js"), src));
    }
    Program { files, expected, sites, unknown, untargeted }
}

fn extract(p: &Program) -> StaticExtraction {
    let asts: Vec<_> = p.files.iter().map(|(n, s)| parse_js_subset(s.as_bytes(), n).unwrap()).collect();
    extract_call_graph(&asts)
}

fn named_edges(x: &StaticExtraction) -> BTreeSet<(String, String)> {
    let name = |p| x.graph.node(p).and_then(|n| n.name.clone()).unwrap_or_default();
    x.graph.edges.iter().map(|e| (name(&e.source), name(&e.target))).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn identifier_calls_follow_lexical_scoping(seed in any::<u64>(), props in 0usize..3) {
        let p = program(seed, props);
        let x = extract(&p);
        prop_assert_eq!(named_edges(&x), p.expected);
        prop_assert!(x.graph.edges.iter().all(|e| e.confidence == 1.0));
    }

    #[test]
    fn every_call_site_is_accounted_once(seed in any::<u64>(), props in 0usize..3) {
        let p = program(seed, props);
        let x = extract(&p);
        prop_assert_eq!(x.resolved.len() + x.unresolved.len(), p.sites);
        let by_reason = |r| x.unresolved.iter().filter(|u| u.reason == r).count();
        prop_assert_eq!(by_reason(UnresolvedReason::UnknownName), p.unknown);
        prop_assert_eq!(by_reason(UnresolvedReason::DynamicDispatch), p.untargeted);
        prop_assert_eq!(x.unresolved.len(), p.unknown + p.untargeted);
        let sites: BTreeSet<_> = x.resolved.iter().map(|r| &r.site).chain(x.unresolved.iter().map(|u| &u.site)).collect();
        prop_assert_eq!(sites.len(), p.sites);
    }

    #[test]
    fn more_property_assignments_only_add_edges(seed in any::<u64>()) {
        let fewer = named_edges(&extract(&program(seed, 1)));
        let more = named_edges(&extract(&program(seed, 2)));
        prop_assert!(fewer.is_subset(&more));
    }
}
