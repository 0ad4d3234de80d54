//! Generator for the synthetic corpus under `fixtures/synthetic`.
//!
//! Functions receive call edges from three tools. The bug label is drawn
//! from the number of edges only the dynamic tracer sees, so it is visible
//! through HNII but not through the static NII.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FILES: usize = 20;
pub const PER_FILE: usize = 20;
const SEED: u64 = 2024;
const STATIC: &str = "static-ast";
const DYNAMIC: &str = "dynamic-trace";
const NAME_MATCH: &str = "name-match";

fn pos(f: usize) -> String {
    format!("src/m{:02}.js:{}:1", f / PER_FILE, 10 * (f % PER_FILE) + 1)
}

fn name(f: usize) -> String {
    format!("f{:02}_{:02}", f / PER_FILE, f % PER_FILE)
}

fn distinct_sources(rng: &mut ChaCha8Rng, n: usize, target: usize, taken: &mut BTreeSet<usize>, k: usize) -> Vec<usize> {
    let mut out = Vec::new();
    while out.len() < k {
        let s = rng.random_range(0..n);
        if s != target && taken.insert(s) {
            out.push(s);
        }
    }
    out
}

/// File name → contents.
pub fn generate() -> BTreeMap<String, String> {
    let n = FILES * PER_FILE;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    // edge → tools that report it
    let mut edges: BTreeMap<(usize, usize), Vec<&str>> = BTreeMap::new();
    let mut buggy = vec![false; n];
    for t in 0..n {
        let mut taken = BTreeSet::new();
        let both = rng.random_range(0..=3);
        let static_only = rng.random_range(0..=2);
        let dynamic_only = rng.random_range(0..=6);
        let name_only = rng.random_range(0..=1);
        for (k, tools) in [
            (both, vec![STATIC, DYNAMIC]),
            (static_only, vec![STATIC]),
            (dynamic_only, vec![DYNAMIC]),
            (name_only, vec![NAME_MATCH]),
        ] {
            for s in distinct_sources(&mut rng, n, t, &mut taken, k) {
                edges.insert((s, t), tools.clone());
            }
        }
        let p = if dynamic_only >= 4 { 0.85 } else { 0.08 };
        buggy[t] = rng.random::<f64>() < p;
    }

    let mut files = BTreeMap::new();
    for tool in [STATIC, DYNAMIC, NAME_MATCH] {
        let mut s = String::new();
        for ((a, b), tools) in &edges {
            if tools.contains(&tool) {
                let _ = writeln!(s, "{} -> {}", pos(*a), pos(*b));
            }
        }
        files.insert(format!("{tool}.pairs"), s);
    }

    let mut nii = vec![0u32; n];
    let mut noi = vec![0u32; n];
    for ((a, b), tools) in &edges {
        if tools.contains(&STATIC) {
            nii[*b] += 1;
            noi[*a] += 1;
        }
    }
    let mut metrics = String::from("Name,Path,Line,Column,LOC,LLOC,NOS,McCC,NL,CD,CLOC,DLOC,NII,NOI\n");
    let mut spans = Vec::new();
    for f in 0..n {
        let loc: u32 = rng.random_range(5..=60);
        let lloc = loc * 4 / 5;
        let nos = (lloc / 2).max(1);
        let mccc: u32 = rng.random_range(1..=10);
        let nl: u32 = rng.random_range(0..=4);
        let cd = f64::from(rng.random_range(0..=40u32)) / 100.0;
        let cloc = (cd * f64::from(loc)).round() as u32;
        let dloc: u32 = rng.random_range(0..=3);
        let p = pos(f);
        let (path, rest) = p.split_once(':').expect("position");
        let (line, col) = rest.split_once(':').expect("position");
        let _ = writeln!(
            metrics,
            "{},{path},{line},{col},{loc},{lloc},{nos},{mccc},{nl},{cd},{cloc},{dloc},{},{}",
            name(f),
            nii[f],
            noi[f]
        );
        spans.push(format!(
            "  {{ \"pos\": \"{p}\", \"end_line\": {} }}",
            10 * (f % PER_FILE) + 8
        ));
    }
    files.insert("metrics.csv".into(), metrics);
    files.insert("spans.json".into(), format!("[\n{}\n]\n", spans.join(",\n")));

    // one fix touching the second line of every buggy function
    let mut patch = String::new();
    for m in 0..FILES {
        let hits: Vec<usize> = (0..PER_FILE).filter(|j| buggy[m * PER_FILE + j]).collect();
        if hits.is_empty() {
            continue;
        }
        let _ = writeln!(patch, "diff --git a/src/m{m:02}.js b/src/m{m:02}.js");
        let _ = writeln!(patch, "--- a/src/m{m:02}.js\n+++ b/src/m{m:02}.js");
        for j in hits {
            let line = 10 * j + 2;
            let _ = writeln!(patch, "@@ -{line},1 +{line},1 @@");
            let _ = writeln!(patch, "-  var r = input;\n+  var r = input || {{}};");
        }
    }
    files.insert("fix.patch".into(), patch);

    // labeled sample: up to 12 edges per cell, validity at a fixed rate per cell
    let rates = [
        (vec![DYNAMIC, STATIC], 1.0),
        (vec![STATIC], 0.75),
        (vec![DYNAMIC], 0.9),
        (vec![NAME_MATCH], 0.1),
    ];
    let mut sample = String::from("source,target,tools,valid\n");
    for (cell, rate) in rates {
        let members: Vec<&(usize, usize)> = edges
            .iter()
            .filter(|(_, tools)| {
                let mut t = (*tools).clone();
                t.sort_unstable();
                t == cell
            })
            .map(|(e, _)| e)
            .collect();
        let take = 12.min(members.len());
        let valid = (rate * take as f64).round() as usize;
        for (i, (a, b)) in members.iter().take(take).enumerate() {
            let _ = writeln!(
                sample,
                "{},{},{},{}",
                pos(*a),
                pos(*b),
                cell.join(";"),
                u8::from(i < valid)
            );
        }
    }
    files.insert("labeled_sample.csv".into(), sample);
    files
}
