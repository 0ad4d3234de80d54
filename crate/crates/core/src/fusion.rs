//! Merging per-tool call graphs and weighting edges by the true-positive
//! rate of the tool combination that found them.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{CallEdge, EdgeKey, FunctionNode, HybridCallGraph, SourcePosition};

/// The exact set of tools that found an edge.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct VennCell(BTreeSet<String>);

impl VennCell {
    pub fn new<I, S>(tools: I) -> Result<Self, FusionError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let set: BTreeSet<String> = tools.into_iter().map(Into::into).collect();
        if set.is_empty() || set.iter().any(String::is_empty) {
            return Err(FusionError::EmptyCell);
        }
        Ok(Self(set))
    }

    pub fn tools(&self) -> &BTreeSet<String> {
        &self.0
    }

    pub fn of_edge(edge: &CallEdge) -> Result<Self, FusionError> {
        Self::new(edge.found_by.iter().cloned())
    }
}

impl TryFrom<Vec<String>> for VennCell {
    type Error = FusionError;
    fn try_from(v: Vec<String>) -> Result<Self, FusionError> {
        Self::new(v)
    }
}

impl From<VennCell> for Vec<String> {
    fn from(c: VennCell) -> Self {
        c.0.into_iter().collect()
    }
}

impl fmt::Display for VennCell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.0.iter().map(String::as_str).collect();
        write!(f, "{{{}}}", names.join(","))
    }
}

impl FromStr for VennCell {
    type Err = FusionError;
    /// Parses the `;`-separated form used in the labeled sample CSV.
    fn from_str(s: &str) -> Result<Self, FusionError> {
        Self::new(s.split(';').map(str::trim).filter(|t| !t.is_empty()))
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum FusionError {
    #[error("tool `{0}` appears more than once in the merge input")]
    DuplicateTool(String),
    #[error("a Venn cell needs at least one tool")]
    EmptyCell,
    #[error("labeled sample is empty")]
    EmptySample,
    #[error("edge {0} -> {1} appears twice in the labeled sample")]
    DuplicateSampleEdge(SourcePosition, SourcePosition),
    #[error("edge {0} -> {1} has no label")]
    Unlabeled(SourcePosition, SourcePosition),
    #[error("quota {quota} for cell {cell} exceeds its population {population}")]
    QuotaExceedsPopulation {
        cell: VennCell,
        quota: usize,
        population: usize,
    },
    #[error("labeled sample line {line}: {message}")]
    SampleCsv { line: u64, message: String },
    #[error("confidence table: {0}")]
    Table(String),
}

/// Union of two graphs: node flags are OR-ed, the smallest display name
/// wins, `found_by` sets are united. Confidence is reset to 0.
pub fn union(a: &HybridCallGraph, b: &HybridCallGraph) -> HybridCallGraph {
    let mut nodes: BTreeMap<SourcePosition, FunctionNode> = BTreeMap::new();
    for n in a.nodes.iter().chain(&b.nodes) {
        nodes
            .entry(n.id.clone())
            .and_modify(|m| {
                m.entry |= n.entry;
                m.is_final |= n.is_final;
                m.name = match (m.name.take(), &n.name) {
                    (Some(x), Some(y)) => Some(x.min(y.clone())),
                    (x, y) => x.or_else(|| y.clone()),
                };
            })
            .or_insert_with(|| n.clone());
    }
    let mut edges: BTreeMap<EdgeKey, BTreeSet<String>> = BTreeMap::new();
    for e in a.edges.iter().chain(&b.edges) {
        edges
            .entry(e.key())
            .or_default()
            .extend(e.found_by.iter().cloned());
    }
    HybridCallGraph {
        nodes: nodes.into_values().collect(),
        edges: edges
            .into_iter()
            .map(|((source, target), found_by)| CallEdge {
                source,
                target,
                found_by,
                confidence: 0.0,
            })
            .collect(),
        tool_ids: a.tool_ids.union(&b.tool_ids).cloned().collect(),
    }
}

/// Merges per-tool graphs. Each graph's edges are attributed to its tool id
/// regardless of the `found_by` sets it carried.
pub fn merge_graphs(graphs: Vec<(String, HybridCallGraph)>) -> Result<HybridCallGraph, FusionError> {
    let mut seen = BTreeSet::new();
    let mut merged = HybridCallGraph::new();
    for (tool, mut g) in graphs {
        if !seen.insert(tool.clone()) {
            return Err(FusionError::DuplicateTool(tool));
        }
        for e in &mut g.edges {
            e.found_by = BTreeSet::from([tool.clone()]);
        }
        g.tool_ids = BTreeSet::from([tool]);
        merged = union(&merged, &g);
    }
    Ok(merged)
}

/// Number of edges per Venn cell.
pub fn cell_populations(g: &HybridCallGraph) -> BTreeMap<VennCell, usize> {
    let mut out = BTreeMap::new();
    for e in &g.edges {
        if let Ok(cell) = VennCell::of_edge(e) {
            *out.entry(cell).or_insert(0) += 1;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledEntry {
    pub source: SourcePosition,
    pub target: SourcePosition,
    pub cell: VennCell,
    /// `None` until a human labels the edge.
    pub valid: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LabeledEdgeSample {
    pub entries: Vec<LabeledEntry>,
}

pub const SAMPLE_CSV_COLUMNS: [&str; 4] = ["source", "target", "tools", "valid"];

impl LabeledEdgeSample {
    pub fn read_csv(bytes: &[u8]) -> Result<Self, FusionError> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(bytes);
        let bad = |line: u64, message: String| FusionError::SampleCsv { line, message };
        let headers = reader.headers().map_err(|e| bad(1, e.to_string()))?.clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| bad(1, format!("missing column {name}")))
        };
        let cols = [col("source")?, col("target")?, col("tools")?, col("valid")?];
        let mut entries = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| bad(0, e.to_string()))?;
            let line = record.position().map_or(0, |p| p.line());
            let get = |i: usize| record.get(cols[i]).unwrap_or_default();
            let pos = |i: usize| {
                get(i)
                    .parse::<SourcePosition>()
                    .map_err(|e| bad(line, e.to_string()))
            };
            let valid = match get(3).to_ascii_lowercase().as_str() {
                "" => None,
                "1" | "true" | "yes" => Some(true),
                "0" | "false" | "no" => Some(false),
                other => return Err(bad(line, format!("bad label `{other}`"))),
            };
            entries.push(LabeledEntry {
                source: pos(0)?,
                target: pos(1)?,
                cell: get(2).parse().map_err(|e: FusionError| bad(line, e.to_string()))?,
                valid,
            });
        }
        Ok(Self { entries })
    }

    pub fn write_csv(&self) -> Vec<u8> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(SAMPLE_CSV_COLUMNS).expect("in-memory write");
        for e in &self.entries {
            let tools: Vec<&str> = e.cell.tools().iter().map(String::as_str).collect();
            let valid = match e.valid {
                None => "",
                Some(true) => "1",
                Some(false) => "0",
            };
            w.write_record([
                e.source.to_string(),
                e.target.to_string(),
                tools.join(";"),
                valid.to_string(),
            ])
            .expect("in-memory write");
        }
        w.into_inner().expect("in-memory write")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Tally {
    pub tp: u64,
    pub total: u64,
}

impl Tally {
    pub fn rate(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.tp as f64 / self.total as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConfidenceTable {
    pub cells: BTreeMap<VennCell, Tally>,
    pub fallback: Tally,
    /// Pseudo-count pulling each cell rate toward the fallback rate; 0 gives
    /// the raw ratio.
    pub prior_weight: f64,
}

#[derive(Serialize, Deserialize)]
struct TableDoc {
    cells: Vec<CellDoc>,
    fallback: Tally,
    #[serde(default, skip_serializing_if = "is_zero")]
    prior_weight: f64,
}

#[derive(Serialize, Deserialize)]
struct CellDoc {
    tools: VennCell,
    tp: u64,
    total: u64,
}

fn is_zero(x: &f64) -> bool {
    *x == 0.0
}

impl ConfidenceTable {
    /// Rate for a cell, or the fallback rate when the cell was not sampled.
    pub fn rate(&self, cell: &VennCell) -> f64 {
        match self.cells.get(cell) {
            Some(t) if t.total > 0 => {
                let w = self.prior_weight;
                (t.tp as f64 + w * self.fallback_rate()) / (t.total as f64 + w)
            }
            _ => self.fallback_rate(),
        }
    }

    pub fn fallback_rate(&self) -> f64 {
        self.fallback.rate()
    }

    pub fn to_json(&self) -> Vec<u8> {
        let doc = TableDoc {
            cells: self
                .cells
                .iter()
                .map(|(c, t)| CellDoc {
                    tools: c.clone(),
                    tp: t.tp,
                    total: t.total,
                })
                .collect(),
            fallback: self.fallback,
            prior_weight: self.prior_weight,
        };
        let mut out = serde_json::to_vec_pretty(&doc).expect("serializable");
        out.push(b'\n');
        out
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, FusionError> {
        let doc: TableDoc =
            serde_json::from_slice(bytes).map_err(|e| FusionError::Table(e.to_string()))?;
        let mut cells = BTreeMap::new();
        for c in doc.cells {
            if c.tp > c.total {
                return Err(FusionError::Table(format!("cell {} has tp > total", c.tools)));
            }
            if cells.insert(c.tools.clone(), Tally { tp: c.tp, total: c.total }).is_some() {
                return Err(FusionError::Table(format!("cell {} listed twice", c.tools)));
            }
        }
        if doc.fallback.tp > doc.fallback.total {
            return Err(FusionError::Table("fallback has tp > total".into()));
        }
        if !(doc.prior_weight >= 0.0 && doc.prior_weight.is_finite()) {
            return Err(FusionError::Table("prior_weight must be a finite non-negative number".into()));
        }
        Ok(Self {
            cells,
            fallback: doc.fallback,
            prior_weight: doc.prior_weight,
        })
    }
}

/// True-positive rate per Venn cell over a fully labeled sample.
pub fn estimate_confidence(sample: &LabeledEdgeSample) -> Result<ConfidenceTable, FusionError> {
    if sample.entries.is_empty() {
        return Err(FusionError::EmptySample);
    }
    let mut seen = BTreeSet::new();
    let mut table = ConfidenceTable::default();
    for e in &sample.entries {
        if !seen.insert((&e.source, &e.target)) {
            return Err(FusionError::DuplicateSampleEdge(e.source.clone(), e.target.clone()));
        }
        let valid = e
            .valid
            .ok_or_else(|| FusionError::Unlabeled(e.source.clone(), e.target.clone()))?;
        let tally = table.cells.entry(e.cell.clone()).or_default();
        tally.total += 1;
        table.fallback.total += 1;
        if valid {
            tally.tp += 1;
            table.fallback.tp += 1;
        }
    }
    Ok(table)
}

/// Sets every edge's confidence from the table.
pub fn assign_confidence(g: &HybridCallGraph, t: &ConfidenceTable) -> HybridCallGraph {
    let mut out = g.clone();
    for e in &mut out.edges {
        e.confidence = match VennCell::of_edge(e) {
            Ok(cell) => t.rate(&cell),
            Err(_) => t.fallback_rate(),
        };
    }
    out
}

/// Draws `quota[cell]` distinct edges from each cell, without labels.
pub fn stratified_sample(
    g: &HybridCallGraph,
    quota: &BTreeMap<VennCell, usize>,
    seed: u64,
) -> Result<LabeledEdgeSample, FusionError> {
    let mut by_cell: BTreeMap<VennCell, Vec<&CallEdge>> = BTreeMap::new();
    let mut sorted: Vec<&CallEdge> = g.edges.iter().collect();
    sorted.sort_by_key(|e| e.key());
    for e in sorted {
        by_cell.entry(VennCell::of_edge(e)?).or_default().push(e);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries = Vec::new();
    for (cell, &want) in quota {
        let population = by_cell.get(cell).map_or(&[][..], Vec::as_slice);
        if want > population.len() {
            return Err(FusionError::QuotaExceedsPopulation {
                cell: cell.clone(),
                quota: want,
                population: population.len(),
            });
        }
        let mut picked = rand::seq::index::sample(&mut rng, population.len(), want).into_vec();
        picked.sort_unstable();
        for i in picked {
            let e = population[i];
            entries.push(LabeledEntry {
                source: e.source.clone(),
                target: e.target.clone(),
                cell: cell.clone(),
                valid: None,
            });
        }
    }
    Ok(LabeledEdgeSample { entries })
}

/// Largest-remainder allocation of `total` over cells in proportion to their
/// populations. Remainder ties go to the larger population, then the
/// smaller cell. Afterwards every non-empty cell is raised to at least
/// `min_per_cell` (capped by its population), so the sum may exceed `total`.
pub fn proportional_quota(
    populations: &BTreeMap<VennCell, usize>,
    total: usize,
    min_per_cell: usize,
) -> BTreeMap<VennCell, usize> {
    let sum: usize = populations.values().sum();
    let mut out: BTreeMap<VennCell, usize> = BTreeMap::new();
    if sum == 0 {
        return out;
    }
    let total = total.min(sum);
    // exact share = total * pop / sum, kept as an integer numerator over `sum`
    let mut remainders: Vec<(usize, usize, &VennCell)> = Vec::new();
    let mut assigned = 0;
    for (cell, &pop) in populations {
        let num = total * pop;
        out.insert(cell.clone(), num / sum);
        assigned += num / sum;
        remainders.push((num % sum, pop, cell));
    }
    remainders.sort_by(|a, b| b.0.cmp(&a.0).then(b.1.cmp(&a.1)).then(a.2.cmp(b.2)));
    for (_, _, cell) in remainders.into_iter().take(total - assigned) {
        *out.get_mut(cell).expect("present") += 1;
    }
    for (cell, &pop) in populations {
        let q = out.get_mut(cell).expect("present");
        *q = (*q).max(min_per_cell.min(pop));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pos(line: u32) -> SourcePosition {
        SourcePosition::new("a.js", line, 1)
    }

    fn tool_graph(tool: &str, edges: &[(u32, u32)]) -> HybridCallGraph {
        let mut g = HybridCallGraph::new();
        for &(s, t) in edges {
            g.upsert_node(FunctionNode::new(pos(s)));
            g.upsert_node(FunctionNode::new(pos(t)));
            g.edges.push(CallEdge::new(pos(s), pos(t), tool, 1.0));
        }
        g.tool_ids.insert(tool.into());
        g.canonical()
    }

    fn cell(tools: &[&str]) -> VennCell {
        VennCell::new(tools.iter().copied()).unwrap()
    }

    #[test]
    fn same_edge_from_two_tools() {
        let m = merge_graphs(vec![
            ("A".into(), tool_graph("A", &[(1, 2)])),
            ("B".into(), tool_graph("B", &[(1, 2)])),
        ])
        .unwrap();
        assert_eq!(m.edges.len(), 1);
        assert_eq!(VennCell::of_edge(&m.edges[0]).unwrap(), cell(&["A", "B"]));
        assert_eq!(m.edges[0].confidence, 0.0);
    }

    #[test]
    fn disjoint_graphs_add_up() {
        let m = merge_graphs(vec![
            ("A".into(), tool_graph("A", &[(1, 2), (2, 3)])),
            ("B".into(), tool_graph("B", &[(3, 4)])),
        ])
        .unwrap();
        assert_eq!(m.edges.len(), 3);
        assert_eq!(m.nodes.len(), 4);
    }

    #[test]
    fn duplicate_tool_is_rejected() {
        let err = merge_graphs(vec![
            ("A".into(), HybridCallGraph::new()),
            ("A".into(), HybridCallGraph::new()),
        ])
        .unwrap_err();
        assert_eq!(err, FusionError::DuplicateTool("A".into()));
    }

    fn labeled(cells: &[(&[&str], bool)]) -> LabeledEdgeSample {
        LabeledEdgeSample {
            entries: cells
                .iter()
                .enumerate()
                .map(|(i, (tools, valid))| LabeledEntry {
                    source: pos(i as u32 + 1),
                    target: pos(1000),
                    cell: cell(tools),
                    valid: Some(*valid),
                })
                .collect(),
        }
    }

    #[test]
    fn five_of_ten_gives_one_half() {
        let mut entries: Vec<(&[&str], bool)> = Vec::new();
        for i in 0..10 {
            entries.push((&["A", "B"], i < 5));
        }
        for _ in 0..3 {
            entries.push((&["A"], true));
        }
        let t = estimate_confidence(&labeled(&entries)).unwrap();
        assert_eq!(t.rate(&cell(&["A", "B"])), 0.5);
        assert_eq!(t.rate(&cell(&["A"])), 1.0);
    }

    #[test]
    fn unseen_cell_uses_global_rate() {
        let t = estimate_confidence(&labeled(&[
            (&["A"], true),
            (&["A"], true),
            (&["A"], false),
            (&["B"], true),
            (&["B"], true),
            (&["A", "B"], false),
        ]))
        .unwrap();
        assert_eq!(t.rate(&cell(&["C"])), 4.0 / 6.0);
    }

    #[test]
    fn estimation_errors() {
        assert_eq!(
            estimate_confidence(&LabeledEdgeSample::default()).unwrap_err(),
            FusionError::EmptySample
        );
        let mut s = labeled(&[(&["A"], true)]);
        s.entries[0].valid = None;
        assert!(matches!(estimate_confidence(&s), Err(FusionError::Unlabeled(..))));
        let mut s = labeled(&[(&["A"], true), (&["A"], true)]);
        s.entries[1].source = s.entries[0].source.clone();
        assert!(matches!(
            estimate_confidence(&s),
            Err(FusionError::DuplicateSampleEdge(..))
        ));
    }

    #[test]
    fn assignment_uses_cell_rate() {
        let m = merge_graphs(vec![
            ("A".into(), tool_graph("A", &[(1, 2), (2, 3)])),
            ("B".into(), tool_graph("B", &[(1, 2), (5, 6)])),
        ])
        .unwrap();
        let mut t = ConfidenceTable::default();
        t.cells.insert(cell(&["A", "B"]), Tally { tp: 5, total: 10 });
        t.cells.insert(cell(&["A"]), Tally { tp: 1, total: 4 });
        t.fallback = Tally { tp: 6, total: 14 };
        let g = assign_confidence(&m, &t);
        let conf = |s, d| g.edge(&pos(s), &pos(d)).unwrap().confidence;
        assert_eq!(conf(1, 2), 0.5);
        assert_eq!(conf(2, 3), 0.25);
        assert_eq!(conf(5, 6), 6.0 / 14.0);
    }

    #[test]
    fn prior_weight_shrinks_toward_fallback() {
        let mut t = ConfidenceTable::default();
        t.cells.insert(cell(&["A"]), Tally { tp: 1, total: 1 });
        t.fallback = Tally { tp: 1, total: 2 };
        t.prior_weight = 1.0;
        assert_eq!(t.rate(&cell(&["A"])), 0.75);
    }

    #[test]
    fn table_json_round_trip() {
        let mut t = ConfidenceTable::default();
        t.cells.insert(cell(&["B", "A"]), Tally { tp: 5, total: 10 });
        t.fallback = Tally { tp: 5, total: 10 };
        let json = String::from_utf8(t.to_json()).unwrap();
        assert!(json.contains("\"tools\": [\n        \"A\",\n        \"B\"\n      ]"));
        assert!(!json.contains("prior_weight"));
        assert_eq!(ConfidenceTable::from_json(json.as_bytes()).unwrap(), t);
    }

    #[test]
    fn sample_csv_round_trip() {
        let s = labeled(&[(&["A", "B"], true), (&["C"], false)]);
        let mut unlabeled = s.clone();
        unlabeled.entries[1].valid = None;
        for sample in [s, unlabeled] {
            let back = LabeledEdgeSample::read_csv(&sample.write_csv()).unwrap();
            assert_eq!(back, sample);
        }
    }

    #[test]
    fn stratified_sampling() {
        let g = tool_graph("A", &[(1, 2), (1, 3), (1, 4), (1, 5), (1, 6)]);
        let quota = BTreeMap::from([(cell(&["A"]), 2)]);
        let s1 = stratified_sample(&g, &quota, 7).unwrap();
        assert_eq!(s1.entries.len(), 2);
        assert_ne!(s1.entries[0].target, s1.entries[1].target);
        assert_eq!(s1, stratified_sample(&g, &quota, 7).unwrap());
        let too_many = BTreeMap::from([(cell(&["A"]), 6)]);
        let err = stratified_sample(&g, &too_many, 7).unwrap_err();
        assert!(err.to_string().contains("{A}"));
    }

    #[test]
    fn largest_remainder_allocation() {
        let pops = BTreeMap::from([(cell(&["A"]), 6), (cell(&["B"]), 3), (cell(&["C"]), 1)]);
        let plain = proportional_quota(&pops, 5, 0);
        assert_eq!(plain.values().copied().collect::<Vec<_>>(), vec![3, 2, 0]);
        let with_min = proportional_quota(&pops, 5, 1);
        assert_eq!(with_min.values().copied().collect::<Vec<_>>(), vec![3, 2, 1]);
    }
}
