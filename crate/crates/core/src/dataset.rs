//! Labeled function datasets: patch lines mapped onto function spans, buggy
//! records from each bug's pre-fix analysis, non-buggy records from a
//! reference version, and the S / H / S+H feature layouts.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extract::FunctionSpan;
use crate::graph::SourcePosition;
use crate::ingest::{Patch, StaticMetrics, StaticMetricsRow, STATIC_METRIC_NAMES};
use crate::invocation::{threshold_tag, InvocationCounts};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "buggy")]
    Buggy,
    #[serde(rename = "non-buggy")]
    NonBuggy,
}

impl Label {
    /// 1 for buggy, 0 for non-buggy.
    pub fn as_class(self) -> u8 {
        match self {
            Label::Buggy => 1,
            Label::NonBuggy => 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FeatureSetVariant {
    #[serde(rename = "S")]
    S,
    #[serde(rename = "H")]
    H,
    #[serde(rename = "S+H")]
    SH,
}

impl FeatureSetVariant {
    pub const ALL: [FeatureSetVariant; 3] = [Self::S, Self::H, Self::SH];

    /// Lower-case form used in file names.
    pub fn file_suffix(self) -> &'static str {
        match self {
            Self::S => "s",
            Self::H => "h",
            Self::SH => "s+h",
        }
    }

    /// Column order of the feature matrix.
    pub fn columns(self) -> Vec<&'static str> {
        let mut cols: Vec<&'static str> = match self {
            Self::H => STATIC_METRIC_NAMES[..8].to_vec(),
            Self::S | Self::SH => STATIC_METRIC_NAMES.to_vec(),
        };
        if self != Self::S {
            cols.extend(["HNII", "HNOI"]);
        }
        cols
    }
}

impl fmt::Display for FeatureSetVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::S => "S",
            Self::H => "H",
            Self::SH => "S+H",
        })
    }
}

impl FromStr for FeatureSetVariant {
    type Err = DatasetError;
    fn from_str(s: &str) -> Result<Self, DatasetError> {
        match s.to_ascii_lowercase().as_str() {
            "s" => Ok(Self::S),
            "h" => Ok(Self::H),
            "s+h" | "sh" => Ok(Self::SH),
            _ => Err(DatasetError::UnknownVariant(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionRecord {
    pub id: SourcePosition,
    pub name: String,
    pub metrics: StaticMetrics,
    pub hnii: u64,
    pub hnoi: u64,
    pub label: Label,
    /// Which analysis the metrics came from (a bug id or the reference
    /// version name).
    pub provenance: String,
}

impl FunctionRecord {
    pub fn features(&self, v: FeatureSetVariant) -> Vec<f64> {
        let s = self.metrics.values();
        let mut out: Vec<f64> = match v {
            FeatureSetVariant::H => s[..8].to_vec(),
            _ => s.to_vec(),
        };
        if v != FeatureSetVariant::S {
            out.extend([self.hnii as f64, self.hnoi as f64]);
        }
        out
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum DatasetError {
    #[error("unknown feature set `{0}` (expected S, H or S+H)")]
    UnknownVariant(String),
    #[error("no records")]
    Empty,
    #[error("dataset CSV: {0}")]
    Csv(String),
}

/// Functions whose line span intersects a changed range of the patch.
/// Returns the matched ids (restricted to ids present in `rows`) and warnings.
pub fn map_patch_to_functions(
    patch: &Patch,
    spans: &[FunctionSpan],
    rows: &[StaticMetricsRow],
) -> (BTreeSet<SourcePosition>, Vec<String>) {
    let known: HashSet<&SourcePosition> = rows.iter().map(|r| &r.id).collect();
    let mut matched = BTreeSet::new();
    let mut warnings = Vec::new();
    for change in &patch.file_changes {
        let in_file: Vec<&FunctionSpan> = spans.iter().filter(|s| s.pos.file == change.path).collect();
        if in_file.is_empty() {
            warnings.push(format!(
                "{}: {} has no analyzed functions, skipped",
                patch.bug_id, change.path
            ));
            continue;
        }
        for span in in_file {
            if !change
                .ranges
                .iter()
                .any(|r| r.overlaps(span.pos.line, span.end_line))
            {
                continue;
            }
            if known.contains(&span.pos) {
                matched.insert(span.pos.clone());
            } else {
                warnings.push(format!(
                    "{}: function {} has no metrics row, skipped",
                    patch.bug_id, span.pos
                ));
            }
        }
    }
    (matched, warnings)
}

/// Analysis results of one program version.
#[derive(Debug, Clone, Copy)]
pub struct VersionTables<'a> {
    pub provenance: &'a str,
    pub rows: &'a [StaticMetricsRow],
    pub counts: &'a [InvocationCounts],
}

#[derive(Debug, Clone, Copy)]
pub struct BugMatches<'a> {
    pub bug_id: &'a str,
    pub matches: &'a BTreeSet<SourcePosition>,
    /// The bug's own pre-fix analysis.
    pub tables: VersionTables<'a>,
}

fn record(row: &StaticMetricsRow, t: &VersionTables, label: Label, diags: &mut Vec<String>) -> FunctionRecord {
    let (hnii, hnoi) = match t.counts.iter().find(|c| c.pos == row.id) {
        Some(c) => (c.hnii, c.hnoi),
        None => {
            diags.push(format!(
                "{}: no invocation counts for {}, using 0",
                t.provenance, row.id
            ));
            (0, 0)
        }
    };
    FunctionRecord {
        id: row.id.clone(),
        name: row.name.clone(),
        metrics: row.metrics,
        hnii,
        hnoi,
        label,
        provenance: t.provenance.to_string(),
    }
}

/// Buggy records in bug order (first occurrence of a position wins), then
/// every reference function whose (file, name) is not among the buggy ones.
pub fn compose_dataset(bugs: &[BugMatches], reference: VersionTables) -> (Vec<FunctionRecord>, Vec<String>) {
    let mut diags = Vec::new();
    let mut records = Vec::new();
    let mut seen: HashSet<SourcePosition> = HashSet::new();
    let mut buggy_names: HashSet<(String, String)> = HashSet::new();
    for bug in bugs {
        let by_id: HashMap<&SourcePosition, &StaticMetricsRow> =
            bug.tables.rows.iter().map(|r| (&r.id, r)).collect();
        for id in bug.matches {
            let Some(row) = by_id.get(id) else {
                diags.push(format!("{}: matched {id} missing from metrics, dropped", bug.bug_id));
                continue;
            };
            buggy_names.insert((row.id.file.clone(), row.name.clone()));
            if !seen.insert(id.clone()) {
                continue;
            }
            records.push(record(row, &bug.tables, Label::Buggy, &mut diags));
        }
    }
    for row in reference.rows {
        if buggy_names.contains(&(row.id.file.clone(), row.name.clone())) {
            continue;
        }
        records.push(record(row, &reference, Label::NonBuggy, &mut diags));
    }
    (records, diags)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    /// 1 = buggy, 0 = non-buggy.
    pub labels: Vec<u8>,
}

impl FeatureMatrix {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

pub fn build_feature_matrix(
    records: &[FunctionRecord],
    v: FeatureSetVariant,
) -> Result<FeatureMatrix, DatasetError> {
    if records.is_empty() {
        return Err(DatasetError::Empty);
    }
    Ok(FeatureMatrix {
        columns: v.columns().into_iter().map(String::from).collect(),
        rows: records.iter().map(|r| r.features(v)).collect(),
        labels: records.iter().map(|r| r.label.as_class()).collect(),
    })
}

/// `<threshold>_<variant>.csv`, e.g. `0_00_s+h.csv`.
pub fn dataset_file_name(threshold: f64, v: FeatureSetVariant) -> String {
    format!("{}_{}.csv", threshold_tag(threshold), v.file_suffix())
}

pub fn export_dataset(records: &[FunctionRecord], v: FeatureSetVariant) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = v.columns();
    header.push("label");
    w.write_record(&header).expect("in-memory write");
    for r in records {
        let mut fields: Vec<String> = r.features(v).iter().map(f64::to_string).collect();
        fields.push(r.label.as_class().to_string());
        w.write_record(&fields).expect("in-memory write");
    }
    w.into_inner().expect("in-memory write")
}

/// Reads a dataset CSV: any feature columns followed by a final `label`.
pub fn read_dataset_csv(bytes: &[u8]) -> Result<FeatureMatrix, DatasetError> {
    let mut reader = csv::Reader::from_reader(bytes);
    let headers = reader
        .headers()
        .map_err(|e| DatasetError::Csv(e.to_string()))?
        .clone();
    let n = headers.len();
    if n < 2 || &headers[n - 1] != "label" {
        return Err(DatasetError::Csv("last column must be `label`".into()));
    }
    let mut m = FeatureMatrix {
        columns: headers.iter().take(n - 1).map(String::from).collect(),
        rows: Vec::new(),
        labels: Vec::new(),
    };
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| DatasetError::Csv(e.to_string()))?;
        let bad = |what: &str| DatasetError::Csv(format!("row {}: {what}", i + 2));
        if rec.len() != n {
            return Err(bad("wrong number of fields"));
        }
        let row = rec
            .iter()
            .take(n - 1)
            .map(|x| x.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| bad("non-numeric feature"))?;
        let label = match rec[n - 1].trim() {
            "0" => 0,
            "1" => 1,
            _ => return Err(bad("label must be 0 or 1")),
        };
        m.rows.push(row);
        m.labels.push(label);
    }
    Ok(m)
}

pub fn write_spans(spans: &[FunctionSpan]) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(spans).expect("serializable");
    out.push(b'\n');
    out
}

pub fn read_spans(bytes: &[u8]) -> Result<Vec<FunctionSpan>, serde_json::Error> {
    serde_json::from_slice(bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{FileChange, LineRange};

    fn span(line: u32, end: u32) -> FunctionSpan {
        FunctionSpan {
            pos: SourcePosition::new("a.js", line, 1),
            end_line: end,
        }
    }

    fn row(line: u32, name: &str, loc: u64) -> StaticMetricsRow {
        StaticMetricsRow {
            id: SourcePosition::new("a.js", line, 1),
            name: name.into(),
            metrics: StaticMetrics {
                loc,
                nii: 1,
                noi: 2,
                ..Default::default()
            },
        }
    }

    fn patch(ranges: &[(u32, u32)]) -> Patch {
        Patch {
            bug_id: "b1".into(),
            file_changes: vec![FileChange {
                path: "a.js".into(),
                ranges: ranges.iter().map(|&(s, e)| LineRange::new(s, e)).collect(),
            }],
        }
    }

    #[test]
    fn closed_interval_overlap() {
        let spans = [span(10, 20)];
        let rows = [row(10, "f", 11)];
        for (range, hit) in [((15, 15), true), ((25, 25), false), ((20, 22), true), ((1, 9), false)] {
            let (m, _) = map_patch_to_functions(&patch(&[range]), &spans, &rows);
            assert_eq!(m.len() == 1, hit, "{range:?}");
        }
    }

    #[test]
    fn unknown_file_warns() {
        let mut p = patch(&[(1, 1)]);
        p.file_changes[0].path = "other.js".into();
        let (m, w) = map_patch_to_functions(&p, &[span(1, 5)], &[row(1, "f", 5)]);
        assert!(m.is_empty());
        assert_eq!(w.len(), 1);
    }

    #[test]
    fn one_bug_one_of_four() {
        let rows = [row(1, "a", 1), row(10, "b", 2), row(20, "c", 3), row(30, "d", 4)];
        let tables = VersionTables {
            provenance: "v1",
            rows: &rows,
            counts: &[],
        };
        let matches = BTreeSet::from([rows[1].id.clone()]);
        let bug = BugMatches {
            bug_id: "b1",
            matches: &matches,
            tables,
        };
        let (recs, diags) = compose_dataset(&[bug, bug], tables);
        let buggy = recs.iter().filter(|r| r.label == Label::Buggy).count();
        assert_eq!((buggy, recs.len() - buggy), (1, 3));
        assert!(!diags.is_empty(), "missing counts are reported");
    }

    #[test]
    fn feature_columns() {
        assert_eq!(FeatureSetVariant::S.columns().len(), 10);
        let h = FeatureSetVariant::H.columns();
        assert_eq!(h.len(), 10);
        assert!(h.contains(&"HNII") && !h.contains(&"NII") && !h.contains(&"NOI"));
        assert_eq!(FeatureSetVariant::SH.columns().len(), 12);
    }

    #[test]
    fn file_names() {
        assert_eq!(dataset_file_name(0.0, FeatureSetVariant::S), "0_00_s.csv");
        assert_eq!(dataset_file_name(0.0, FeatureSetVariant::H), "0_00_h.csv");
        assert_eq!(dataset_file_name(0.3, FeatureSetVariant::SH), "0_30_s+h.csv");
    }

    #[test]
    fn export_round_trip() {
        let mut r = FunctionRecord {
            id: SourcePosition::new("a.js", 1, 1),
            name: "f".into(),
            metrics: StaticMetrics {
                loc: 3,
                cd: 0.125,
                ..Default::default()
            },
            hnii: 4,
            hnoi: 5,
            label: Label::Buggy,
            provenance: "b1".into(),
        };
        let r2 = FunctionRecord {
            label: Label::NonBuggy,
            ..r.clone()
        };
        r.metrics.cd = 1.0 / 3.0;
        for v in FeatureSetVariant::ALL {
            let recs = [r.clone(), r2.clone()];
            let m = build_feature_matrix(&recs, v).unwrap();
            assert_eq!(read_dataset_csv(&export_dataset(&recs, v)).unwrap(), m);
        }
    }
}
