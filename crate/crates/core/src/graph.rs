//! Unified call-graph model and its canonical JSON document form.
//!
//! A document looks like
//!
//! ```json
//! {
//!   "nodes": [{"pos": "lib/a.js:3:1", "entry": false, "final": false, "name": "f"}],
//!   "edges": [{"source": "lib/a.js:3:1", "target": "lib/a.js:9:5",
//!              "found_by": ["static-ast"], "confidence": 1.0}]
//! }
//! ```
//!
//! Node identity is the `file:line:column` position. Serialization is
//! canonical: nodes sorted by position, edges by `(source, target)`, tool
//! lists sorted, two-space indentation and a trailing newline.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::ser::{SerializeMap, SerializeSeq};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;
use thiserror::Error;

/// Position of a function in a repository: `file:line:column`, 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SourcePosition {
    pub file: String,
    pub line: u32,
    pub column: u32,
}

impl SourcePosition {
    pub fn new(file: impl AsRef<str>, line: u32, column: u32) -> Self {
        Self {
            file: normalize_path(file.as_ref()),
            line,
            column,
        }
    }
}

impl fmt::Display for SourcePosition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.file, self.line, self.column)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid position `{text}`: {reason}")]
pub struct PositionError {
    pub text: String,
    pub reason: &'static str,
}

impl FromStr for SourcePosition {
    type Err = PositionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = |reason| PositionError {
            text: s.to_string(),
            reason,
        };
        let mut parts = s.trim().rsplitn(3, ':');
        let column = parts.next().ok_or_else(|| err("missing column"))?;
        let line = parts.next().ok_or_else(|| err("missing line"))?;
        let file = parts.next().ok_or_else(|| err("missing file"))?;
        let line: u32 = line.parse().map_err(|_| err("line is not a number"))?;
        let column: u32 = column.parse().map_err(|_| err("column is not a number"))?;
        if line == 0 || column == 0 {
            return Err(err("line and column are 1-based"));
        }
        let file = normalize_path(file);
        if file.is_empty() {
            return Err(err("empty file path"));
        }
        Ok(SourcePosition { file, line, column })
    }
}

impl Serialize for SourcePosition {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SourcePosition {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// Canonical repository-relative form: forward slashes, no `./` segments,
/// no leading slash, no doubled separators.
pub fn normalize_path(path: &str) -> String {
    let replaced = path.replace('\\', "/");
    replaced
        .split('/')
        .filter(|seg| !seg.is_empty() && *seg != ".")
        .collect::<Vec<_>>()
        .join("/")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionNode {
    pub id: SourcePosition,
    pub entry: bool,
    pub is_final: bool,
    pub name: Option<String>,
}

impl FunctionNode {
    pub fn new(id: SourcePosition) -> Self {
        Self {
            id,
            entry: false,
            is_final: false,
            name: None,
        }
    }

    pub fn named(id: SourcePosition, name: impl Into<String>) -> Self {
        Self {
            name: Some(name.into()),
            ..Self::new(id)
        }
    }
}

pub type EdgeKey = (SourcePosition, SourcePosition);

#[derive(Debug, Clone, PartialEq)]
pub struct CallEdge {
    pub source: SourcePosition,
    pub target: SourcePosition,
    pub found_by: BTreeSet<String>,
    pub confidence: f64,
}

impl CallEdge {
    pub fn new(
        source: SourcePosition,
        target: SourcePosition,
        tool: impl Into<String>,
        confidence: f64,
    ) -> Self {
        Self {
            source,
            target,
            found_by: BTreeSet::from([tool.into()]),
            confidence,
        }
    }

    pub fn key(&self) -> EdgeKey {
        (self.source.clone(), self.target.clone())
    }
}

/// Function nodes plus confidence-weighted call edges.
///
/// The fields are public so that invalid graphs can be represented and
/// reported by [`validate_graph`]; everything produced by this crate's
/// constructors and parsers is valid and canonically ordered.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct HybridCallGraph {
    pub nodes: Vec<FunctionNode>,
    pub edges: Vec<CallEdge>,
    pub tool_ids: BTreeSet<String>,
}

impl HybridCallGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Sorts nodes by position and edges by `(source, target)`.
    pub fn canonicalize(&mut self) {
        self.nodes.sort_by(|a, b| a.id.cmp(&b.id));
        self.edges
            .sort_by(|a, b| (&a.source, &a.target).cmp(&(&b.source, &b.target)));
    }

    pub fn canonical(mut self) -> Self {
        self.canonicalize();
        self
    }

    pub fn node(&self, id: &SourcePosition) -> Option<&FunctionNode> {
        self.nodes.iter().find(|n| &n.id == id)
    }

    pub fn edge(&self, source: &SourcePosition, target: &SourcePosition) -> Option<&CallEdge> {
        self.edges
            .iter()
            .find(|e| &e.source == source && &e.target == target)
    }

    /// Inserts a node unless one with the same id exists. Flags are OR-ed
    /// and a missing name is filled in.
    pub fn upsert_node(&mut self, node: FunctionNode) {
        match self.nodes.iter_mut().find(|n| n.id == node.id) {
            Some(existing) => {
                existing.entry |= node.entry;
                existing.is_final |= node.is_final;
                if existing.name.is_none() {
                    existing.name = node.name;
                }
            }
            None => self.nodes.push(node),
        }
    }
}

/// A single invariant violation, naming the offending entity.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    DuplicateNode(SourcePosition),
    DuplicateEdge(EdgeKey),
    DanglingEndpoint {
        edge: EdgeKey,
        endpoint: SourcePosition,
    },
    ConfidenceOutOfRange {
        edge: EdgeKey,
        confidence: f64,
    },
    EmptyFoundBy(EdgeKey),
    UnknownTool {
        edge: EdgeKey,
        tool: String,
    },
    InvalidPosition(SourcePosition),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateNode(id) => write!(f, "duplicate node {id}"),
            Violation::DuplicateEdge((s, t)) => write!(f, "duplicate edge {s} -> {t}"),
            Violation::DanglingEndpoint {
                edge: (s, t),
                endpoint,
            } => write!(f, "edge {s} -> {t} references missing node {endpoint}"),
            Violation::ConfidenceOutOfRange {
                edge: (s, t),
                confidence,
            } => write!(f, "edge {s} -> {t} has confidence {confidence} outside [0,1]"),
            Violation::EmptyFoundBy((s, t)) => write!(f, "edge {s} -> {t} has empty found_by"),
            Violation::UnknownTool { edge: (s, t), tool } => {
                write!(f, "edge {s} -> {t} found by undeclared tool `{tool}`")
            }
            Violation::InvalidPosition(id) => write!(f, "invalid position {id}"),
        }
    }
}

fn position_ok(pos: &SourcePosition) -> bool {
    pos.line >= 1 && pos.column >= 1 && !pos.file.is_empty() && !pos.file.contains('\\')
}

/// Checks every graph invariant. Returns an empty list iff the graph is valid.
pub fn validate_graph(g: &HybridCallGraph) -> Vec<Violation> {
    let mut violations = Vec::new();
    let mut node_ids = HashSet::new();
    for node in &g.nodes {
        if !position_ok(&node.id) {
            violations.push(Violation::InvalidPosition(node.id.clone()));
        }
        if !node_ids.insert(&node.id) {
            violations.push(Violation::DuplicateNode(node.id.clone()));
        }
    }
    let mut edge_keys = HashSet::new();
    for edge in &g.edges {
        let key = edge.key();
        if !edge_keys.insert((&edge.source, &edge.target)) {
            violations.push(Violation::DuplicateEdge(key.clone()));
        }
        for endpoint in [&edge.source, &edge.target] {
            if !node_ids.contains(endpoint) {
                violations.push(Violation::DanglingEndpoint {
                    edge: key.clone(),
                    endpoint: endpoint.clone(),
                });
            }
        }
        if !(0.0..=1.0).contains(&edge.confidence) {
            violations.push(Violation::ConfidenceOutOfRange {
                edge: key.clone(),
                confidence: edge.confidence,
            });
        }
        if edge.found_by.is_empty() {
            violations.push(Violation::EmptyFoundBy(key.clone()));
        }
        for tool in edge.found_by.difference(&g.tool_ids) {
            violations.push(Violation::UnknownTool {
                edge: key.clone(),
                tool: tool.clone(),
            });
        }
    }
    violations
}

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("malformed graph document at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("malformed graph document at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("invalid graph: {}", join_violations(.0))]
    Validation(Vec<Violation>),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

/// Parse result carrying the non-fatal warnings (unknown fields).
#[derive(Debug, Clone)]
pub struct ParsedGraph {
    pub graph: HybridCallGraph,
    pub warnings: Vec<String>,
}

pub fn parse_graph_document(doc: &[u8]) -> Result<HybridCallGraph, GraphError> {
    let parsed = parse_graph_document_with_warnings(doc)?;
    for w in &parsed.warnings {
        log::warn!("{w}");
    }
    Ok(parsed.graph)
}

pub fn parse_graph_document_with_warnings(doc: &[u8]) -> Result<ParsedGraph, GraphError> {
    let value: Value = serde_json::from_slice(doc).map_err(|e| GraphError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let mut reader = DocReader::default();
    let graph = reader.graph(&value)?;
    let violations = validate_graph(&graph);
    if !violations.is_empty() {
        return Err(GraphError::Validation(violations));
    }
    Ok(ParsedGraph {
        graph: graph.canonical(),
        warnings: reader.warnings,
    })
}

#[derive(Default)]
struct DocReader {
    warnings: Vec<String>,
}

fn schema(path: impl Into<String>, message: impl Into<String>) -> GraphError {
    GraphError::Schema {
        path: path.into(),
        message: message.into(),
    }
}

impl DocReader {
    fn object<'a>(
        &mut self,
        value: &'a Value,
        path: &str,
        known: &[&str],
    ) -> Result<&'a serde_json::Map<String, Value>, GraphError> {
        let map = value
            .as_object()
            .ok_or_else(|| schema(path, "expected an object"))?;
        for key in map.keys() {
            if !known.contains(&key.as_str()) {
                self.warnings
                    .push(format!("ignoring unknown field `{key}` at {path}"));
            }
        }
        Ok(map)
    }

    fn graph(&mut self, value: &Value) -> Result<HybridCallGraph, GraphError> {
        let top = self.object(value, "$", &["nodes", "edges", "tools"])?;
        let mut graph = HybridCallGraph::new();
        let nodes = array(top.get("nodes"), "$.nodes")?;
        for (i, node) in nodes.iter().enumerate() {
            graph.nodes.push(self.node(node, &format!("$.nodes[{i}]"))?);
        }
        let edges = array(top.get("edges"), "$.edges")?;
        for (i, edge) in edges.iter().enumerate() {
            let edge = self.edge(edge, &format!("$.edges[{i}]"))?;
            graph.tool_ids.extend(edge.found_by.iter().cloned());
            graph.edges.push(edge);
        }
        if let Some(tools) = top.get("tools") {
            for (i, tool) in array(Some(tools), "$.tools")?.iter().enumerate() {
                graph
                    .tool_ids
                    .insert(string(Some(tool), &format!("$.tools[{i}]"))?.to_string());
            }
        }
        Ok(graph)
    }

    fn node(&mut self, value: &Value, path: &str) -> Result<FunctionNode, GraphError> {
        let map = self.object(value, path, &["pos", "entry", "final", "name"])?;
        let id = position(map.get("pos"), &format!("{path}.pos"))?;
        let entry = boolean(map.get("entry"), &format!("{path}.entry"))?;
        let is_final = boolean(map.get("final"), &format!("{path}.final"))?;
        let name = match map.get("name") {
            None | Some(Value::Null) => None,
            Some(v) => Some(string(Some(v), &format!("{path}.name"))?.to_string()),
        };
        Ok(FunctionNode {
            id,
            entry,
            is_final,
            name,
        })
    }

    fn edge(&mut self, value: &Value, path: &str) -> Result<CallEdge, GraphError> {
        let map = self.object(
            value,
            path,
            &["source", "target", "found_by", "confidence"],
        )?;
        let source = position(map.get("source"), &format!("{path}.source"))?;
        let target = position(map.get("target"), &format!("{path}.target"))?;
        let tools_path = format!("{path}.found_by");
        let found_by = array(map.get("found_by"), &tools_path)?
            .iter()
            .enumerate()
            .map(|(i, t)| string(Some(t), &format!("{tools_path}[{i}]")).map(str::to_string))
            .collect::<Result<BTreeSet<_>, _>>()?;
        let confidence = map
            .get("confidence")
            .and_then(Value::as_f64)
            .ok_or_else(|| schema(format!("{path}.confidence"), "expected a number"))?;
        Ok(CallEdge {
            source,
            target,
            found_by,
            confidence,
        })
    }
}

fn array<'a>(value: Option<&'a Value>, path: &str) -> Result<&'a Vec<Value>, GraphError> {
    value
        .and_then(Value::as_array)
        .ok_or_else(|| schema(path, "expected an array"))
}

fn string<'a>(value: Option<&'a Value>, path: &str) -> Result<&'a str, GraphError> {
    value
        .and_then(Value::as_str)
        .ok_or_else(|| schema(path, "expected a string"))
}

fn boolean(value: Option<&Value>, path: &str) -> Result<bool, GraphError> {
    match value {
        None => Ok(false),
        Some(v) => v.as_bool().ok_or_else(|| schema(path, "expected a boolean")),
    }
}

fn position(value: Option<&Value>, path: &str) -> Result<SourcePosition, GraphError> {
    string(value, path)?
        .parse()
        .map_err(|e: PositionError| schema(path, e.to_string()))
}

struct NodeRecord<'a>(&'a FunctionNode);

impl Serialize for NodeRecord<'_> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let node = self.0;
        let mut map = serializer.serialize_map(None)?;
        map.serialize_entry("pos", &node.id)?;
        map.serialize_entry("entry", &node.entry)?;
        map.serialize_entry("final", &node.is_final)?;
        if let Some(name) = &node.name {
            map.serialize_entry("name", name)?;
        }
        map.end()
    }
}

struct EdgeRecord<'a>(&'a CallEdge);

impl Serialize for EdgeRecord<'_> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let edge = self.0;
        let mut map = serializer.serialize_map(Some(4))?;
        map.serialize_entry("source", &edge.source)?;
        map.serialize_entry("target", &edge.target)?;
        map.serialize_entry("found_by", &edge.found_by)?;
        map.serialize_entry("confidence", &edge.confidence)?;
        map.end()
    }
}

struct Records<'a, T, R>(&'a [T], fn(&'a T) -> R);

impl<'a, T, R: Serialize> Serialize for Records<'a, T, R> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(self.0.len()))?;
        for item in self.0 {
            seq.serialize_element(&(self.1)(item))?;
        }
        seq.end()
    }
}

/// Writes the canonical document. `tools` is emitted only when the graph
/// declares tools that found no edge, so that such graphs round-trip.
pub fn serialize_graph(g: &HybridCallGraph) -> Vec<u8> {
    let g = g.clone().canonical();
    let used: BTreeSet<&String> = g.edges.iter().flat_map(|e| e.found_by.iter()).collect();
    let extra_tools = g.tool_ids.iter().any(|t| !used.contains(t));

    let mut out = Vec::new();
    {
        let mut ser = serde_json::Serializer::pretty(&mut out);
        let mut map = (&mut ser).serialize_map(None).expect("in-memory write");
        map.serialize_entry("nodes", &Records(&g.nodes, NodeRecord))
            .expect("in-memory write");
        map.serialize_entry("edges", &Records(&g.edges, EdgeRecord))
            .expect("in-memory write");
        if extra_tools {
            map.serialize_entry("tools", &g.tool_ids)
                .expect("in-memory write");
        }
        SerializeMap::end(map).expect("in-memory write");
    }
    out.push(b'\n');
    out
}
