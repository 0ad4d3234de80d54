use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{
    parse_graph_document, CallEdge, FunctionNode, GraphError, HybridCallGraph, PositionError,
    SourcePosition,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ToolFormat {
    /// Already in the unified graph document format.
    Unified,
    /// One `file:line:col -> file:line:col` edge per line.
    Pairlist,
}

impl FromStr for ToolFormat {
    type Err = ConvertError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "unified" => Ok(ToolFormat::Unified),
            "pairlist" => Ok(ToolFormat::Pairlist),
            other => Err(ConvertError::UnknownFormat(other.to_string())),
        }
    }
}

impl fmt::Display for ToolFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ToolFormat::Unified => "unified",
            ToolFormat::Pairlist => "pairlist",
        })
    }
}

#[derive(Debug, Clone)]
pub struct ToolOutput {
    pub tool_id: String,
    pub format: ToolFormat,
    pub payload: Vec<u8>,
}

#[derive(Debug, Error)]
pub enum ConvertError {
    #[error("unknown tool output format `{0}`")]
    UnknownFormat(String),
    #[error("tool id must not be empty")]
    EmptyToolId,
    #[error("pairlist line {line}: {message}")]
    Pairlist { line: usize, message: String },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Converts one tool's output into a graph whose edges are all attributed to
/// that tool, with a placeholder confidence of 1.0.
pub fn convert_tool_output(t: &ToolOutput) -> Result<HybridCallGraph, ConvertError> {
    if t.tool_id.trim().is_empty() {
        return Err(ConvertError::EmptyToolId);
    }
    let mut graph = match t.format {
        ToolFormat::Unified => parse_graph_document(&t.payload)?,
        ToolFormat::Pairlist => parse_pairlist(&t.payload, &t.tool_id)?,
    };
    for edge in &mut graph.edges {
        edge.found_by = BTreeSet::from([t.tool_id.clone()]);
        edge.confidence = 1.0;
    }
    graph.tool_ids = BTreeSet::from([t.tool_id.clone()]);
    Ok(graph)
}

fn parse_pairlist(payload: &[u8], tool_id: &str) -> Result<HybridCallGraph, ConvertError> {
    let text = std::str::from_utf8(payload).map_err(|e| ConvertError::Pairlist {
        line: 0,
        message: format!("not UTF-8: {e}"),
    })?;
    let mut nodes = BTreeSet::new();
    let mut edges = BTreeSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |message: String| ConvertError::Pairlist {
            line: i + 1,
            message,
        };
        let (src, dst) = line
            .split_once("->")
            .ok_or_else(|| bad("expected `<pos> -> <pos>`".into()))?;
        let src: SourcePosition = src
            .trim()
            .parse()
            .map_err(|e: PositionError| bad(e.to_string()))?;
        let dst: SourcePosition = dst
            .trim()
            .parse()
            .map_err(|e: PositionError| bad(e.to_string()))?;
        nodes.insert(src.clone());
        nodes.insert(dst.clone());
        edges.insert((src, dst));
    }
    let mut graph = HybridCallGraph::new();
    graph.nodes = nodes.into_iter().map(FunctionNode::new).collect();
    graph.edges = edges
        .into_iter()
        .map(|(s, t)| CallEdge::new(s, t, tool_id, 1.0))
        .collect();
    graph.tool_ids.insert(tool_id.to_string());
    Ok(graph)
}
