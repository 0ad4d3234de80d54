//! Hybrid call graphs for JavaScript: static extraction, fusion of several
//! call-graph tools, invocation metrics, bug datasets, model training and
//! evaluation.

pub mod graph;
pub mod ingest;
pub mod dataset;
pub mod eval;
pub mod extract;
pub mod fusion;
pub mod invocation;
pub mod js;
pub mod ml;
