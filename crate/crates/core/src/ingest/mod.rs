//! Adapters from external tool outputs into the unified model: call-graph
//! tool outputs, function-level static metric tables, and bug-fix patches.

mod metrics;
mod patch;
mod tool;

pub use metrics::{
    load_static_metrics, write_static_metrics, MetricsError, MetricsLoad, RejectedRow, StaticMetrics, StaticMetricsRow,
    METRICS_CSV_COLUMNS, STATIC_METRIC_NAMES,
};
pub use patch::{parse_patch, FileChange, LineRange, Patch, PatchError};
pub use tool::{convert_tool_output, ConvertError, ToolFormat, ToolOutput};
