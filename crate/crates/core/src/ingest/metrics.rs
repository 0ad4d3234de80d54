use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::SourcePosition;

/// Metric columns in their canonical order.
pub const STATIC_METRIC_NAMES: [&str; 10] = [
    "LOC", "LLOC", "NOS", "McCC", "NL", "CD", "CLOC", "DLOC", "NII", "NOI",
];

/// Every column the metrics CSV must provide.
pub const METRICS_CSV_COLUMNS: [&str; 14] = [
    "Name", "Path", "Line", "Column", "LOC", "LLOC", "NOS", "McCC", "NL", "CD", "CLOC", "DLOC",
    "NII", "NOI",
];

/// Function-level static metrics as exported by the external analyzer.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StaticMetrics {
    pub loc: u64,
    pub lloc: u64,
    pub nos: u64,
    pub mccc: u64,
    pub nl: u64,
    /// Comment density, a ratio in `[0, 1]`.
    pub cd: f64,
    pub cloc: u64,
    pub dloc: u64,
    pub nii: u64,
    pub noi: u64,
}

impl StaticMetrics {
    /// Values in [`STATIC_METRIC_NAMES`] order.
    pub fn values(&self) -> [f64; 10] {
        [
            self.loc as f64,
            self.lloc as f64,
            self.nos as f64,
            self.mccc as f64,
            self.nl as f64,
            self.cd,
            self.cloc as f64,
            self.dloc as f64,
            self.nii as f64,
            self.noi as f64,
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StaticMetricsRow {
    pub id: SourcePosition,
    pub name: String,
    pub metrics: StaticMetrics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RejectedRow {
    /// 1-based line of the record in the CSV (the header is line 1).
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct MetricsLoad {
    pub rows: Vec<StaticMetricsRow>,
    pub rejected: Vec<RejectedRow>,
}

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("missing column {0}")]
    MissingColumn(&'static str),
    #[error("unreadable metrics CSV: {0}")]
    Csv(#[from] csv::Error),
}

/// Reads a function-level metrics CSV. Structural problems (missing
/// columns, unreadable CSV) are hard errors; bad cells reject only their row.
pub fn load_static_metrics(csv_bytes: &[u8]) -> Result<MetricsLoad, MetricsError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(csv_bytes);
    let headers = reader.headers()?.clone();
    let index: HashMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h, i)).collect();
    let mut cols = [0usize; 14];
    for (slot, name) in cols.iter_mut().zip(METRICS_CSV_COLUMNS) {
        *slot = *index.get(name).ok_or(MetricsError::MissingColumn(name))?;
    }

    let mut load = MetricsLoad::default();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        match parse_row(&record, &cols) {
            Ok(row) => load.rows.push(row),
            Err(reason) => {
                log::warn!("metrics CSV line {line}: {reason}");
                load.rejected.push(RejectedRow { line, reason });
            }
        }
    }
    Ok(load)
}

fn parse_row(record: &csv::StringRecord, cols: &[usize; 14]) -> Result<StaticMetricsRow, String> {
    let cell = |i: usize| -> Result<&str, String> {
        match record.get(cols[i]) {
            Some(v) if !v.is_empty() => Ok(v),
            _ => Err(format!("missing value for {}", METRICS_CSV_COLUMNS[i])),
        }
    };
    let count = |i: usize| -> Result<u64, String> {
        let text = cell(i)?;
        let value: f64 = text
            .parse()
            .map_err(|_| format!("{} is not a number: `{text}`", METRICS_CSV_COLUMNS[i]))?;
        if value < 0.0 || value.fract() != 0.0 || !value.is_finite() {
            return Err(format!(
                "{} must be a non-negative integer, got `{text}`",
                METRICS_CSV_COLUMNS[i]
            ));
        }
        Ok(value as u64)
    };

    let name = record.get(cols[0]).unwrap_or_default().to_string();
    let path = cell(1)?;
    let line = count(2)?;
    let column = count(3)?;
    if line == 0 || column == 0 {
        return Err("Line and Column are 1-based".into());
    }
    let id = SourcePosition::new(path, line as u32, column as u32);

    let cd_text = cell(9)?;
    let cd: f64 = cd_text
        .parse()
        .map_err(|_| format!("CD is not a number: `{cd_text}`"))?;
    if !(0.0..=1.0).contains(&cd) {
        return Err(format!("CD must lie in [0,1], got {cd_text}"));
    }
    let metrics = StaticMetrics {
        loc: count(4)?,
        lloc: count(5)?,
        nos: count(6)?,
        mccc: count(7)?,
        nl: count(8)?,
        cd,
        cloc: count(10)?,
        dloc: count(11)?,
        nii: count(12)?,
        noi: count(13)?,
    };
    Ok(StaticMetricsRow { id, name, metrics })
}

/// Writes rows back out with exactly the required columns.
pub fn write_static_metrics(rows: &[StaticMetricsRow]) -> Vec<u8> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(METRICS_CSV_COLUMNS)
        .expect("in-memory write");
    for row in rows {
        let m = &row.metrics;
        let mut record = vec![
            row.name.clone(),
            row.id.file.clone(),
            row.id.line.to_string(),
            row.id.column.to_string(),
        ];
        record.extend(
            [m.loc, m.lloc, m.nos, m.mccc, m.nl]
                .iter()
                .map(u64::to_string),
        );
        record.push(m.cd.to_string());
        record.extend([m.cloc, m.dloc, m.nii, m.noi].iter().map(u64::to_string));
        writer.write_record(&record).expect("in-memory write");
    }
    writer.into_inner().expect("in-memory write")
}
