//! One function per pipeline stage. Every stage reads its inputs from the
//! config and from earlier stages' artifacts under the output directory, so
//! running the stages one by one gives the same files as `all`.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::ErrorKind;
use std::path::{Path, PathBuf};

use anyhow::Context as _;
use callfuse_core::dataset::{
    compose_dataset, dataset_file_name, export_dataset, map_patch_to_functions, read_dataset_csv,
    read_spans, write_spans, BugMatches, FeatureSetVariant, VersionTables,
};
use callfuse_core::eval::{aggregate_folds, compare_feature_sets, emit_report, FoldResult};
use callfuse_core::extract::{extract_directory, unresolved_summary, STATIC_TOOL_ID};
use callfuse_core::fusion::{
    assign_confidence, cell_populations, estimate_confidence, merge_graphs, proportional_quota,
    stratified_sample, ConfidenceTable, LabeledEdgeSample,
};
use callfuse_core::graph::{parse_graph_document, serialize_graph, HybridCallGraph};
use callfuse_core::ingest::{
    convert_tool_output, load_static_metrics, parse_patch, write_static_metrics, Patch, StaticMetricsRow,
    ToolOutput,
};
use callfuse_core::invocation::{
    descriptive_stats, read_metric_document, threshold_sweep, threshold_tag, write_metric_document,
    InvocationCounts,
};
use callfuse_core::ml::{enumerate_configs, run_grid, CvOptions};

use crate::config::{ConfidenceSource, PipelineConfig, VersionInput};

#[derive(Debug)]
pub enum Failure {
    /// A required input file or earlier artifact does not exist.
    Missing(PathBuf),
    Stage { stage: &'static str, error: anyhow::Error },
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Missing(_) => 2,
            Failure::Stage { .. } => 1,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Missing(p) => write!(f, "missing input: {}", p.display()),
            Failure::Stage { stage, error } => write!(f, "stage {stage} failed: {error:#}"),
        }
    }
}

type StageResult<T = ()> = Result<T, Failure>;

trait InStage<T> {
    fn stage(self, stage: &'static str) -> StageResult<T>;
}

impl<T, E: Into<anyhow::Error>> InStage<T> for Result<T, E> {
    fn stage(self, stage: &'static str) -> StageResult<T> {
        self.map_err(|e| Failure::Stage {
            stage,
            error: e.into(),
        })
    }
}

pub const STAGES: [&str; 7] = ["extract-static", "ingest", "fuse", "metrics", "dataset", "train", "report"];

pub struct Pipeline {
    pub cfg: PipelineConfig,
}

fn read(path: &Path, stage: &'static str) -> StageResult<Vec<u8>> {
    std::fs::read(path).map_err(|e| match e.kind() {
        ErrorKind::NotFound => Failure::Missing(path.to_path_buf()),
        _ => Failure::Stage {
            stage,
            error: anyhow::Error::new(e).context(path.display().to_string()),
        },
    })
}

fn write(path: &Path, bytes: &[u8], stage: &'static str) -> StageResult {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)
            .with_context(|| dir.display().to_string())
            .stage(stage)?;
    }
    std::fs::write(path, bytes)
        .with_context(|| path.display().to_string())
        .stage(stage)?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn json<T: serde::Serialize + ?Sized>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("serializable");
    out.push(b'\n');
    out
}

impl Pipeline {
    fn out(&self, rel: impl AsRef<Path>) -> PathBuf {
        self.cfg.output_dir.join(rel)
    }

    fn version_dir(&self, v: &VersionInput) -> PathBuf {
        self.out("graphs").join(&v.name)
    }

    pub fn run(&self, stage: &str) -> StageResult {
        match stage {
            "extract-static" => self.extract_static(),
            "ingest" => self.ingest(),
            "fuse" => self.fuse(),
            "metrics" => self.metrics(),
            "dataset" => self.dataset(),
            "train" => self.train(),
            "report" => self.report(),
            "sample" => self.sample(),
            "all" => STAGES.iter().try_for_each(|s| self.run(s)),
            other => unreachable!("unknown stage {other}"),
        }
    }

    pub fn extract_static(&self) -> StageResult {
        const S: &str = "extract-static";
        for v in self.cfg.versions() {
            let Some(dir) = &v.source_dir else { continue };
            if !dir.is_dir() {
                return Err(Failure::Missing(dir.clone()));
            }
            let (ex, diags) = extract_directory(dir).stage(S)?;
            let base = self.version_dir(v);
            write(&base.join(format!("{STATIC_TOOL_ID}.json")), &serialize_graph(&ex.graph), S)?;
            write(&base.join("spans.json"), &write_spans(&ex.spans), S)?;
            let summary = unresolved_summary(&ex.unresolved);
            write(
                &base.join("unresolved.json"),
                &json(&serde_json::json!({ "summary": summary, "calls": ex.unresolved })),
                S,
            )?;
            let notes: String = diags.iter().fold(String::new(), |mut s, (file, d)| {
                let _ = writeln!(s, "{file}:{d}");
                s
            });
            write(&base.join("parse_diagnostics.txt"), notes.as_bytes(), S)?;
        }
        Ok(())
    }

    pub fn ingest(&self) -> StageResult {
        const S: &str = "ingest";
        for v in self.cfg.versions() {
            let base = self.version_dir(v);
            for t in &v.tools {
                let payload = read(&t.path, S)?;
                let g = convert_tool_output(&ToolOutput {
                    tool_id: t.tool_id.clone(),
                    format: t.format,
                    payload,
                })
                .with_context(|| format!("{} ({})", t.path.display(), t.tool_id))
                .stage(S)?;
                write(&base.join("tools").join(format!("{}.json", t.tool_id)), &serialize_graph(&g), S)?;
            }
            let load = load_static_metrics(&read(&v.metrics_csv, S)?)
                .with_context(|| v.metrics_csv.display().to_string())
                .stage(S)?;
            for r in &load.rejected {
                log::warn!("{}: line {} rejected: {}", v.metrics_csv.display(), r.line, r.reason);
            }
            write(&self.out("metrics").join(&v.name).join("static.csv"), &write_static_metrics(&load.rows), S)?;
            if let Some(spans) = &v.spans {
                let bytes = read(spans, S)?;
                read_spans(&bytes)
                    .with_context(|| spans.display().to_string())
                    .stage(S)?;
                write(&base.join("spans.json"), &bytes, S)?;
            }
        }
        for b in &self.cfg.bugs {
            let patch = parse_patch(&read(&b.patch, S)?, &b.version.name)
                .with_context(|| b.patch.display().to_string())
                .stage(S)?;
            write(&self.out("patches").join(format!("{}.json", b.version.name)), &json(&patch), S)?;
        }
        Ok(())
    }

    fn tool_graphs(&self, v: &VersionInput, stage: &'static str) -> StageResult<Vec<(String, HybridCallGraph)>> {
        let base = self.version_dir(v);
        let mut ids: Vec<String> = v.tools.iter().map(|t| t.tool_id.clone()).collect();
        if v.source_dir.is_some() {
            ids.insert(0, STATIC_TOOL_ID.to_string());
        }
        ids.into_iter()
            .map(|id| {
                let path = if id == STATIC_TOOL_ID && v.source_dir.is_some() {
                    base.join(format!("{id}.json"))
                } else {
                    base.join("tools").join(format!("{id}.json"))
                };
                let g = parse_graph_document(&read(&path, stage)?)
                    .with_context(|| path.display().to_string())
                    .stage(stage)?;
                Ok((id, g))
            })
            .collect()
    }

    fn confidence_table(&self) -> StageResult<ConfidenceTable> {
        const S: &str = "fuse";
        match &self.cfg.confidence {
            ConfidenceSource::Table(p) => ConfidenceTable::from_json(&read(p, S)?)
                .with_context(|| p.display().to_string())
                .stage(S),
            ConfidenceSource::LabeledSample(p) => {
                let sample = LabeledEdgeSample::read_csv(&read(p, S)?)
                    .with_context(|| p.display().to_string())
                    .stage(S)?;
                estimate_confidence(&sample).stage(S)
            }
        }
    }

    pub fn fuse(&self) -> StageResult {
        const S: &str = "fuse";
        let table = self.confidence_table()?;
        write(&self.out("confidence.json"), &table.to_json(), S)?;
        for v in self.cfg.versions() {
            let merged = merge_graphs(self.tool_graphs(v, S)?)
                .with_context(|| v.name.clone())
                .stage(S)?;
            let hybrid = assign_confidence(&merged, &table);
            let base = self.version_dir(v);
            write(&base.join("hybrid.json"), &serialize_graph(&hybrid), S)?;
            let mut cells = String::from("cell,population\n");
            for (cell, n) in cell_populations(&hybrid) {
                let _ = writeln!(cells, "\"{cell}\",{n}");
            }
            write(&base.join("cells.csv"), cells.as_bytes(), S)?;
        }
        Ok(())
    }

    /// Labeling sheet for the reference version: a stratified edge sample
    /// with an empty `valid` column.
    pub fn sample(&self) -> StageResult {
        const S: &str = "sample";
        let v = &self.cfg.reference;
        let merged = merge_graphs(self.tool_graphs(v, S)?).stage(S)?;
        let quota = proportional_quota(
            &cell_populations(&merged),
            self.cfg.sample.size,
            self.cfg.sample.min_per_cell,
        );
        let sheet = stratified_sample(&merged, &quota, self.cfg.seed).stage(S)?;
        write(&self.out("labeling_sheet.csv"), &sheet.write_csv(), S)
    }

    fn metric_path(&self, v: &VersionInput, threshold: f64) -> PathBuf {
        self.out("metrics").join(&v.name).join(format!("{}.json", threshold_tag(threshold)))
    }

    pub fn metrics(&self) -> StageResult {
        const S: &str = "metrics";
        let mut table = String::from(
            "threshold,functions,hnii_mean,hnii_median,hnii_stddev,hnoi_mean,hnoi_median,hnoi_stddev\n",
        );
        for v in self.cfg.versions() {
            let path = self.version_dir(v).join("hybrid.json");
            let g = parse_graph_document(&read(&path, S)?)
                .with_context(|| path.display().to_string())
                .stage(S)?;
            let sweep = threshold_sweep(&g, &self.cfg.thresholds, self.cfg.comparator).stage(S)?;
            for (t, counts) in &sweep {
                write(&self.metric_path(v, *t), &write_metric_document(counts), S)?;
                if v.name != self.cfg.reference.name || counts.is_empty() {
                    continue;
                }
                let hnii: Vec<u64> = counts.iter().map(|c| c.hnii).collect();
                let hnoi: Vec<u64> = counts.iter().map(|c| c.hnoi).collect();
                let (a, b) = (descriptive_stats(&hnii).stage(S)?, descriptive_stats(&hnoi).stage(S)?);
                let _ = writeln!(
                    table,
                    "{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
                    threshold_tag(*t),
                    counts.len(),
                    a.mean,
                    a.median,
                    a.stddev,
                    b.mean,
                    b.median,
                    b.stddev
                );
            }
        }
        write(&self.out("metrics").join("descriptive.csv"), table.as_bytes(), S)
    }

    fn metric_rows(&self, v: &VersionInput, stage: &'static str) -> StageResult<Vec<StaticMetricsRow>> {
        let path = self.out("metrics").join(&v.name).join("static.csv");
        Ok(load_static_metrics(&read(&path, stage)?)
            .with_context(|| path.display().to_string())
            .stage(stage)?
            .rows)
    }

    pub fn dataset(&self) -> StageResult {
        const S: &str = "dataset";
        let reference_rows = self.metric_rows(&self.cfg.reference, S)?;
        let mut bugs = Vec::new();
        for b in &self.cfg.bugs {
            let v = &b.version;
            let rows = self.metric_rows(v, S)?;
            let patch_path = self.out("patches").join(format!("{}.json", v.name));
            let patch: Patch = serde_json::from_slice(&read(&patch_path, S)?).stage(S)?;
            let spans_path = self.version_dir(v).join("spans.json");
            let spans = read_spans(&read(&spans_path, S)?)
                .with_context(|| spans_path.display().to_string())
                .stage(S)?;
            let (matches, warnings) = map_patch_to_functions(&patch, &spans, &rows);
            for w in warnings {
                log::warn!("{w}");
            }
            bugs.push((v, rows, matches));
        }
        let mut labels = String::new();
        for &t in &self.cfg.thresholds {
            let counts = |v: &VersionInput| -> StageResult<Vec<InvocationCounts>> {
                let p = self.metric_path(v, t);
                read_metric_document(&read(&p, S)?)
                    .with_context(|| p.display().to_string())
                    .stage(S)
            };
            let reference_counts = counts(&self.cfg.reference)?;
            let bug_counts = bugs
                .iter()
                .map(|(v, _, _)| counts(v))
                .collect::<StageResult<Vec<_>>>()?;
            let matches: Vec<BugMatches> = bugs
                .iter()
                .zip(&bug_counts)
                .map(|((v, rows, m), c)| BugMatches {
                    bug_id: &v.name,
                    matches: m,
                    tables: VersionTables {
                        provenance: &v.name,
                        rows,
                        counts: c,
                    },
                })
                .collect();
            let reference = VersionTables {
                provenance: &self.cfg.reference.name,
                rows: &reference_rows,
                counts: &reference_counts,
            };
            let (records, diags) = compose_dataset(&matches, reference);
            for d in diags {
                log::warn!("{d}");
            }
            if records.is_empty() {
                return Err(Failure::Stage {
                    stage: S,
                    error: anyhow::anyhow!("no function records"),
                });
            }
            for v in FeatureSetVariant::ALL {
                write(&self.out("datasets").join(dataset_file_name(t, v)), &export_dataset(&records, v), S)?;
            }
            if labels.is_empty() {
                labels.push_str("id,name,label,provenance\n");
                for r in &records {
                    let _ = writeln!(
                        labels,
                        "{},{},{},{}",
                        r.id,
                        r.name,
                        r.label.as_class(),
                        r.provenance
                    );
                }
            }
        }
        write(&self.out("datasets").join("labels.csv"), labels.as_bytes(), S)
    }

    pub fn train(&self) -> StageResult {
        const S: &str = "train";
        let ml = &self.cfg.ml;
        let variants: BTreeSet<FeatureSetVariant> = self.cfg.variants.iter().copied().collect();
        let mut datasets = Vec::new();
        for v in variants {
            let p = self.out("datasets").join(dataset_file_name(ml.threshold, v));
            let m = read_dataset_csv(&read(&p, S)?)
                .with_context(|| p.display().to_string())
                .stage(S)?;
            datasets.push((v, m));
        }
        let configs: Vec<_> = enumerate_configs()
            .into_iter()
            .filter(|c| ml.configs.as_ref().is_none_or(|ids| ids.contains(&c.config_id)))
            .filter(|c| ml.algorithms.as_ref().is_none_or(|a| a.contains(&c.algorithm)))
            .collect();
        let opts = CvOptions {
            k: ml.k,
            seed: self.cfg.seed,
            oversample_factor: ml.oversample_factor,
        };
        log::info!(
            "training {} configs x {} feature sets x {} folds",
            configs.len(),
            datasets.len(),
            opts.k
        );
        let folds = run_grid(&configs, &datasets, &opts).stage(S)?;
        write(&self.out("results").join("folds.json"), &json(&folds), S)
    }

    pub fn report(&self) -> StageResult {
        const S: &str = "report";
        let p = self.out("results").join("folds.json");
        let folds: Vec<FoldResult> = serde_json::from_slice(&read(&p, S)?)
            .with_context(|| p.display().to_string())
            .stage(S)?;
        let results = aggregate_folds(&folds).stage(S)?;
        let present: BTreeSet<FeatureSetVariant> = results.iter().map(|r| r.variant).collect();
        let tests = if present.len() == FeatureSetVariant::ALL.len() {
            compare_feature_sets(&results, &self.cfg.report.score).stage(S)?
        } else {
            log::warn!("paired tests need all three feature sets; skipped");
            Vec::new()
        };
        write(&self.out("results").join("models.json"), &json(&results), S)?;
        for (name, bytes) in emit_report(&results, &tests) {
            write(&self.out("report").join(name), &bytes, S)?;
        }
        Ok(())
    }
}
