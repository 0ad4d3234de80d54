use std::path::{Path, PathBuf};

use callfuse_core::dataset::FeatureSetVariant;
use callfuse_core::ingest::ToolFormat;
use callfuse_core::invocation::{Comparator, DEFAULT_THRESHOLDS};
use callfuse_core::ml::Algorithm;
use serde::Deserialize;

/// One experiment, as a single JSON document. Relative paths are resolved
/// against the directory holding the document.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default = "default_out")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_thresholds")]
    pub thresholds: Vec<f64>,
    #[serde(default)]
    pub comparator: Comparator,
    /// Version whose functions supply the non-buggy records.
    pub reference: VersionInput,
    #[serde(default)]
    pub bugs: Vec<BugInput>,
    pub confidence: ConfidenceSource,
    #[serde(default = "default_variants")]
    pub variants: Vec<FeatureSetVariant>,
    #[serde(default)]
    pub ml: MlSettings,
    #[serde(default)]
    pub report: ReportSettings,
    #[serde(default)]
    pub sample: SampleSettings,
}

/// Analysis inputs of one program version.
#[derive(Debug, Clone, Deserialize)]
pub struct VersionInput {
    pub name: String,
    /// JavaScript sources for the built-in static extractor.
    pub source_dir: Option<PathBuf>,
    /// Function span document; taken from the static extraction if absent.
    pub spans: Option<PathBuf>,
    #[serde(default)]
    pub tools: Vec<ToolInput>,
    pub metrics_csv: PathBuf,
}

#[derive(Debug, Clone, Deserialize)]
pub struct BugInput {
    #[serde(flatten)]
    pub version: VersionInput,
    pub patch: PathBuf,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToolInput {
    pub tool_id: String,
    pub format: ToolFormat,
    pub path: PathBuf,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ConfidenceSource {
    Table(PathBuf),
    LabeledSample(PathBuf),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlSettings {
    pub k: usize,
    pub oversample_factor: f64,
    /// Which threshold's datasets to train on.
    pub threshold: f64,
    /// Restrict the grid to these config ids.
    pub configs: Option<Vec<u32>>,
    pub algorithms: Option<Vec<Algorithm>>,
}

impl Default for MlSettings {
    fn default() -> Self {
        MlSettings {
            k: 10,
            oversample_factor: 1.5,
            threshold: 0.0,
            configs: None,
            algorithms: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportSettings {
    /// Score used for the paired feature-set tests.
    pub score: String,
}

impl Default for ReportSettings {
    fn default() -> Self {
        ReportSettings {
            score: "f_measure".into(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleSettings {
    pub size: usize,
    pub min_per_cell: usize,
}

impl Default for SampleSettings {
    fn default() -> Self {
        SampleSettings {
            size: 100,
            min_per_cell: 1,
        }
    }
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn default_thresholds() -> Vec<f64> {
    DEFAULT_THRESHOLDS.to_vec()
}

fn default_variants() -> Vec<FeatureSetVariant> {
    FeatureSetVariant::ALL.to_vec()
}

fn rebase(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl VersionInput {
    fn rebase(&mut self, base: &Path) {
        for p in [self.source_dir.as_mut(), self.spans.as_mut()].into_iter().flatten() {
            rebase(base, p);
        }
        for t in &mut self.tools {
            rebase(base, &mut t.path);
        }
        rebase(base, &mut self.metrics_csv);
    }
}

impl PipelineConfig {
    pub fn parse(bytes: &[u8], base: &Path) -> anyhow::Result<Self> {
        let mut cfg: PipelineConfig = serde_json::from_slice(bytes)?;
        rebase(base, &mut cfg.output_dir);
        cfg.reference.rebase(base);
        for b in &mut cfg.bugs {
            b.version.rebase(base);
            rebase(base, &mut b.patch);
        }
        match &mut cfg.confidence {
            ConfidenceSource::Table(p) | ConfidenceSource::LabeledSample(p) => rebase(base, p),
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if let Some(t) = self.thresholds.iter().find(|t| !(0.0..=1.0).contains(*t)) {
            anyhow::bail!("threshold {t} is outside [0, 1]");
        }
        let mut names = vec![&self.reference.name];
        names.extend(self.bugs.iter().map(|b| &b.version.name));
        for (i, n) in names.iter().enumerate() {
            if n.is_empty() || n.contains(['/', '\\']) || n.starts_with('.') {
                anyhow::bail!("version name {n:?} is not usable as a directory name");
            }
            if names[..i].contains(n) {
                anyhow::bail!("duplicate version name {n:?}");
            }
        }
        Ok(())
    }

    /// The reference version first, then the bugs in order.
    pub fn versions(&self) -> impl Iterator<Item = &VersionInput> {
        std::iter::once(&self.reference).chain(self.bugs.iter().map(|b| &b.version))
    }
}
