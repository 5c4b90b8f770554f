//! Declarative run configuration, loaded from TOML and overridden by flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crowdbench_core::estimators::EstimatorConfig;
use crowdbench_core::kernels::KernelKind;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub inputs: Inputs,
    #[serde(default)]
    pub kernel: KernelSection,
    #[serde(default)]
    pub estimator: EstimatorSection,
    #[serde(default)]
    pub rarefaction: RarefactionSection,
    #[serde(default)]
    pub adoption: AdoptionSection,
    #[serde(default)]
    pub compare: CompareSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Inputs {
    /// Corpus holding the human baseline.
    pub human: Option<PathBuf>,
    /// Model-only corpora; every non-human source in them is estimated.
    #[serde(default)]
    pub models: Vec<PathBuf>,
    pub embeddings: Option<PathBuf>,
    /// Remote encoder used when no embedding file is given.
    pub endpoint: Option<String>,
    #[serde(default = "default_batch")]
    pub endpoint_batch: usize,
    #[serde(default = "default_timeout")]
    pub endpoint_timeout_secs: u64,
    /// Replaces the bundled stopword list.
    pub stopwords: Option<PathBuf>,
}

fn default_batch() -> usize {
    64
}

fn default_timeout() -> u64 {
    60
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSection {
    #[serde(default = "default_kinds")]
    pub kinds: Vec<KernelKind>,
}

fn default_kinds() -> Vec<KernelKind> {
    vec![KernelKind::Semantic]
}

impl Default for KernelSection {
    fn default() -> Self {
        KernelSection {
            kinds: default_kinds(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorSection {
    pub replicates: usize,
    pub ci_level: f64,
    pub seed: u64,
    pub kappa_h_ceiling: f64,
    pub max_flagged_fraction: f64,
    /// Worker threads; 0 uses one per core.
    pub workers: usize,
}

impl Default for EstimatorSection {
    fn default() -> Self {
        let d = EstimatorConfig::default();
        EstimatorSection {
            replicates: d.replicates,
            ci_level: d.ci_level,
            seed: d.seed,
            kappa_h_ceiling: d.kappa_h_ceiling,
            max_flagged_fraction: d.max_flagged_fraction,
            workers: 0,
        }
    }
}

impl EstimatorSection {
    pub fn to_config(&self) -> EstimatorConfig {
        EstimatorConfig {
            replicates: self.replicates,
            ci_level: self.ci_level,
            seed: self.seed,
            kappa_h_ceiling: self.kappa_h_ceiling,
            max_flagged_fraction: self.max_flagged_fraction,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RarefactionSection {
    /// Subsample sizes; empty means `{5, 10, ...}` up to `min(50, available)` per source.
    pub grid: Vec<usize>,
    pub repeats: usize,
    pub band_level: f64,
    /// The drift pair is `(largest n ≤ max − span, max)`.
    pub drift_span: usize,
}

impl Default for RarefactionSection {
    fn default() -> Self {
        RarefactionSection {
            grid: Vec::new(),
            repeats: crowdbench_core::rarefaction::DEFAULT_REPEATS,
            band_level: 0.95,
            drift_span: 10,
        }
    }
}

/// One row of the threshold table: Δ directly, or ρ with κᴴ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdoptionRow {
    pub model: String,
    pub task: String,
    pub delta: Option<f64>,
    pub rho: Option<f64>,
    pub kappa_h: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdoptionSection {
    pub gamma: f64,
    pub exposures: Vec<u64>,
    pub populations: Vec<u64>,
    pub probabilities: Vec<f64>,
    pub rows: Vec<AdoptionRow>,
    /// A `family_summary.csv` from an earlier `estimate` run.
    pub estimates: Option<PathBuf>,
    /// Which family Δ to read from `estimates`.
    pub delta_column: DeltaColumn,
}

impl Default for AdoptionSection {
    fn default() -> Self {
        AdoptionSection {
            gamma: 1.0,
            exposures: vec![1, 5, 10, 25],
            populations: vec![10, 100, 1000],
            probabilities: vec![0.1, 0.25, 0.5, 0.75, 1.0],
            rows: Vec::new(),
            estimates: None,
            delta_column: DeltaColumn::DeltaMeanofconds,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaColumn {
    DeltaMeanofconds,
    DeltaOfAggregates,
}

impl DeltaColumn {
    pub fn as_str(self) -> &'static str {
        match self {
            DeltaColumn::DeltaMeanofconds => "delta_meanofconds",
            DeltaColumn::DeltaOfAggregates => "delta_of_aggregates",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompareSection {
    /// Protocol label of the reference runs; `""` matches sources without a protocol.
    pub baseline: Option<String>,
    pub candidate: Option<String>,
    /// Protocol label → temperature, for the rank-correlation diagnostics.
    pub temperatures: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub markdown: bool,
    pub svg: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: PathBuf::from("crowdbench-out"),
            markdown: true,
            svg: true,
        }
    }
}

/// Flag values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub kernel: Option<KernelKind>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::validation(format!("invalid config: {e}")))
    }

    /// Reads a config file; relative input paths are resolved against its directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::validation(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = self.inputs.human.as_mut() {
            fix(p);
        }
        self.inputs.models.iter_mut().for_each(fix);
        if let Some(p) = self.inputs.embeddings.as_mut() {
            fix(p);
        }
        if let Some(p) = self.inputs.stopwords.as_mut() {
            fix(p);
        }
        if let Some(p) = self.adoption.estimates.as_mut() {
            fix(p);
        }
        fix(&mut self.output.dir);
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.estimator.seed = seed;
        }
        if let Some(kind) = o.kernel {
            self.kernel.kinds = vec![kind];
        }
        if let Some(out) = &o.out {
            self.output.dir = out.clone();
        }
        if let Some(w) = o.workers {
            self.estimator.workers = w;
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    /// Checks needed by the corpus-based commands.
    pub fn check_inputs(&self) -> Result<(), CliError> {
        if self.inputs.human.is_none() {
            return Err(CliError::validation("config declares no human corpus ([inputs] human)"));
        }
        if self.inputs.models.is_empty() {
            return Err(CliError::validation("config declares no model corpus ([inputs] models)"));
        }
        if self.kernel.kinds.is_empty() {
            return Err(CliError::validation("no kernel selected ([kernel] kinds)"));
        }
        let needs_vectors = self.kernel.kinds.iter().any(|k| k.needs_embeddings());
        if needs_vectors && self.inputs.embeddings.is_none() && self.inputs.endpoint.is_none() {
            return Err(CliError::validation(
                "semantic and plot_synopsis kernels need [inputs] embeddings or endpoint",
            ));
        }
        self.estimator
            .to_config()
            .validate()
            .map_err(|e| CliError::validation(e.to_string()))
    }
}
