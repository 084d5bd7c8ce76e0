use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use nbr_core::baselines::{TifuknnGrid, UpcfGrid};
use nbr_core::corpus::{DunnhumbyColumns, InstacartColumns, PreprocessConfig, SourceFormat};
use nbr_core::experiments::{Method, SelectionMetric, TrexGrid};
use nbr_core::metrics::{EvalConfig, FairnessConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FormatName {
    Canonical,
    Dunnhumby,
    Instacart,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub format: FormatName,
    pub path: PathBuf,
    #[serde(default)]
    pub dunnhumby: DunnhumbyColumns,
    #[serde(default)]
    pub instacart: InstacartColumns,
    /// Instacart only: users sampled before preprocessing.
    #[serde(default)]
    pub sample_users: Option<usize>,
    #[serde(default)]
    pub sample_seed: u64,
    #[serde(default)]
    pub preprocess: PreprocessConfig,
    #[serde(default)]
    pub split_seed: u64,
}

impl DatasetConfig {
    pub fn source_format(&self) -> SourceFormat {
        match self.format {
            FormatName::Canonical => SourceFormat::Canonical,
            FormatName::Dunnhumby => SourceFormat::Dunnhumby(self.dunnhumby.clone()),
            FormatName::Instacart => SourceFormat::Instacart {
                columns: self.instacart.clone(),
                sample_users: self.sample_users,
                seed: self.sample_seed,
            },
        }
    }
}

/// A method with explicit hyperparameters, or a reference to the winner of
/// an earlier `tune` run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MethodSpec {
    Tuned { tuned: String },
    Fixed(Method),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuneConfig {
    #[serde(default)]
    pub metric: SelectionMetric,
    #[serde(default = "default_tuned")]
    pub methods: Vec<String>,
    #[serde(default)]
    pub trex_rep: TrexGrid,
    #[serde(default)]
    pub tifuknn: TifuknnGrid,
    #[serde(default)]
    pub upcf: UpcfGrid,
}

fn default_tuned() -> Vec<String> {
    vec!["trex_rep".into(), "tifuknn".into(), "upcf".into()]
}

impl Default for TuneConfig {
    fn default() -> Self {
        TuneConfig {
            metric: SelectionMetric::default(),
            methods: default_tuned(),
            trex_rep: TrexGrid::default(),
            tifuknn: TifuknnGrid::default(),
            upcf: UpcfGrid::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationConfig {
    #[serde(default = "default_k")]
    pub k: usize,
    /// Share of the catalog (by training frequency) in the popular group.
    #[serde(default = "default_share")]
    pub popular_share: f64,
    #[serde(default)]
    pub fairness: FairnessConfig,
}

fn default_k() -> usize {
    10
}

fn default_share() -> f64 {
    0.2
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        EvaluationConfig {
            k: default_k(),
            popular_share: default_share(),
            fairness: FairnessConfig::default(),
        }
    }
}

impl EvaluationConfig {
    pub fn eval_config(&self) -> EvalConfig {
        EvalConfig {
            k: self.k,
            fairness: self.fairness,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Number of evenly spaced score quantiles used as thresholds.
    #[serde(default = "default_quantiles")]
    pub quantiles: usize,
    /// Explicit thresholds; overrides `quantiles` when set.
    #[serde(default)]
    pub v: Option<Vec<f64>>,
    /// Seed of the fairness sampler.
    #[serde(default)]
    pub seed: u64,
    /// Repetition parameters; the tuned TREx-Rep values when absent.
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub beta: Option<f64>,
}

fn default_quantiles() -> usize {
    21
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            quantiles: default_quantiles(),
            v: None,
            seed: 0,
            alpha: None,
            beta: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub output_dir: PathBuf,
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub method: Option<MethodSpec>,
    #[serde(default)]
    pub tune: TuneConfig,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
}

impl RunConfig {
    pub fn corpus_dir(&self) -> PathBuf {
        self.output_dir.join("corpus")
    }

    pub fn stage_dir(&self, stage: &str) -> PathBuf {
        self.output_dir.join(stage)
    }

    fn resolve(mut self, base: &Path) -> Self {
        let abs = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
        self.output_dir = normalize(&abs(&self.output_dir));
        self.dataset.path = normalize(&abs(&self.dataset.path));
        self
    }

    fn validate(&self) -> anyhow::Result<()> {
        if self.evaluation.k == 0 {
            bail!("evaluation.k must be positive");
        }
        if !(0.0..=1.0).contains(&self.evaluation.popular_share) {
            bail!("evaluation.popular_share must lie in [0, 1]");
        }
        for m in &self.tune.methods {
            if !["trex_rep", "tifuknn", "upcf"].contains(&m.as_str()) {
                bail!("unknown tunable method {m:?}");
            }
        }
        Ok(())
    }
}

/// Lexically removes `.` and `..` components.
fn normalize(p: &Path) -> PathBuf {
    use std::path::Component;
    let mut out = PathBuf::new();
    for c in p.components() {
        match c {
            Component::CurDir => {}
            Component::ParentDir => {
                out.pop();
            }
            other => out.push(other.as_os_str()),
        }
    }
    out
}

/// Loads a TOML run config, or the config echoed in a `manifest.json`.
/// Relative paths in a TOML file are taken relative to the file.
pub fn load_config(path: &Path) -> anyhow::Result<RunConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let cfg = if path.extension().is_some_and(|e| e == "json") {
        let manifest: crate::manifest::Manifest =
            serde_json::from_str(&text).with_context(|| format!("parsing manifest {}", path.display()))?;
        manifest
            .config
            .with_context(|| format!("{} has no config to re-run", path.display()))?
    } else {
        let cfg: RunConfig = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let base = if base.as_os_str().is_empty() { Path::new(".") } else { base };
        let base = std::path::absolute(base).with_context(|| format!("resolving {}", base.display()))?;
        cfg.resolve(&base)
    };
    cfg.validate()?;
    Ok(cfg)
}
