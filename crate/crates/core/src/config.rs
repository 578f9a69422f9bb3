//! Run configuration: one JSON document plus dotted-path overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::attribution::{KernelConfig, Method, SamplerConfig};
use crate::effects::EffectsConfig;
use crate::error::{Error, Result};
use crate::evaluation::MaskStrategy;
use crate::model::{ForestParams, ModelKind, ModelSpec, PredictionMode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed; every stochastic component derives its stream from it.
    pub seed: u64,
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub discovery: DiscoveryConfig,
    #[serde(default)]
    pub effects: EffectsConfig,
    #[serde(default)]
    pub attribution: AttributionConfig,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    /// Name of a built-in structural equation model.
    #[serde(default)]
    pub builtin: Option<String>,
    #[serde(default = "default_rows")]
    pub n: usize,
    #[serde(default)]
    pub csv: Option<PathBuf>,
    #[serde(default)]
    pub target: Option<String>,
}

fn default_rows() -> usize {
    1000
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub test_fraction: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self { test_fraction: 0.2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: String,
    #[serde(default)]
    pub ridge: f64,
    #[serde(default)]
    pub forest: ForestParams,
    #[serde(default)]
    pub prediction_mode: Option<PredictionMode>,
    /// External predictor command line.
    #[serde(default)]
    pub program: Option<String>,
    #[serde(default)]
    pub args: Vec<String>,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
}

fn default_timeout_ms() -> u64 {
    crate::model::DEFAULT_TIMEOUT.as_millis() as u64
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            kind: "linear".into(),
            ridge: 0.0,
            forest: ForestParams::default(),
            prediction_mode: None,
            program: None,
            args: Vec::new(),
            timeout_ms: default_timeout_ms(),
        }
    }
}

impl ModelConfig {
    pub fn is_external(&self) -> bool {
        self.kind == "external"
    }

    /// The trainable family; `fallback_mode` applies when no mode is configured.
    pub fn spec(&self, fallback_mode: PredictionMode, seed: u64) -> Result<ModelSpec> {
        let mode = self.prediction_mode.unwrap_or(fallback_mode);
        match self.kind.as_str() {
            "linear" => Ok(ModelSpec {
                kind: ModelKind::Linear,
                ridge: self.ridge,
                forest: self.forest,
                prediction_mode: PredictionMode::Regression,
            }),
            "random_forest" => Ok(ModelSpec::random_forest(
                ForestParams {
                    seed: self.forest.seed ^ seed,
                    ..self.forest
                },
                mode,
            )),
            "external" => Err(Error::Config("an external predictor cannot be retrained".into())),
            other => Err(Error::Config(format!(
                "unknown model kind '{other}' (expected linear, random_forest or external)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscoveryConfig {
    pub alpha: f64,
    /// Largest conditioning set; defaults to min(nodes − 2, 3).
    #[serde(default)]
    pub max_cond_size: Option<usize>,
}

impl Default for DiscoveryConfig {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            max_cond_size: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttributionConfig {
    pub method: Method,
    pub mc_samples: usize,
    pub mc_iterations: usize,
    pub exhaustive_max_features: usize,
    /// Explain at most this many test rows (all when absent).
    #[serde(default)]
    pub max_instances: Option<usize>,
    pub kernel_coalitions: usize,
    pub kernel_background: usize,
}

impl Default for AttributionConfig {
    fn default() -> Self {
        let s = SamplerConfig::new(0);
        let k = KernelConfig::new(0);
        Self {
            method: Method::Causal,
            mc_samples: s.mc_samples,
            mc_iterations: s.mc_iterations,
            exhaustive_max_features: s.exhaustive_max_features,
            max_instances: None,
            kernel_coalitions: k.n_coalitions,
            kernel_background: k.background_size,
        }
    }
}

impl AttributionConfig {
    pub fn sampler(&self, seed: u64) -> SamplerConfig {
        SamplerConfig {
            mc_samples: self.mc_samples,
            mc_iterations: self.mc_iterations,
            seed,
            exhaustive_max_features: self.exhaustive_max_features,
        }
    }

    pub fn kernel(&self, seed: u64) -> KernelConfig {
        KernelConfig {
            n_coalitions: self.kernel_coalitions,
            background_size: self.kernel_background,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    pub seeds: Vec<u64>,
    pub methods: Vec<Method>,
    pub mask: MaskStrategy,
    /// Overrides the reduced feature set used for ground truth.
    #[serde(default)]
    pub reduced_features: Option<Vec<String>>,
    /// Add a seeded random ranking to insertion reports.
    pub random_ranking: bool,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            seeds: vec![0, 1, 2, 3, 4],
            methods: vec![Method::Causal, Method::Marginal, Method::Kernel],
            mask: MaskStrategy::Mean,
            reduced_features: None,
            random_ranking: true,
        }
    }
}

impl RunConfig {
    pub fn from_json_str(text: &str, overrides: &[String]) -> Result<Self> {
        let mut value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("malformed config: {e}")))?;
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        let cfg: RunConfig = serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&text, overrides)
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.dataset.builtin, &self.dataset.csv) {
            (Some(name), None) => {
                if !crate::data::BUILTIN_SPECS.contains(&name.as_str()) {
                    return Err(Error::Config(format!(
                        "unknown built-in dataset '{name}' (expected one of {})",
                        crate::data::BUILTIN_SPECS.join(", ")
                    )));
                }
                if self.dataset.n == 0 {
                    return Err(Error::Config("dataset.n must be positive".into()));
                }
            }
            (None, Some(path)) => {
                if !path.exists() {
                    return Err(Error::Config(format!("dataset file {} does not exist", path.display())));
                }
                let target = self
                    .dataset
                    .target
                    .as_deref()
                    .ok_or_else(|| Error::Config("dataset.target is required with dataset.csv".into()))?;
                let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Config(e.to_string()))?;
                let headers = reader.headers().map_err(|e| Error::Config(e.to_string()))?;
                if !headers.iter().any(|h| h.trim() == target) {
                    return Err(Error::Config(format!(
                        "target column '{target}' not found in {}",
                        path.display()
                    )));
                }
            }
            _ => return Err(Error::Config("dataset needs exactly one of 'builtin' or 'csv'".into())),
        }
        if !(self.discovery.alpha > 0.0 && self.discovery.alpha < 1.0) {
            return Err(Error::Config(format!("discovery.alpha {} must lie in (0, 1)", self.discovery.alpha)));
        }
        if !(self.split.test_fraction > 0.0 && self.split.test_fraction < 1.0) {
            return Err(Error::Config("split.test_fraction must lie in (0, 1)".into()));
        }
        self.attribution
            .sampler(self.seed)
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        if self.model.is_external() {
            match &self.model.program {
                Some(p) if !p.is_empty() => {}
                _ => return Err(Error::Config("model.program is required for an external model".into())),
            }
        } else {
            self.model.spec(PredictionMode::Regression, 0)?;
        }
        if self.evaluation.seeds.is_empty() {
            return Err(Error::Config("evaluation.seeds must not be empty".into()));
        }
        Ok(())
    }
}

/// Applies `a.b.c=value`; the value is parsed as JSON and otherwise taken as a string.
pub fn apply_override(root: &mut serde_json::Value, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override '{assignment}' is not of the form key=value")))?;
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(Error::Config(format!("override path '{path}' has an empty segment")));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
    let mut node = root;
    for (depth, key) in keys.iter().enumerate() {
        let last = depth + 1 == keys.len();
        node = match node {
            serde_json::Value::Array(items) => {
                let idx: usize = key
                    .parse()
                    .map_err(|_| Error::Config(format!("'{key}' in '{path}' must index an array")))?;
                let len = items.len();
                items
                    .get_mut(idx)
                    .ok_or_else(|| Error::Config(format!("index {idx} out of range ({len} items) in '{path}'")))?
            }
            serde_json::Value::Object(map) => map
                .entry(key.to_string())
                .or_insert_with(|| serde_json::Value::Object(Default::default())),
            _ => return Err(Error::Config(format!("'{path}' descends into a scalar"))),
        };
        if last {
            *node = value;
            return Ok(());
        }
    }
    unreachable!("paths have at least one segment")
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"seed": 3, "dataset": {"builtin": "lung_cancer"}}"#;

    #[test]
    fn defaults_and_overrides() {
        let cfg = RunConfig::from_json_str(
            MINIMAL,
            &[
                "attribution.mc_samples=128".into(),
                "model.kind=random_forest".into(),
                "evaluation.seeds=[1,2]".into(),
                "discovery.alpha=0.01".into(),
            ],
        )
        .unwrap();
        assert_eq!(cfg.attribution.mc_samples, 128);
        assert_eq!(cfg.model.kind, "random_forest");
        assert_eq!(cfg.evaluation.seeds, vec![1, 2]);
        assert_eq!(cfg.discovery.alpha, 0.01);
        assert_eq!(cfg.split.test_fraction, 0.2);
        assert_eq!(cfg.attribution.method, Method::Causal);
    }

    #[test]
    fn bad_configs_are_usage_errors() {
        for (text, sets) in [
            (r#"{"dataset": {"builtin": "lung_cancer"}}"#, vec![]),
            (MINIMAL, vec!["dataset.builtin=nope".to_string()]),
            (MINIMAL, vec!["discovery.alpha=2".to_string()]),
            (MINIMAL, vec!["model.kind=svm".to_string()]),
            (MINIMAL, vec!["bogus=1".to_string()]),
            (MINIMAL, vec!["noequals".to_string()]),
            (r#"{"seed": 1, "dataset": {"csv": "/nonexistent.csv", "target": "y"}}"#, vec![]),
        ] {
            let err = RunConfig::from_json_str(text, &sets).unwrap_err();
            assert!(err.is_usage(), "{err}");
        }
    }

    #[test]
    fn array_index_override() {
        let mut v = serde_json::json!({"a": [1, 2]});
        apply_override(&mut v, "a.1=5").unwrap();
        assert_eq!(v, serde_json::json!({"a": [1, 5]}));
        assert!(apply_override(&mut v, "a.7=5").is_err());
        apply_override(&mut v, "b.c=hello").unwrap();
        assert_eq!(v["b"]["c"], "hello");
    }
}
