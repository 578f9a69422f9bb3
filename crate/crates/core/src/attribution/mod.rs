//! Shapley attributions: causal value function sampling, normalization, the
//! exact enumeration oracle, and marginal / Kernel SHAP baselines.

mod engine;
mod kernel;
mod sampler;

use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use engine::shapley_kernel;
pub use kernel::{kernel_coalitions, kernel_shap_baseline, kernel_shap_from_values, KernelConfig, WeightedCoalition};
pub use sampler::{
    fit_node_regressions, BackgroundSampler, CausalSampler, CoalitionSampler, MarginalSampler, NodeModel, NoiseTable,
    RegressionCache,
};

use crate::data::DataTable;
use crate::effects::CausalWeights;
use crate::error::{Error, Result};
use crate::model::Predictor;

/// Largest feature count accepted by exact enumeration.
pub const EXACT_MAX_FEATURES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    /// Out-of-coalition draws per value-function evaluation.
    #[serde(default = "default_samples")]
    pub mc_samples: usize,
    /// Random coalitions per instance when not enumerating.
    #[serde(default = "default_iterations")]
    pub mc_iterations: usize,
    pub seed: u64,
    /// Enumerate all coalitions when the feature count is at most this.
    #[serde(default = "default_exhaustive")]
    pub exhaustive_max_features: usize,
}

fn default_samples() -> usize {
    64
}
fn default_iterations() -> usize {
    512
}
fn default_exhaustive() -> usize {
    12
}

impl SamplerConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            mc_samples: default_samples(),
            mc_iterations: default_iterations(),
            seed,
            exhaustive_max_features: default_exhaustive(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mc_samples == 0 || self.mc_iterations == 0 {
            return Err(Error::InvalidArgument("mc_samples and mc_iterations must be positive".into()));
        }
        if self.exhaustive_max_features > EXACT_MAX_FEATURES {
            return Err(Error::InvalidArgument(format!(
                "exhaustive_max_features may not exceed {EXACT_MAX_FEATURES}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Causal,
    Marginal,
    Kernel,
    Exact,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "causal" => Ok(Method::Causal),
            "marginal" => Ok(Method::Marginal),
            "kernel" => Ok(Method::Kernel),
            "exact" => Ok(Method::Exact),
            other => Err(Error::InvalidArgument(format!(
                "unknown method '{other}' (expected causal, marginal, kernel or exact)"
            ))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Causal => "causal",
            Method::Marginal => "marginal",
            Method::Kernel => "kernel",
            Method::Exact => "exact",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flag {
    /// The raw sum was too small to rescale; the reported values are unnormalized.
    DegenerateNormalization,
    /// No feature has a directed path to the target.
    NoCausalSignal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub coalitions_evaluated: usize,
    pub mc_samples: usize,
    pub seed: u64,
    pub exhaustive: bool,
    #[serde(skip)]
    pub wall_time: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttributionResult {
    pub method: Method,
    pub instance_index: usize,
    pub feature_names: Vec<String>,
    /// Raw accumulated values before rescaling.
    pub phi_causal: Vec<f64>,
    /// Reported attributions.
    pub phi_normalized: Vec<f64>,
    /// Monte Carlo standard error of each raw value (zero where not estimated).
    pub std_errors: Vec<f64>,
    pub prediction: f64,
    pub baseline: f64,
    pub gamma: Vec<f64>,
    pub flags: Vec<Flag>,
    pub diagnostics: Diagnostics,
}

impl AttributionResult {
    pub fn is_degenerate(&self) -> bool {
        self.flags.contains(&Flag::DegenerateNormalization)
    }

    /// Wall time is left out so that reruns serialize identically.
    pub fn to_json(&self) -> serde_json::Value {
        let gamma: serde_json::Map<String, serde_json::Value> = self
            .feature_names
            .iter()
            .zip(&self.gamma)
            .map(|(n, g)| (n.clone(), (*g).into()))
            .collect();
        serde_json::json!({
            "instance_index": self.instance_index,
            "phi_causal": self.phi_causal,
            "phi_normalized": self.phi_normalized,
            "std_errors": self.std_errors,
            "prediction": self.prediction,
            "baseline": self.baseline,
            "gamma": gamma,
            "flags": self.flags,
            "config": {
                "method": self.method,
                "seed": self.diagnostics.seed,
                "mc_samples": self.diagnostics.mc_samples,
                "coalitions_evaluated": self.diagnostics.coalitions_evaluated,
                "exhaustive": self.diagnostics.exhaustive,
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Normalized {
    pub values: Vec<f64>,
    pub degenerate: bool,
}

/// Rescales `phi` so that it sums to `prediction − baseline`.
pub fn normalize(phi: &[f64], prediction: f64, baseline: f64) -> Normalized {
    let total: f64 = phi.iter().sum();
    let largest = phi.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if largest == 0.0 || !(total.abs() >= 1e-12 * largest) {
        return Normalized {
            values: phi.to_vec(),
            degenerate: true,
        };
    }
    let factor = (prediction - baseline) / total;
    Normalized {
        values: phi.iter().map(|&p| if p == 0.0 { 0.0 } else { p * factor }).collect(),
        degenerate: false,
    }
}

/// Exact Shapley values of the game `value` on `n` players by enumerating all coalitions.
pub fn exact_shapley<V>(n: usize, value: V) -> Result<Vec<f64>>
where
    V: Fn(&[bool]) -> Result<f64> + Sync,
{
    if n > EXACT_MAX_FEATURES {
        return Err(Error::InvalidArgument(format!(
            "exact enumeration needs 2^{n} coalitions; at most {EXACT_MAX_FEATURES} features are supported"
        )));
    }
    let values: Vec<f64> = (0..1u64 << n)
        .into_par_iter()
        .map(|mask| {
            let members: Vec<bool> = (0..n).map(|k| mask >> k & 1 == 1).collect();
            value(&members)
        })
        .collect::<Result<_>>()?;
    let kernel = shapley_kernel(n);
    let mut phi = vec![0.0; n];
    for (i, p) in phi.iter_mut().enumerate() {
        let bit = 1usize << i;
        for mask in 0..values.len() {
            if mask & bit == 0 {
                *p += kernel[mask.count_ones() as usize] * (values[mask | bit] - values[mask]);
            }
        }
    }
    Ok(phi)
}

/// Mean model output over `samples` completions of `x` drawn by `sampler`.
pub fn value_function<S: CoalitionSampler>(
    model: &dyn Predictor,
    x: &[f64],
    coalition: &[bool],
    sampler: &S,
    samples: usize,
    rng: &mut impl Rng,
) -> Result<f64> {
    if samples == 0 {
        return Err(Error::InvalidArgument("value function needs at least one sample".into()));
    }
    let noise = sampler.draw_noise(samples, rng);
    mean_over(model, x, coalition, sampler, &noise)
}

fn mean_over<S: CoalitionSampler>(
    model: &dyn Predictor,
    x: &[f64],
    coalition: &[bool],
    sampler: &S,
    noise: &NoiseTable,
) -> Result<f64> {
    let preds = model.predict_batch(&sampler.rows(x, coalition, noise))?;
    Ok(preds.iter().sum::<f64>() / preds.len() as f64)
}

/// `v_c(S)`: the model averaged over `do(X_S = x_S)` draws of the remaining features.
pub fn causal_value_function(
    model: &dyn Predictor,
    x: &[f64],
    coalition: &[bool],
    sampler: &CausalSampler,
    samples: usize,
    rng: &mut impl Rng,
) -> Result<f64> {
    value_function(model, x, coalition, sampler, samples, rng)
}

/// One full feature row with the coalition fixed and the rest drawn causally.
pub fn sample_out_of_coalition(sampler: &CausalSampler, x: &[f64], coalition: &[bool], rng: &mut impl Rng) -> Vec<f64> {
    let noise = sampler.draw_noise(1, rng);
    let mut out = Vec::with_capacity(x.len());
    sampler.fill(x, coalition, &noise, &mut out);
    out
}

fn check_instance(model: &dyn Predictor, x: &[f64], n: usize) -> Result<()> {
    if x.len() != n || model.n_features() != n {
        return Err(Error::Attribution(format!(
            "instance has {} features, sampler {n}, model {}",
            x.len(),
            model.n_features()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Attribution("instance contains non-finite values".into()));
    }
    Ok(())
}

/// Causal SHAP for one instance: the γ-weighted Shapley loop over `v_c`, then normalization.
pub fn causal_shap(
    model: &dyn Predictor,
    x: &[f64],
    sampler: &CausalSampler,
    weights: &CausalWeights,
    baseline: f64,
    config: &SamplerConfig,
    instance_index: usize,
) -> Result<AttributionResult> {
    config.validate()?;
    let n = sampler.n_features();
    check_instance(model, x, n)?;
    if weights.gamma.len() != n {
        return Err(Error::Attribution("causal weights do not match the feature count".into()));
    }
    let start = Instant::now();
    let prediction = model.predict_row(x)?;
    let out = engine::shapley_loop(model, x, sampler, &weights.gamma, config, instance_index as u64, false)?;
    let normalized = normalize(&out.raw, prediction, baseline);
    let mut flags = Vec::new();
    if weights.no_causal_signal {
        flags.push(Flag::NoCausalSignal);
    }
    if normalized.degenerate {
        flags.push(Flag::DegenerateNormalization);
    }
    Ok(AttributionResult {
        method: Method::Causal,
        instance_index,
        feature_names: feature_names(sampler.dag().names(), sampler.feature_columns()),
        phi_causal: out.raw,
        phi_normalized: normalized.values,
        std_errors: out.variance.iter().map(|v| v.sqrt()).collect(),
        prediction,
        baseline,
        gamma: weights.gamma.clone(),
        flags,
        diagnostics: Diagnostics {
            coalitions_evaluated: out.tasks,
            mc_samples: config.mc_samples,
            seed: config.seed,
            exhaustive: out.exhaustive,
            wall_time: start.elapsed(),
        },
    })
}

fn feature_names(names: &[String], columns: &[usize]) -> Vec<String> {
    columns.iter().map(|&c| names[c].clone()).collect()
}

/// Plain Shapley loop with features completed independently from their training marginals.
pub fn marginal_shap_baseline(
    model: &dyn Predictor,
    x: &[f64],
    sampler: &MarginalSampler,
    feature_names: &[String],
    baseline: f64,
    config: &SamplerConfig,
    instance_index: usize,
) -> Result<AttributionResult> {
    config.validate()?;
    let n = sampler.n_features();
    check_instance(model, x, n)?;
    let start = Instant::now();
    let prediction = model.predict_row(x)?;
    let ones = vec![1.0; n];
    let out = engine::shapley_loop(model, x, sampler, &ones, config, instance_index as u64, true)?;
    Ok(AttributionResult {
        method: Method::Marginal,
        instance_index,
        feature_names: feature_names.to_vec(),
        phi_normalized: out.raw.clone(),
        phi_causal: out.raw,
        std_errors: out.variance.iter().map(|v| v.sqrt()).collect(),
        prediction,
        baseline,
        gamma: vec![1.0 / n as f64; n],
        flags: Vec::new(),
        diagnostics: Diagnostics {
            coalitions_evaluated: out.tasks,
            mc_samples: config.mc_samples,
            seed: config.seed,
            exhaustive: out.exhaustive,
            wall_time: start.elapsed(),
        },
    })
}

/// Exact interventional Shapley values with every background row as reference.
pub fn exact_interventional_shapley(model: &dyn Predictor, x: &[f64], background: &BackgroundSampler) -> Result<Vec<f64>> {
    let n = background.n_features();
    check_instance(model, x, n)?;
    let all = background.all_rows();
    exact_shapley(n, |coalition| mean_over(model, x, coalition, background, &all))
}

pub fn exact_attribution(
    model: &dyn Predictor,
    x: &[f64],
    background: &BackgroundSampler,
    feature_names: &[String],
    instance_index: usize,
) -> Result<AttributionResult> {
    let start = Instant::now();
    let n = background.n_features();
    let phi = exact_interventional_shapley(model, x, background)?;
    let prediction = model.predict_row(x)?;
    let reference = mean_over(model, x, &vec![false; n], background, &background.all_rows())?;
    Ok(AttributionResult {
        method: Method::Exact,
        instance_index,
        feature_names: feature_names.to_vec(),
        phi_normalized: phi.clone(),
        phi_causal: phi,
        std_errors: vec![0.0; n],
        prediction,
        baseline: reference,
        gamma: vec![1.0 / n as f64; n],
        flags: Vec::new(),
        diagnostics: Diagnostics {
            coalitions_evaluated: 1 << n,
            mc_samples: background.len(),
            seed: 0,
            exhaustive: true,
            wall_time: start.elapsed(),
        },
    })
}

/// Everything needed to explain instances with one of the supported methods.
pub struct Explainer<'a> {
    pub model: &'a dyn Predictor,
    pub train: &'a DataTable,
    pub method: Method,
    pub sampler_config: SamplerConfig,
    pub kernel_config: KernelConfig,
    /// Required for [`Method::Causal`].
    pub causal: Option<(&'a CausalSampler, &'a CausalWeights)>,
}

impl Explainer<'_> {
    /// Attributions for every row of `rows`, in order; instances run in parallel.
    pub fn explain_rows(&self, rows: &[Vec<f64>]) -> Result<Vec<AttributionResult>> {
        let names = self.train.feature_names();
        let n = names.len();
        match self.method {
            Method::Causal => {
                let (sampler, weights) = self
                    .causal
                    .ok_or_else(|| Error::Attribution("causal method needs a fitted graph".into()))?;
                let baseline = crate::model::expected_prediction(self.model, self.train)?.expected_prediction;
                rows.par_iter()
                    .enumerate()
                    .map(|(k, x)| causal_shap(self.model, x, sampler, weights, baseline, &self.sampler_config, k))
                    .collect()
            }
            Method::Marginal => {
                let sampler = MarginalSampler::new(self.train)?;
                let baseline = crate::model::expected_prediction(self.model, self.train)?.expected_prediction;
                rows.par_iter()
                    .enumerate()
                    .map(|(k, x)| {
                        marginal_shap_baseline(self.model, x, &sampler, &names, baseline, &self.sampler_config, k)
                    })
                    .collect()
            }
            Method::Kernel => rows
                .par_iter()
                .enumerate()
                .map(|(k, x)| kernel_shap_baseline(self.model, x, self.train, &self.kernel_config, k))
                .collect(),
            Method::Exact => {
                if n > EXACT_MAX_FEATURES {
                    return Err(Error::InvalidArgument(format!(
                        "exact attribution over {n} features would need 2^{n} coalitions; the limit is {EXACT_MAX_FEATURES}"
                    )));
                }
                let background = BackgroundSampler::from_table(self.train)?;
                rows.par_iter()
                    .enumerate()
                    .map(|(k, x)| exact_attribution(self.model, x, &background, &names, k))
                    .collect()
            }
        }
    }
}

/// Wall-time-free JSON array of results.
pub fn results_to_json(results: &[AttributionResult]) -> serde_json::Value {
    serde_json::Value::Array(results.iter().map(AttributionResult::to_json).collect())
}

/// Rows of a matrix as vectors.
pub fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|r| m.row(r).iter().copied().collect()).collect()
}
