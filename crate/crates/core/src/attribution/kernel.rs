//! Kernel SHAP: weighted least squares over coalition indicators.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::sampler::{BackgroundSampler, CoalitionSampler};
use super::{check_instance, AttributionResult, Diagnostics, Method};
use crate::data::DataTable;
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::Predictor;
use crate::rng::task_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    #[serde(default = "default_coalitions")]
    pub n_coalitions: usize,
    /// Training rows used as the reference distribution.
    #[serde(default = "default_background")]
    pub background_size: usize,
    pub seed: u64,
}

fn default_coalitions() -> usize {
    2048
}
fn default_background() -> usize {
    100
}

impl KernelConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            n_coalitions: default_coalitions(),
            background_size: default_background(),
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedCoalition {
    pub members: Vec<bool>,
    pub weight: f64,
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

/// Proper coalitions with their regression weights.
///
/// When `budget` covers every proper nonempty coalition they are enumerated
/// with the Shapley kernel weight; otherwise coalitions are drawn with
/// probability proportional to that weight and given equal weights.
pub fn kernel_coalitions(n: usize, budget: usize, rng: &mut impl Rng) -> Vec<WeightedCoalition> {
    if n < 2 {
        return Vec::new();
    }
    let proper = if n < 63 { (1u64 << n) - 2 } else { u64::MAX };
    if (budget as u64) >= proper {
        return (1..(1u64 << n) - 1)
            .map(|mask| {
                let members: Vec<bool> = (0..n).map(|k| mask >> k & 1 == 1).collect();
                let s = mask.count_ones() as usize;
                WeightedCoalition {
                    members,
                    weight: (n - 1) as f64 / (binomial(n, s) * s as f64 * (n - s) as f64),
                }
            })
            .collect();
    }
    let size_weights: Vec<f64> = (1..n).map(|s| 1.0 / (s as f64 * (n - s) as f64)).collect();
    let total: f64 = size_weights.iter().sum();
    (0..budget)
        .map(|_| {
            let mut u = rng.random::<f64>() * total;
            let mut s = n - 1;
            for (k, w) in size_weights.iter().enumerate() {
                if u < *w {
                    s = k + 1;
                    break;
                }
                u -= w;
            }
            let mut members = vec![false; n];
            for k in index::sample(rng, n, s) {
                members[k] = true;
            }
            WeightedCoalition { members, weight: 1.0 }
        })
        .collect()
}

/// Solves the constrained regression `v(S) − v(∅) ≈ Σ_{i∈S} φ_i` with `Σ φ = v(N) − v(∅)`.
pub fn kernel_shap_from_values(
    n: usize,
    empty_value: f64,
    full_value: f64,
    coalitions: &[WeightedCoalition],
    values: &[f64],
) -> Result<Vec<f64>> {
    let gap = full_value - empty_value;
    if n == 1 {
        return Ok(vec![gap]);
    }
    if coalitions.len() != values.len() {
        return Err(Error::Attribution("one value is needed per coalition".into()));
    }
    let last = n - 1;
    let k = coalitions.len();
    let z = |c: &WeightedCoalition, j: usize| if c.members[j] { 1.0 } else { 0.0 };
    let design = DMatrix::from_fn(k, last, |r, j| z(&coalitions[r], j) - z(&coalitions[r], last));
    let response = DVector::from_fn(k, |r, _| values[r] - empty_value - z(&coalitions[r], last) * gap);
    let weights = DVector::from_iterator(k, coalitions.iter().map(|c| c.weight));
    let weighted = DMatrix::from_fn(k, last, |r, j| design[(r, j)] * weights[r]);
    let gram = weighted.transpose() * &design;
    let chol = linalg::cholesky(gram).map_err(|_| {
        Error::Attribution(format!(
            "rank-deficient coalition design: {k} coalitions do not identify {n} attributions"
        ))
    })?;
    let head = chol.solve(&(weighted.transpose() * response));
    let mut phi: Vec<f64> = head.iter().copied().collect();
    phi.push(gap - phi.iter().sum::<f64>());
    Ok(phi)
}

/// Kernel SHAP with a random background subset of `train` as the reference distribution.
pub fn kernel_shap_baseline(
    model: &dyn Predictor,
    x: &[f64],
    train: &DataTable,
    config: &KernelConfig,
    instance_index: usize,
) -> Result<AttributionResult> {
    let n = train.n_features();
    check_instance(model, x, n)?;
    if config.n_coalitions < n + 2 {
        return Err(Error::InvalidArgument(format!(
            "kernel SHAP needs at least {} coalitions for {n} features",
            n + 2
        )));
    }
    if config.background_size == 0 {
        return Err(Error::InvalidArgument("background_size must be positive".into()));
    }
    let start = Instant::now();
    let mut rng = task_rng(config.seed, &[instance_index as u64]);
    let rows = if train.row_count() <= config.background_size {
        (0..train.row_count()).collect()
    } else {
        let mut picked = index::sample(&mut rng, train.row_count(), config.background_size).into_vec();
        picked.sort_unstable();
        picked
    };
    let background = BackgroundSampler::new(rows.iter().map(|&r| train.feature_row(r)).collect())?;
    let all = background.all_rows();
    let coalitions = kernel_coalitions(n, config.n_coalitions, &mut rng);
    let mut buf = Vec::with_capacity((coalitions.len() + 1) * background.len() * n);
    background.fill(x, &vec![false; n], &all, &mut buf);
    for c in &coalitions {
        background.fill(x, &c.members, &all, &mut buf);
    }
    let b = background.len();
    let preds = model.predict_batch(&DMatrix::from_row_slice((coalitions.len() + 1) * b, n, &buf))?;
    let block_mean = |k: usize| preds[k * b..(k + 1) * b].iter().sum::<f64>() / b as f64;
    let empty_value = block_mean(0);
    let values: Vec<f64> = (1..=coalitions.len()).map(block_mean).collect();
    let prediction = model.predict_row(x)?;
    let phi = kernel_shap_from_values(n, empty_value, prediction, &coalitions, &values)?;
    Ok(AttributionResult {
        method: Method::Kernel,
        instance_index,
        feature_names: train.feature_names(),
        phi_normalized: phi.clone(),
        phi_causal: phi,
        std_errors: vec![0.0; n],
        prediction,
        baseline: empty_value,
        gamma: vec![1.0 / n as f64; n],
        flags: Vec::new(),
        diagnostics: Diagnostics {
            coalitions_evaluated: coalitions.len(),
            mc_samples: b,
            seed: config.seed,
            exhaustive: n < 63 && coalitions.len() as u64 + 2 == 1u64 << n,
            wall_time: start.elapsed(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attribution::exact_shapley;

    #[test]
    fn exhaustive_kernel_matches_exact_shapley() {
        // A non-additive game on three players.
        let v = |s: &[bool]| -> f64 {
            let a = s[0] as u8 as f64;
            let b = s[1] as u8 as f64;
            let c = s[2] as u8 as f64;
            1.0 + 2.0 * a - b + 0.5 * c + 3.0 * a * b - 1.5 * a * b * c
        };
        let exact = exact_shapley(3, |s| Ok(v(s))).unwrap();
        let coalitions = kernel_coalitions(3, 100, &mut task_rng(0, &[]));
        assert_eq!(coalitions.len(), 6);
        let values: Vec<f64> = coalitions.iter().map(|c| v(&c.members)).collect();
        let phi = kernel_shap_from_values(3, v(&[false; 3]), v(&[true; 3]), &coalitions, &values).unwrap();
        for (a, b) in phi.iter().zip(&exact) {
            assert!((a - b).abs() < 1e-9, "{phi:?} vs {exact:?}");
        }
    }

    #[test]
    fn rank_deficiency_is_reported() {
        let c = vec![WeightedCoalition {
            members: vec![true, false, false],
            weight: 1.0,
        }];
        let err = kernel_shap_from_values(3, 0.0, 1.0, &c, &[0.5]).unwrap_err();
        assert!(err.to_string().contains("rank-deficient"), "{err}");
    }

    #[test]
    fn sampled_coalitions_are_proper() {
        let cs = kernel_coalitions(15, 50, &mut task_rng(3, &[]));
        assert_eq!(cs.len(), 50);
        for c in cs {
            let s = c.members.iter().filter(|&&b| b).count();
            assert!(s > 0 && s < 15);
        }
    }
}
