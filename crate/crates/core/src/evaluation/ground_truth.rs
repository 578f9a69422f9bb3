use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::rmse;
use crate::attribution::{exact_interventional_shapley, AttributionResult, BackgroundSampler};
use crate::data::DataTable;
use crate::discovery::Dag;
use crate::error::{Error, Result};
use crate::model::{Model, ModelSpec};

/// Largest reduced set handled by exact enumeration.
pub const REDUCED_MAX_FEATURES: usize = 12;

/// Features with no feature parents and a directed path to the target, as column indices.
pub fn reduced_feature_set(dag: &Dag, feature_columns: &[usize], target: usize) -> Vec<usize> {
    let reaches_target = dag.ancestors_of(&[target]);
    feature_columns
        .iter()
        .copied()
        .filter(|&c| reaches_target[c] && c != target && dag.parents(c).iter().all(|p| !feature_columns.contains(p)))
        .collect()
}

/// Exact Shapley values of a model retrained on the reduced features.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub reduced_features: Vec<String>,
    pub model: Model,
    /// Per test instance, per reduced feature.
    pub values: Vec<Vec<f64>>,
}

pub fn reduced_feature_ground_truth(
    family: &ModelSpec,
    train: &DataTable,
    test: &DataTable,
    reduced: &[String],
) -> Result<GroundTruth> {
    if reduced.is_empty() {
        return Err(Error::Evaluation("the reduced feature set is empty".into()));
    }
    if reduced.len() > REDUCED_MAX_FEATURES {
        return Err(Error::Evaluation(format!(
            "reduced set has {} features; exact enumeration supports {REDUCED_MAX_FEATURES}",
            reduced.len()
        )));
    }
    let train_r = train.select_features(reduced)?;
    let test_r = test.select_features(reduced)?;
    let model = family.train(&train_r)?;
    let background = BackgroundSampler::from_table(&train_r)?;
    let values = (0..test_r.row_count())
        .into_par_iter()
        .map(|r| exact_interventional_shapley(&model, &test_r.feature_row(r), &background))
        .collect::<Result<Vec<_>>>()?;
    Ok(GroundTruth {
        reduced_features: reduced.to_vec(),
        model,
        values,
    })
}

/// A method's attributions on the full feature set scored against the ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthReport {
    pub method: String,
    pub reduced_features: Vec<String>,
    /// Mean over test instances of the signed exact values.
    pub exact_values: Vec<f64>,
    /// Mean over test instances of the signed method values on the reduced features.
    pub method_values: Vec<f64>,
    /// RMSE between the two signed profiles.
    pub rmse: f64,
    pub exact_mean_abs: Vec<f64>,
    pub method_mean_abs: Vec<f64>,
    /// RMSE between the mean-absolute profiles.
    pub rmse_mean_abs: f64,
    /// RMSE over every (instance, reduced feature) pair.
    pub rmse_per_instance: f64,
}

fn column_means(rows: &[Vec<f64>], f: impl Fn(f64) -> f64) -> Vec<f64> {
    let width = rows[0].len();
    (0..width)
        .map(|k| rows.iter().map(|r| f(r[k])).sum::<f64>() / rows.len() as f64)
        .collect()
}

pub fn compare_to_ground_truth(truth: &GroundTruth, results: &[AttributionResult]) -> Result<GroundTruthReport> {
    if results.len() != truth.values.len() || results.is_empty() {
        return Err(Error::Evaluation(format!(
            "{} attributions for {} ground-truth instances",
            results.len(),
            truth.values.len()
        )));
    }
    let positions: Vec<usize> = truth
        .reduced_features
        .iter()
        .map(|name| {
            results[0]
                .feature_names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| Error::Evaluation(format!("attributions lack feature '{name}'")))
        })
        .collect::<Result<_>>()?;
    let method_rows: Vec<Vec<f64>> = results
        .iter()
        .map(|r| positions.iter().map(|&p| r.phi_normalized[p]).collect())
        .collect();
    let exact_values = column_means(&truth.values, |v| v);
    let method_values = column_means(&method_rows, |v| v);
    let exact_mean_abs = column_means(&truth.values, f64::abs);
    let method_mean_abs = column_means(&method_rows, f64::abs);
    let flat_exact: Vec<f64> = truth.values.iter().flatten().copied().collect();
    let flat_method: Vec<f64> = method_rows.iter().flatten().copied().collect();
    Ok(GroundTruthReport {
        method: results[0].method.to_string(),
        reduced_features: truth.reduced_features.clone(),
        rmse: rmse(&method_values, &exact_values)?,
        rmse_mean_abs: rmse(&method_mean_abs, &exact_mean_abs)?,
        rmse_per_instance: rmse(&flat_method, &flat_exact)?,
        exact_values,
        method_values,
        exact_mean_abs,
        method_mean_abs,
    })
}
