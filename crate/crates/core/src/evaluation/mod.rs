//! Insertion curves, probability metrics, global rankings and reduced-feature ground truth.

mod ground_truth;
mod insertion;
mod metrics;

pub use ground_truth::{
    compare_to_ground_truth, reduced_feature_ground_truth, reduced_feature_set, GroundTruth, GroundTruthReport,
    REDUCED_MAX_FEATURES,
};
pub use insertion::{insertion_curve, InsertionCurve, InsertionReport, InsertionStep, MaskReference, MaskStrategy, Metrics};
pub use metrics::{auroc, brier, cross_entropy, rmse};

use crate::attribution::AttributionResult;
use crate::error::{Error, Result};

/// Mean |φ| per feature across instances.
pub fn mean_abs_attribution(results: &[AttributionResult]) -> Result<Vec<f64>> {
    let width = results
        .first()
        .map(|r| r.phi_normalized.len())
        .ok_or_else(|| Error::Evaluation("no attributions to rank".into()))?;
    if results.iter().any(|r| r.phi_normalized.len() != width) {
        return Err(Error::Evaluation("attributions differ in width".into()));
    }
    Ok((0..width)
        .map(|k| results.iter().map(|r| r.phi_normalized[k].abs()).sum::<f64>() / results.len() as f64)
        .collect())
}

/// Feature positions by decreasing mean |φ|, ties by position.
pub fn global_importance(results: &[AttributionResult]) -> Result<Vec<usize>> {
    Ok(rank_descending(&mean_abs_attribution(results)?))
}

pub fn rank_descending(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attribution::{Diagnostics, Method};

    fn result(phi: Vec<f64>) -> AttributionResult {
        AttributionResult {
            method: Method::Causal,
            instance_index: 0,
            feature_names: (0..phi.len()).map(|k| format!("f{k}")).collect(),
            phi_causal: phi.clone(),
            std_errors: vec![0.0; phi.len()],
            gamma: vec![0.0; phi.len()],
            phi_normalized: phi,
            prediction: 0.0,
            baseline: 0.0,
            flags: vec![],
            diagnostics: Diagnostics {
                coalitions_evaluated: 0,
                mc_samples: 0,
                seed: 0,
                exhaustive: true,
                wall_time: Default::default(),
            },
        }
    }

    #[test]
    fn ranking_examples() {
        assert_eq!(global_importance(&[result(vec![3.0, -5.0, 1.0])]).unwrap(), vec![1, 0, 2]);
        assert_eq!(global_importance(&[result(vec![0.0; 3])]).unwrap(), vec![0, 1, 2]);
        assert!(global_importance(&[]).is_err());
        assert!(global_importance(&[result(vec![1.0]), result(vec![1.0, 2.0])]).is_err());
    }
}
