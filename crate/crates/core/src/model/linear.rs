use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{check_width, PredictionMode, Predictor};
use crate::data::DataTable;
use crate::error::{Error, Result};
use crate::linalg;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    #[serde(skip, default = "regression")]
    pub(crate) mode: PredictionMode,
}

fn regression() -> PredictionMode {
    PredictionMode::Regression
}

impl LinearModel {
    pub fn new(weights: Vec<f64>, intercept: f64) -> Self {
        Self {
            weights,
            intercept,
            mode: PredictionMode::Regression,
        }
    }
}

/// Minimizes Σ(y − w·x − b)² + λ‖w‖² with an unpenalized intercept.
pub fn train_linear(train: &DataTable, ridge_lambda: f64) -> Result<LinearModel> {
    if !(ridge_lambda >= 0.0) || !ridge_lambda.is_finite() {
        return Err(Error::InvalidArgument(format!("ridge penalty {ridge_lambda} must be a nonnegative number")));
    }
    let features = train.feature_indices();
    if ridge_lambda == 0.0 && train.row_count() <= features.len() {
        return Err(Error::Singular(format!(
            "{} rows cannot determine {} unpenalized weights",
            train.row_count(),
            features.len()
        )));
    }
    let cols: Vec<&[f64]> = features.iter().map(|&c| train.column(c)).collect();
    let fit = linalg::ols(&cols, train.target(), ridge_lambda)?;
    Ok(LinearModel::new(fit.coefficients, fit.intercept))
}

impl Predictor for LinearModel {
    fn n_features(&self) -> usize {
        self.weights.len()
    }

    fn prediction_mode(&self) -> PredictionMode {
        self.mode
    }

    fn predict_batch(&self, rows: &DMatrix<f64>) -> Result<Vec<f64>> {
        check_width(rows, self.weights.len())?;
        Ok((0..rows.nrows())
            .map(|r| {
                self.intercept
                    + self
                        .weights
                        .iter()
                        .enumerate()
                        .map(|(c, w)| w * rows[(r, c)])
                        .sum::<f64>()
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xy(x: Vec<f64>, y: Vec<f64>) -> DataTable {
        DataTable::new(vec!["x".into(), "y".into()], vec![x, y], 1).unwrap()
    }

    #[test]
    fn exact_fit() {
        let m = train_linear(&xy(vec![1.0, 2.0, 3.0, 5.0], vec![2.0, 4.0, 6.0, 10.0]), 0.0).unwrap();
        assert!((m.weights[0] - 2.0).abs() < 1e-9);
        assert!(m.intercept.abs() < 1e-9);
    }

    #[test]
    fn hand_prediction() {
        let m = LinearModel::new(vec![1.0, 1.0], 0.0);
        assert_eq!(m.predict_row(&[2.0, 3.0]).unwrap(), 5.0);
    }

    #[test]
    fn ridge_limit_shrinks_to_zero() {
        let t = xy(vec![1.0, 2.0, 3.0, 5.0], vec![2.0, 4.0, 6.0, 10.0]);
        let m = train_linear(&t, 1e12).unwrap();
        assert!(m.weights[0].abs() < 1e-9);
        assert!(train_linear(&t, -1.0).is_err());
    }

    #[test]
    fn underdetermined_without_ridge() {
        let t = xy(vec![1.0], vec![2.0]);
        assert!(matches!(train_linear(&t, 0.0), Err(Error::Singular(_))));
    }
}
