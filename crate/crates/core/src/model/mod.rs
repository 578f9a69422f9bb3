//! Black-box predictors behind a uniform batch-predict contract.

mod external;
mod forest;
mod linear;

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use external::{ExternalModel, DEFAULT_TIMEOUT};
pub use forest::{train_random_forest, ForestParams, Node, RandomForest, Tree};
pub use linear::{train_linear, LinearModel};

use crate::data::DataTable;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictionMode {
    Regression,
    /// Outputs are class-1 probabilities in [0, 1].
    Probability,
}

/// A model `f: R^n -> R` evaluated on batches of rows.
pub trait Predictor: Send + Sync {
    fn n_features(&self) -> usize;

    fn prediction_mode(&self) -> PredictionMode {
        PredictionMode::Regression
    }

    /// One output per row of `rows` (rows × n_features).
    fn predict_batch(&self, rows: &DMatrix<f64>) -> Result<Vec<f64>>;

    fn predict_row(&self, row: &[f64]) -> Result<f64> {
        let m = DMatrix::from_row_slice(1, row.len(), row);
        Ok(self.predict_batch(&m)?[0])
    }
}

pub(crate) fn check_width(rows: &DMatrix<f64>, n_features: usize) -> Result<()> {
    if rows.nrows() > 0 && rows.ncols() != n_features {
        return Err(Error::Model(format!(
            "batch has {} columns, model expects {n_features}",
            rows.ncols()
        )));
    }
    Ok(())
}

/// Wraps a closure over a single row.
pub struct FnPredictor<F> {
    n_features: usize,
    mode: PredictionMode,
    f: F,
}

impl<F> FnPredictor<F>
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
{
    pub fn new(n_features: usize, f: F) -> Self {
        Self {
            n_features,
            mode: PredictionMode::Regression,
            f,
        }
    }

    pub fn with_mode(mut self, mode: PredictionMode) -> Self {
        self.mode = mode;
        self
    }
}

impl<F> Predictor for FnPredictor<F>
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
{
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn prediction_mode(&self) -> PredictionMode {
        self.mode
    }

    fn predict_batch(&self, rows: &DMatrix<f64>) -> Result<Vec<f64>> {
        check_width(rows, self.n_features)?;
        let mut buf = vec![0.0; self.n_features];
        (0..rows.nrows())
            .map(|r| {
                for (c, b) in buf.iter_mut().enumerate() {
                    *b = rows[(r, c)];
                }
                let v = (self.f)(&buf);
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::Model(format!("non-finite prediction for row {r}")))
                }
            })
            .collect()
    }
}

impl<P: Predictor + ?Sized> Predictor for &P {
    fn n_features(&self) -> usize {
        (**self).n_features()
    }
    fn prediction_mode(&self) -> PredictionMode {
        (**self).prediction_mode()
    }
    fn predict_batch(&self, rows: &DMatrix<f64>) -> Result<Vec<f64>> {
        (**self).predict_batch(rows)
    }
}

impl<P: Predictor + ?Sized> Predictor for Box<P> {
    fn n_features(&self) -> usize {
        (**self).n_features()
    }
    fn prediction_mode(&self) -> PredictionMode {
        (**self).prediction_mode()
    }
    fn predict_batch(&self, rows: &DMatrix<f64>) -> Result<Vec<f64>> {
        (**self).predict_batch(rows)
    }
}

/// A built-in model that can be persisted.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Linear(LinearModel),
    RandomForest(RandomForest),
}

impl Predictor for Model {
    fn n_features(&self) -> usize {
        match self {
            Model::Linear(m) => m.n_features(),
            Model::RandomForest(m) => m.n_features(),
        }
    }

    fn prediction_mode(&self) -> PredictionMode {
        match self {
            Model::Linear(m) => m.prediction_mode(),
            Model::RandomForest(m) => m.prediction_mode(),
        }
    }

    fn predict_batch(&self, rows: &DMatrix<f64>) -> Result<Vec<f64>> {
        match self {
            Model::Linear(m) => m.predict_batch(rows),
            Model::RandomForest(m) => m.predict_batch(rows),
        }
    }
}

/// On-disk form: `{"kind", "prediction_mode", "parameters"}`.
#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    kind: String,
    prediction_mode: PredictionMode,
    parameters: serde_json::Value,
}

impl Model {
    pub fn kind(&self) -> &'static str {
        match self {
            Model::Linear(_) => "linear",
            Model::RandomForest(_) => "random_forest",
        }
    }

    pub fn to_json_value(&self) -> Result<serde_json::Value> {
        let parameters = match self {
            Model::Linear(m) => serde_json::to_value(m)?,
            Model::RandomForest(m) => serde_json::to_value(m)?,
        };
        Ok(serde_json::to_value(ModelFile {
            kind: self.kind().into(),
            prediction_mode: self.prediction_mode(),
            parameters,
        })?)
    }

    pub fn from_json_value(value: serde_json::Value) -> Result<Self> {
        let file: ModelFile = serde_json::from_value(value)?;
        match file.kind.as_str() {
            "linear" => {
                let mut m: LinearModel = serde_json::from_value(file.parameters)?;
                m.mode = file.prediction_mode;
                Ok(Model::Linear(m))
            }
            "random_forest" => {
                let mut m: RandomForest = serde_json::from_value(file.parameters)?;
                m.mode = file.prediction_mode;
                m.validate()?;
                Ok(Model::RandomForest(m))
            }
            other => Err(Error::Model(format!("unknown model kind '{other}'"))),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = crate::output::to_json_string(&self.to_json_value()?)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_value(serde_json::from_str(&text)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Linear,
    RandomForest,
}

/// A trainable model family with its hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub kind: ModelKind,
    #[serde(default)]
    pub ridge: f64,
    #[serde(default)]
    pub forest: ForestParams,
    #[serde(default = "regression_mode")]
    pub prediction_mode: PredictionMode,
}

fn regression_mode() -> PredictionMode {
    PredictionMode::Regression
}

impl ModelSpec {
    pub fn linear() -> Self {
        Self {
            kind: ModelKind::Linear,
            ridge: 0.0,
            forest: ForestParams::default(),
            prediction_mode: PredictionMode::Regression,
        }
    }

    pub fn random_forest(forest: ForestParams, prediction_mode: PredictionMode) -> Self {
        Self {
            kind: ModelKind::RandomForest,
            ridge: 0.0,
            forest,
            prediction_mode,
        }
    }

    pub fn train(&self, table: &DataTable) -> Result<Model> {
        match self.kind {
            ModelKind::Linear => {
                if self.prediction_mode != PredictionMode::Regression {
                    return Err(Error::InvalidArgument("linear models only support regression outputs".into()));
                }
                Ok(Model::Linear(train_linear(table, self.ridge)?))
            }
            ModelKind::RandomForest => Ok(Model::RandomForest(train_random_forest(
                table,
                self.forest,
                self.prediction_mode,
            )?)),
        }
    }
}

/// `E[f(X)]` over a set of rows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    pub expected_prediction: f64,
    pub training_row_count: usize,
}

/// Arithmetic mean of the model output over the rows of `train`.
pub fn expected_prediction(model: &dyn Predictor, train: &DataTable) -> Result<Baseline> {
    let n = train.row_count();
    if n == 0 {
        return Err(Error::InvalidArgument("baseline over an empty training set".into()));
    }
    let preds = model.predict_batch(&train.feature_matrix())?;
    Ok(Baseline {
        expected_prediction: preds.iter().sum::<f64>() / n as f64,
        training_row_count: n,
    })
}
