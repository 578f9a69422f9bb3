use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::metrics::{auroc, brier, cross_entropy};
use crate::data::DataTable;
use crate::error::{Error, Result};
use crate::model::{PredictionMode, Predictor};
use crate::rng::task_rng;

/// Values given to features that have not been inserted yet.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskStrategy {
    /// Training column means.
    #[default]
    Mean,
    /// One training row value per test row and feature, drawn once per run.
    MarginalSample,
}

/// Reference values for masked features.
#[derive(Debug, Clone, PartialEq)]
pub enum MaskReference {
    Constant(Vec<f64>),
    PerRow(Vec<Vec<f64>>),
}

impl MaskReference {
    pub fn build(strategy: MaskStrategy, train: &DataTable, test_rows: usize, seed: u64) -> Self {
        let features = train.feature_indices();
        match strategy {
            MaskStrategy::Mean => {
                MaskReference::Constant(features.iter().map(|&c| crate::linalg::mean(train.column(c))).collect())
            }
            MaskStrategy::MarginalSample => {
                let mut rng = task_rng(seed, &[]);
                MaskReference::PerRow(
                    (0..test_rows)
                        .map(|_| {
                            features
                                .iter()
                                .map(|&c| train.column(c)[rng.random_range(0..train.row_count())])
                                .collect()
                        })
                        .collect(),
                )
            }
        }
    }

    fn value(&self, row: usize, feature: usize) -> f64 {
        match self {
            MaskReference::Constant(v) => v[feature],
            MaskReference::PerRow(rows) => rows[row][feature],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub auroc: f64,
    pub cross_entropy: f64,
    pub brier: f64,
}

impl Metrics {
    pub fn compute(probabilities: &[f64], labels: &[f64]) -> Result<Self> {
        Ok(Self {
            auroc: auroc(probabilities, labels)?,
            cross_entropy: cross_entropy(probabilities, labels)?,
            brier: brier(probabilities, labels)?,
        })
    }

    fn combine(items: &[Metrics], f: impl Fn(&[f64]) -> f64) -> Metrics {
        let pick = |g: fn(&Metrics) -> f64| f(&items.iter().map(g).collect::<Vec<_>>());
        Metrics {
            auroc: pick(|m| m.auroc),
            cross_entropy: pick(|m| m.cross_entropy),
            brier: pick(|m| m.brier),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InsertionStep {
    pub inserted: usize,
    #[serde(flatten)]
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InsertionCurve {
    /// Feature names, most important first.
    pub ranking: Vec<String>,
    pub steps: Vec<InsertionStep>,
    /// Arithmetic mean of each metric over the steps.
    pub aggregate: Metrics,
}

/// Inserts features in `ranking` order (feature positions) and scores the masked predictions.
pub fn insertion_curve(
    model: &dyn Predictor,
    test: &DataTable,
    ranking: &[usize],
    mask: &MaskReference,
) -> Result<InsertionCurve> {
    let n = test.n_features();
    if model.prediction_mode() != PredictionMode::Probability {
        return Err(Error::Evaluation("insertion metrics need a probability-mode model".into()));
    }
    let mut seen = vec![false; n];
    if ranking.len() != n || ranking.iter().any(|&k| k >= n || std::mem::replace(&mut seen[k], true)) {
        return Err(Error::Evaluation("ranking must be a permutation of the features".into()));
    }
    let labels = test.target();
    let rows = test.row_count();
    let x = test.feature_matrix();
    let names = test.feature_names();
    let mut inserted = vec![false; n];
    let mut steps = Vec::with_capacity(n);
    for (k, &feature) in ranking.iter().enumerate() {
        inserted[feature] = true;
        let masked = DMatrix::from_fn(rows, n, |r, c| if inserted[c] { x[(r, c)] } else { mask.value(r, c) });
        let p = model.predict_batch(&masked)?;
        steps.push(InsertionStep {
            inserted: k + 1,
            metrics: Metrics::compute(&p, labels)?,
        });
    }
    let per_step: Vec<Metrics> = steps.iter().map(|s| s.metrics).collect();
    Ok(InsertionCurve {
        ranking: ranking.iter().map(|&k| names[k].clone()).collect(),
        steps,
        aggregate: Metrics::combine(&per_step, crate::linalg::mean),
    })
}

/// Curves for one ranking method over several seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InsertionReport {
    pub method: String,
    pub seeds: Vec<u64>,
    pub runs: Vec<InsertionCurve>,
    pub mean: Metrics,
    /// Sample standard deviation across runs (zero for a single run).
    pub sd: Metrics,
}

impl InsertionReport {
    pub fn from_runs(method: impl Into<String>, seeds: Vec<u64>, runs: Vec<InsertionCurve>) -> Result<Self> {
        if runs.is_empty() || runs.len() != seeds.len() {
            return Err(Error::Evaluation("one curve is needed per seed".into()));
        }
        let aggregates: Vec<Metrics> = runs.iter().map(|r| r.aggregate).collect();
        Ok(Self {
            method: method.into(),
            seeds,
            mean: Metrics::combine(&aggregates, crate::linalg::mean),
            sd: Metrics::combine(&aggregates, crate::linalg::sd),
            runs,
        })
    }

    /// One CSV row per step per seed.
    pub fn csv_rows(&self) -> Vec<[String; 6]> {
        let mut out = Vec::new();
        for (seed, run) in self.seeds.iter().zip(&self.runs) {
            for s in &run.steps {
                out.push([
                    self.method.clone(),
                    seed.to_string(),
                    s.inserted.to_string(),
                    crate::output::format_float(s.metrics.auroc),
                    crate::output::format_float(s.metrics.cross_entropy),
                    crate::output::format_float(s.metrics.brier),
                ]);
            }
        }
        out
    }
}
