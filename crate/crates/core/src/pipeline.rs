//! End-to-end stages shared by the command-line front end and the FFI layer.

use std::time::Duration;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::attribution::{results_to_json, AttributionResult, CausalSampler, Explainer, Method};
use crate::config::RunConfig;
use crate::data::{builtin_spec, load_csv, sample_sem, train_test_split, DataTable, SemSpec, Split};
use crate::discovery::{default_max_cond_size, pc, Dag, PcResult};
use crate::effects::{estimate_effects, CausalEffects};
use crate::error::{Error, Result};
use crate::evaluation::{
    compare_to_ground_truth, global_importance, insertion_curve, mean_abs_attribution, reduced_feature_ground_truth,
    reduced_feature_set, GroundTruthReport, InsertionCurve, InsertionReport, MaskReference,
};
use crate::model::{ExternalModel, PredictionMode, Predictor};
use crate::rng::{derive_seed, task_rng};

const DATA_STREAM: u64 = 1;
const SPLIT_STREAM: u64 = 2;
const MODEL_STREAM: u64 = 3;
const SAMPLER_STREAM: u64 = 4;
const KERNEL_STREAM: u64 = 5;
const MASK_STREAM: u64 = 6;
const RANKING_STREAM: u64 = 7;

/// Seed of one pipeline component.
pub fn stream_seed(master: u64, stream: u64) -> u64 {
    derive_seed(master, &[stream])
}

/// The true DAG of a structural equation model, over its variables in order.
pub fn sem_dag(spec: &SemSpec) -> Result<Dag> {
    let index = |n: &str| spec.variables.iter().position(|v| v == n);
    let mut edges = Vec::new();
    for (child, eq) in &spec.equations {
        let c = index(child).ok_or_else(|| Error::Data(format!("equation for unknown variable '{child}'")))?;
        for (parent, _) in &eq.parents {
            let p = index(parent).ok_or_else(|| Error::Data(format!("unknown parent '{parent}'")))?;
            edges.push((p, c));
        }
    }
    edges.sort_unstable();
    Dag::new(spec.variables.clone(), &edges)
}

/// Truth sidecar written next to generated data.
pub fn truth_json(spec: &SemSpec) -> Result<serde_json::Value> {
    let dag = sem_dag(spec)?;
    let coefficients: Vec<serde_json::Value> = spec
        .variables
        .iter()
        .filter_map(|v| spec.equations.get(v).map(|eq| (v, eq)))
        .flat_map(|(child, eq)| {
            eq.parents
                .iter()
                .map(move |(p, w)| serde_json::json!({"from": p, "to": child, "coefficient": w}))
        })
        .collect();
    Ok(serde_json::json!({
        "spec": spec,
        "graph": dag.to_cpdag().to_json(),
        "coefficients": coefficients,
    }))
}

/// A loaded dataset with its split and, for built-in data, the true SEM.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub table: DataTable,
    pub split: Split,
    pub sem: Option<SemSpec>,
}

pub fn prepare(cfg: &RunConfig) -> Result<Prepared> {
    let (table, sem) = match (&cfg.dataset.builtin, &cfg.dataset.csv) {
        (Some(name), _) => {
            let spec = builtin_spec(name, stream_seed(cfg.seed, DATA_STREAM))?;
            (sample_sem(&spec, cfg.dataset.n)?, Some(spec))
        }
        (None, Some(path)) => {
            let target = cfg
                .dataset
                .target
                .as_deref()
                .ok_or_else(|| Error::Config("dataset.target is required".into()))?;
            (load_csv(path, target)?, None)
        }
        (None, None) => return Err(Error::Config("no dataset configured".into())),
    };
    let split = train_test_split(&table, cfg.split.test_fraction, stream_seed(cfg.seed, SPLIT_STREAM))?;
    Ok(Prepared { table, split, sem })
}

pub fn discover(cfg: &RunConfig, train: &DataTable) -> Result<PcResult> {
    let cap = cfg
        .discovery
        .max_cond_size
        .unwrap_or_else(|| default_max_cond_size(train.n_columns()));
    let result = pc(train, cfg.discovery.alpha, cap)?;
    log::info!(
        "PC kept {} edges after {} independence tests",
        result.cpdag.n_edges(),
        result.tests_run
    );
    Ok(result)
}

/// Separating sets, orientation conflicts and test count of a PC run.
pub fn discovery_details_json(result: &PcResult) -> serde_json::Value {
    let names = result.cpdag.names();
    let sepsets: Vec<serde_json::Value> = result
        .sepsets
        .iter()
        .map(|(&(a, b), set)| {
            serde_json::json!({
                "pair": [names[a], names[b]],
                "separating_set": set.iter().map(|&k| &names[k]).collect::<Vec<_>>(),
            })
        })
        .collect();
    let conflicts: Vec<serde_json::Value> = result
        .conflicts
        .iter()
        .map(|c| {
            serde_json::json!({
                "collider": [names[c.triple.0], names[c.triple.1], names[c.triple.2]],
                "requested": [names[c.requested.0], names[c.requested.1]],
            })
        })
        .collect();
    serde_json::json!({
        "tests_run": result.tests_run,
        "sepsets": sepsets,
        "orientation_conflicts": conflicts,
    })
}

pub fn effects(cfg: &RunConfig, train: &DataTable, pc: &PcResult) -> Result<CausalEffects> {
    estimate_effects(train, &pc.cpdag, cfg.effects)
}

fn is_binary(values: &[f64]) -> bool {
    values.iter().all(|&v| v == 0.0 || v == 1.0)
}

/// Probability outputs for 0/1 targets unless configured otherwise.
pub fn prediction_mode(cfg: &RunConfig, train: &DataTable) -> PredictionMode {
    cfg.model.prediction_mode.unwrap_or(if is_binary(train.target()) {
        PredictionMode::Probability
    } else {
        PredictionMode::Regression
    })
}

pub fn fit_model(cfg: &RunConfig, train: &DataTable) -> Result<Box<dyn Predictor>> {
    if cfg.model.is_external() {
        let program = cfg.model.program.as_deref().unwrap_or_default();
        let model = ExternalModel::spawn(program, &cfg.model.args, Duration::from_millis(cfg.model.timeout_ms))?
            .with_mode(prediction_mode(cfg, train));
        if model.n_features() != train.n_features() {
            return Err(Error::Model(format!(
                "external predictor expects {} features, data has {}",
                model.n_features(),
                train.n_features()
            )));
        }
        return Ok(Box::new(model));
    }
    let spec = cfg
        .model
        .spec(prediction_mode(cfg, train), stream_seed(cfg.seed, MODEL_STREAM))?;
    Ok(Box::new(spec.train(train)?))
}

/// The rows of `test` that get explained.
pub fn instances(cfg: &RunConfig, test: &DataTable) -> Vec<Vec<f64>> {
    let n = cfg.attribution.max_instances.map_or(test.row_count(), |m| m.min(test.row_count()));
    (0..n).map(|r| test.feature_row(r)).collect()
}

/// Attributions of one method, with the graph artifacts it used.
pub struct AttributionRun {
    pub method: Method,
    pub feature_names: Vec<String>,
    pub results: Vec<AttributionResult>,
    pub causal: Option<(PcResult, CausalEffects)>,
}

impl AttributionRun {
    pub fn to_json(&self) -> Result<serde_json::Value> {
        let ranking = global_importance(&self.results)?;
        let mean_abs = mean_abs_attribution(&self.results)?;
        let n = self.feature_names.len();
        let mean_signed: Vec<f64> = (0..n)
            .map(|k| self.results.iter().map(|r| r.phi_normalized[k]).sum::<f64>() / self.results.len() as f64)
            .collect();
        let mut out = serde_json::json!({
            "method": self.method,
            "feature_names": self.feature_names,
            "summary": {
                "mean_abs": mean_abs,
                "mean_signed": mean_signed,
                "ranking": ranking.iter().map(|&k| &self.feature_names[k]).collect::<Vec<_>>(),
                "degenerate_instances": self.results.iter().filter(|r| r.is_degenerate()).count(),
            },
            "instances": results_to_json(&self.results),
        });
        if let Some((_, effects)) = &self.causal {
            out["effects"] = effects.to_json();
        }
        Ok(out)
    }
}

/// Explains `rows` with `method`; graph stages run only for the causal method.
pub fn attribute_with(
    cfg: &RunConfig,
    train: &DataTable,
    model: &dyn Predictor,
    method: Method,
    rows: &[Vec<f64>],
) -> Result<AttributionRun> {
    let causal = if method == Method::Causal {
        let pc = discover(cfg, train)?;
        let eff = effects(cfg, train, &pc)?;
        Some((pc, eff))
    } else {
        None
    };
    let sampler = match &causal {
        Some((_, eff)) => Some(CausalSampler::new(train, eff.dag.clone())?),
        None => None,
    };
    let explainer = Explainer {
        model,
        train,
        method,
        sampler_config: cfg.attribution.sampler(stream_seed(cfg.seed, SAMPLER_STREAM)),
        kernel_config: cfg.attribution.kernel(stream_seed(cfg.seed, KERNEL_STREAM)),
        causal: sampler.as_ref().zip(causal.as_ref().map(|(_, e)| &e.weights)),
    };
    let results = explainer.explain_rows(rows)?;
    Ok(AttributionRun {
        method,
        feature_names: train.feature_names(),
        results,
        causal,
    })
}

pub fn attribute(cfg: &RunConfig) -> Result<AttributionRun> {
    let prepared = prepare(cfg)?;
    let model = fit_model(cfg, &prepared.split.train)?;
    let rows = instances(cfg, &prepared.split.test);
    attribute_with(cfg, &prepared.split.train, model.as_ref(), cfg.attribution.method, &rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodProfile {
    pub method: String,
    pub mean_abs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedEvaluation {
    pub seed: u64,
    pub profiles: Vec<MethodProfile>,
    pub ground_truth: Vec<GroundTruthReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub rmse_mean: f64,
    pub rmse_sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub task: PredictionMode,
    pub feature_names: Vec<String>,
    /// Features scored against exact ground truth (regression tasks).
    pub reduced_features: Option<Vec<String>>,
    pub seeds: Vec<SeedEvaluation>,
    pub rmse_summary: Vec<MethodSummary>,
    pub insertion: Vec<InsertionReport>,
}

impl EvaluationReport {
    /// Insertion rows for classification tasks, ground-truth profile rows otherwise.
    pub fn csv(&self) -> Result<String> {
        use crate::output::{csv_string, format_float};
        if self.task == PredictionMode::Probability {
            let rows: Vec<[String; 6]> = self.insertion.iter().flat_map(|r| r.csv_rows()).collect();
            return csv_string(&["method", "seed", "step", "auroc", "cross_entropy", "brier"], &rows);
        }
        let mut rows: Vec<[String; 5]> = Vec::new();
        for s in &self.seeds {
            for g in &s.ground_truth {
                for (k, f) in g.reduced_features.iter().enumerate() {
                    rows.push([
                        g.method.clone(),
                        s.seed.to_string(),
                        f.clone(),
                        format_float(g.exact_values[k]),
                        format_float(g.method_values[k]),
                    ]);
                }
            }
        }
        csv_string(&["method", "seed", "feature", "ground_truth", "attribution"], &rows)
    }
}

fn reduced_names(cfg: &RunConfig, prepared: &Prepared, causal: Option<&CausalEffects>) -> Result<Vec<String>> {
    if let Some(names) = &cfg.evaluation.reduced_features {
        return Ok(names.clone());
    }
    let train = &prepared.split.train;
    let dag = match (&prepared.sem, causal) {
        (Some(spec), _) => {
            let dag = sem_dag(spec)?;
            if dag.names() != train.column_names() {
                return Err(Error::Evaluation("SEM variables do not match the table".into()));
            }
            dag
        }
        (None, Some(eff)) => eff.dag.clone(),
        (None, None) => {
            let pc = discover(cfg, train)?;
            effects(cfg, train, &pc)?.dag
        }
    };
    let names = train.column_names();
    Ok(reduced_feature_set(&dag, &train.feature_indices(), train.target_index())
        .into_iter()
        .map(|c| names[c].clone())
        .collect())
}

/// Runs every configured method over every evaluation seed.
pub fn evaluate(cfg: &RunConfig) -> Result<EvaluationReport> {
    let mut seeds = Vec::new();
    let mut curves: Vec<(String, Vec<InsertionCurve>)> = Vec::new();
    let mut task = PredictionMode::Regression;
    let mut feature_names = Vec::new();
    let mut reduced_set = None;
    for &seed in &cfg.evaluation.seeds {
        let run_cfg = RunConfig { seed, ..cfg.clone() };
        let prepared = prepare(&run_cfg)?;
        let train = &prepared.split.train;
        let test = &prepared.split.test;
        task = prediction_mode(&run_cfg, train);
        feature_names = train.feature_names();
        let model = fit_model(&run_cfg, train)?;
        let rows = instances(&run_cfg, test);
        let runs = cfg
            .evaluation
            .methods
            .iter()
            .map(|&m| attribute_with(&run_cfg, train, model.as_ref(), m, &rows))
            .collect::<Result<Vec<_>>>()?;
        let profiles = runs
            .iter()
            .map(|r| {
                Ok(MethodProfile {
                    method: r.method.to_string(),
                    mean_abs: mean_abs_attribution(&r.results)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut ground_truth = Vec::new();
        match task {
            PredictionMode::Regression => {
                let causal = runs.iter().find_map(|r| r.causal.as_ref().map(|(_, e)| e));
                let reduced = reduced_names(&run_cfg, &prepared, causal)?;
                let family = run_cfg
                    .model
                    .spec(task, stream_seed(run_cfg.seed, MODEL_STREAM))?;
                let eval_test = test.select_rows(&(0..rows.len()).collect::<Vec<_>>());
                let truth = reduced_feature_ground_truth(&family, train, &eval_test, &reduced)?;
                for r in &runs {
                    ground_truth.push(compare_to_ground_truth(&truth, &r.results)?);
                }
                reduced_set = Some(reduced);
            }
            PredictionMode::Probability => {
                let eval_test = test.select_rows(&(0..rows.len()).collect::<Vec<_>>());
                let mask = MaskReference::build(
                    cfg.evaluation.mask,
                    train,
                    eval_test.row_count(),
                    stream_seed(seed, MASK_STREAM),
                );
                let mut push = |name: String, curve: InsertionCurve| match curves.iter_mut().find(|(n, _)| *n == name) {
                    Some((_, list)) => list.push(curve),
                    None => curves.push((name, vec![curve])),
                };
                for r in &runs {
                    let ranking = global_importance(&r.results)?;
                    push(r.method.to_string(), insertion_curve(model.as_ref(), &eval_test, &ranking, &mask)?);
                }
                if cfg.evaluation.random_ranking {
                    let mut ranking: Vec<usize> = (0..train.n_features()).collect();
                    ranking.shuffle(&mut task_rng(seed, &[RANKING_STREAM]));
                    push("random".into(), insertion_curve(model.as_ref(), &eval_test, &ranking, &mask)?);
                }
            }
        }
        seeds.push(SeedEvaluation {
            seed,
            profiles,
            ground_truth,
        });
    }
    let rmse_summary = cfg
        .evaluation
        .methods
        .iter()
        .filter(|_| task == PredictionMode::Regression)
        .map(|m| {
            let values: Vec<f64> = seeds
                .iter()
                .flat_map(|s| s.ground_truth.iter().filter(|g| g.method == m.to_string()).map(|g| g.rmse))
                .collect();
            MethodSummary {
                method: m.to_string(),
                rmse_mean: crate::linalg::mean(&values),
                rmse_sd: crate::linalg::sd(&values),
            }
        })
        .collect();
    let insertion = curves
        .into_iter()
        .map(|(name, runs)| InsertionReport::from_runs(name, cfg.evaluation.seeds.clone(), runs))
        .collect::<Result<Vec<_>>>()?;
    Ok(EvaluationReport {
        task,
        feature_names,
        reduced_features: reduced_set,
        seeds,
        rmse_summary,
        insertion,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::lung_cancer_spec;

    #[test]
    fn sem_dag_of_builtin() {
        let dag = sem_dag(&lung_cancer_spec(0)).unwrap();
        assert_eq!(dag.edges(), vec![(0, 2), (0, 3), (1, 2), (1, 3)]);
        let truth = truth_json(&lung_cancer_spec(0)).unwrap();
        assert_eq!(truth["coefficients"].as_array().unwrap().len(), 4);
    }

    #[test]
    fn stream_seeds_differ() {
        assert_ne!(stream_seed(1, DATA_STREAM), stream_seed(1, SPLIT_STREAM));
    }
}
